//! Share time series I/O and least-squares fitting of the replicator model.
//!
//! CSV layout:
//!
//! ```text
//! # label: RMB payments share
//! period,share,unit
//! 2018,1.8,percent
//! 2019Q1,0.021,fraction
//! ```
//!
//! `unit` is optional (default `fraction`). Lines starting with `#` are
//! comments; a `# label: ...` comment names the series, otherwise the file
//! stem does. Periods are calendar years (`2018`) or quarters (`2018Q1`,
//! `2018-Q1`), not mixed. One period is one unit of model time.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::linspace;
use crate::replicator::{integrate, ReplicatorField, ReplicatorParams};

/// Minimum number of observations in a series.
pub const MIN_POINTS: usize = 4;
pub const GRID_POINTS: usize = 32;
pub const PASSES: usize = 3;

/// Parameters a fit may vary.
pub const FITTABLE: [ReplicatorField; 4] = [
    ReplicatorField::AlphaNet,
    ReplicatorField::Gamma,
    ReplicatorField::P0,
    ReplicatorField::Epsilon,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Period {
    Year(i32),
    Quarter(i32, u8),
}

impl Period {
    /// Position on the series' time axis, in periods.
    pub fn ordinal(self) -> i64 {
        match self {
            Period::Year(y) => y as i64,
            Period::Quarter(y, q) => 4 * y as i64 + q as i64 - 1,
        }
    }

    fn same_kind(self, other: Period) -> bool {
        matches!(
            (self, other),
            (Period::Year(_), Period::Year(_)) | (Period::Quarter(..), Period::Quarter(..))
        )
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Period::Year(y) => write!(f, "{y}"),
            Period::Quarter(y, q) => write!(f, "{y}Q{q}"),
        }
    }
}

impl FromStr for Period {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let bad = || format!("`{s}` is not a year (2018) or quarter (2018Q1)");
        let upper = s.trim().to_ascii_uppercase();
        match upper.split_once('Q') {
            None => upper.parse().map(Period::Year).map_err(|_| bad()),
            Some((year, q)) => {
                let year = year.strip_suffix('-').unwrap_or(year);
                let y: i32 = year.parse().map_err(|_| bad())?;
                match q.parse::<u8>() {
                    Ok(q @ 1..=4) => Ok(Period::Quarter(y, q)),
                    _ => Err(bad()),
                }
            }
        }
    }
}

impl From<Period> for String {
    fn from(p: Period) -> String {
        p.to_string()
    }
}

impl TryFrom<String> for Period {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesPoint {
    pub period: Period,
    /// Fraction in `[0, 1]`.
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShareSeries {
    pub label: String,
    pub points: Vec<SeriesPoint>,
}

impl ShareSeries {
    /// Builds a series, checking ordering, period kinds and share range.
    pub fn new(label: impl Into<String>, points: Vec<SeriesPoint>) -> Result<Self> {
        for (i, p) in points.iter().enumerate() {
            if !(0.0..=1.0).contains(&p.share) {
                return Err(Error::invalid(
                    format!("points[{i}].share"),
                    format!("{} is not in [0, 1]", p.share),
                ));
            }
            if i > 0 {
                let prev = points[i - 1].period;
                if !prev.same_kind(p.period) {
                    return Err(Error::invalid(
                        format!("points[{i}].period"),
                        "years and quarters cannot be mixed",
                    ));
                }
                if p.period.ordinal() <= prev.ordinal() {
                    return Err(Error::invalid(
                        format!("points[{i}].period"),
                        format!("{} does not follow {prev}", p.period),
                    ));
                }
            }
        }
        Ok(ShareSeries {
            label: label.into(),
            points,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Model times of the observations, first observation at 0.
    pub fn times(&self) -> Vec<f64> {
        let Some(first) = self.points.first() else {
            return Vec::new();
        };
        let t0 = first.period.ordinal();
        self.points
            .iter()
            .map(|p| (p.period.ordinal() - t0) as f64)
            .collect()
    }

    pub fn shares(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.share).collect()
    }

    /// Writes the series as `period,share` CSV with a label comment.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# label: {}", self.label)?;
        writeln!(out, "period,share")?;
        for p in &self.points {
            writeln!(out, "{},{}", p.period, p.share)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Unit {
    Fraction,
    Percent,
}

#[derive(Deserialize)]
struct Row {
    period: String,
    share: String,
    #[serde(default)]
    unit: Option<String>,
}

/// Parses series CSV text. `default_label` is used without a label comment.
pub fn parse_series(text: &str, default_label: &str) -> Result<ShareSeries> {
    let label = text
        .lines()
        .filter_map(|l| l.trim_start().strip_prefix('#'))
        .find_map(|c| c.trim().strip_prefix("label:"))
        .map(|l| l.trim().to_string())
        .unwrap_or_else(|| default_label.to_string());

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());

    let header_line = text
        .lines()
        .position(|l| !l.trim_start().starts_with('#') && !l.trim().is_empty())
        .map_or(1, |i| i as u64 + 1);
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            line: header_line,
            message: e.to_string(),
        })?
        .clone();
    let names: Vec<&str> = headers.iter().collect();
    if names != ["period", "share"] && names != ["period", "share", "unit"] {
        return Err(Error::Parse {
            line: header_line,
            message: format!(
                "header is `{}`; expected `period,share` or `period,share,unit`",
                names.join(",")
            ),
        });
    }
    let width = names.len();

    let mut points: Vec<SeriesPoint> = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        let more = reader.read_record(&mut record).map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line());
        let parse_err = |message: String| Error::Parse { line, message };
        if record.len() != width {
            return Err(parse_err(format!(
                "expected {width} fields, found {}",
                record.len()
            )));
        }
        let row: Row = record
            .deserialize(Some(&headers))
            .map_err(|e| parse_err(e.to_string()))?;
        let period: Period = row.period.parse().map_err(parse_err)?;
        let raw: f64 = row
            .share
            .parse()
            .map_err(|_| parse_err(format!("share `{}` is not a number", row.share)))?;
        let unit = match row.unit.as_deref() {
            None | Some("") | Some("fraction") => Unit::Fraction,
            Some("percent") => Unit::Percent,
            Some(other) => {
                return Err(parse_err(format!(
                    "unit `{other}` is neither `fraction` nor `percent`"
                )))
            }
        };
        let share = match unit {
            Unit::Fraction if (0.0..=1.0).contains(&raw) => raw,
            Unit::Percent if (0.0..=100.0).contains(&raw) => raw / 100.0,
            Unit::Fraction => return Err(parse_err(format!("share {raw} is not in [0, 1]"))),
            Unit::Percent => return Err(parse_err(format!("share {raw} is not in [0, 100]"))),
        };
        if let Some(prev) = points.last() {
            if !prev.period.same_kind(period) {
                return Err(parse_err("years and quarters cannot be mixed".into()));
            }
            if period.ordinal() <= prev.period.ordinal() {
                return Err(parse_err(format!(
                    "period {period} does not follow {}",
                    prev.period
                )));
            }
        }
        points.push(SeriesPoint { period, share });
    }

    if points.len() < MIN_POINTS {
        return Err(Error::TooFewPoints {
            found: points.len(),
            required: MIN_POINTS,
        });
    }
    ShareSeries::new(label, points)
}

/// Reads and validates a series file.
pub fn load_series(path: impl AsRef<Path>) -> Result<ShareSeries> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_series(&text, &stem)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    /// Final values of the free parameters.
    pub fitted: BTreeMap<ReplicatorField, f64>,
    /// Complete parameter set at the optimum.
    pub params: ReplicatorParams,
    pub sse: f64,
    pub fitted_path: ShareSeries,
    /// Objective evaluations spent by the search.
    pub grid_trace: usize,
    /// Best sse after each refinement pass.
    pub pass_sse: Vec<f64>,
    /// Grid points skipped because integration failed.
    pub failed_evaluations: usize,
}

/// Model path for `series`' observation times, started at its first share.
pub fn model_path(series: &ShareSeries, params: &ReplicatorParams, dt: f64) -> Result<Vec<f64>> {
    let times = series.times();
    let (Some(&first), Some(&t_end)) = (series.points.first(), times.last()) else {
        return Err(Error::TooFewPoints {
            found: 0,
            required: MIN_POINTS,
        });
    };
    if t_end == 0.0 {
        return Ok(vec![first.share]);
    }
    let traj = integrate(first.share, params, t_end, dt)?;
    Ok(times.iter().map(|&t| traj.share_at(t)).collect())
}

/// Sum of squared differences between model and observed shares.
pub fn sum_squared_error(series: &ShareSeries, params: &ReplicatorParams, dt: f64) -> Result<f64> {
    let path = model_path(series, params, dt)?;
    let sse: f64 = path
        .iter()
        .zip(&series.points)
        .map(|(m, o)| (m - o.share).powi(2))
        .sum();
    if sse.is_finite() {
        Ok(sse)
    } else {
        Err(Error::NonFinite {
            time: *series.times().last().unwrap_or(&0.0),
        })
    }
}

fn check_fit_inputs(
    series: &ShareSeries,
    free: &[ReplicatorField],
    bounds: &BTreeMap<ReplicatorField, (f64, f64)>,
    fixed: &ReplicatorParams,
    dt: f64,
) -> Result<()> {
    if series.len() < MIN_POINTS {
        return Err(Error::TooFewPoints {
            found: series.len(),
            required: MIN_POINTS,
        });
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Domain {
            name: "dt",
            value: dt,
            domain: "(0, inf)",
        });
    }
    for (i, &f) in free.iter().enumerate() {
        if !FITTABLE.contains(&f) {
            return Err(Error::invalid(
                "free",
                format!("`{f}` cannot be fitted; choose from alpha_net, gamma, p0, epsilon"),
            ));
        }
        if free[..i].contains(&f) {
            return Err(Error::invalid("free", format!("`{f}` is listed twice")));
        }
        let Some(&(lo, hi)) = bounds.get(&f) else {
            return Err(Error::invalid(
                format!("bounds.{f}"),
                "free parameter has no bounds",
            ));
        };
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::invalid(
                format!("bounds.{f}"),
                format!("[{lo}, {hi}] is not a finite interval with lo < hi"),
            ));
        }
        for v in [lo, hi] {
            fixed
                .with(f, v)
                .map_err(|e| Error::invalid(format!("bounds.{f}"), format!("endpoint {v}: {e}")))?;
        }
    }
    Ok(())
}

/// Parameters at grid cell `cell`, the first free parameter varying fastest.
fn grid_params(
    fixed: &ReplicatorParams,
    free: &[ReplicatorField],
    axes: &[Vec<f64>],
    mut cell: usize,
) -> Option<ReplicatorParams> {
    let mut p = *fixed;
    for (f, axis) in free.iter().zip(axes) {
        p = p.with(*f, axis[cell % axis.len()]).ok()?;
        cell /= axis.len();
    }
    Some(p)
}

/// Least-squares fit of the free parameters by coordinate grid refinement.
///
/// Each pass scores the product grid of 32 evenly spaced points per free
/// parameter over the current brackets. After a pass each bracket is halved
/// and recentred on the best value, shifted to stay inside `bounds`. The
/// search starts at the centre of `bounds`. Grid points where integration
/// fails are skipped and counted.
pub fn fit_replicator(
    series: &ShareSeries,
    free: &[ReplicatorField],
    bounds: &BTreeMap<ReplicatorField, (f64, f64)>,
    fixed: &ReplicatorParams,
    dt: f64,
) -> Result<CalibrationResult> {
    check_fit_inputs(series, free, bounds, fixed, dt)?;

    let mut best = *fixed;
    let mut best_sse = f64::INFINITY;
    let mut grid_trace = 0;
    let mut failed = 0;
    let mut pass_sse = Vec::with_capacity(PASSES);

    if free.is_empty() {
        best_sse = sum_squared_error(series, fixed, dt)?;
    } else {
        for &f in free {
            let (lo, hi) = bounds[&f];
            best = best.with(f, 0.5 * (lo + hi))?;
        }
        grid_trace += 1;
        match sum_squared_error(series, &best, dt) {
            Ok(sse) => best_sse = sse,
            Err(_) => failed += 1,
        }

        let mut brackets: Vec<(f64, f64)> = free.iter().map(|f| bounds[f]).collect();
        for _ in 0..PASSES {
            let axes: Vec<Vec<f64>> = brackets
                .iter()
                .zip(free)
                .map(|(&(lo, hi), f)| {
                    let (blo, bhi) = bounds[f];
                    linspace(lo, hi, GRID_POINTS)
                        .into_iter()
                        .map(|v| v.clamp(blo, bhi))
                        .collect()
                })
                .collect();
            let cells = GRID_POINTS.pow(free.len() as u32);
            // Ties resolve to the lowest cell index, so the result does not
            // depend on thread scheduling.
            let scores: Vec<Option<f64>> = (0..cells)
                .into_par_iter()
                .map(|cell| {
                    let p = grid_params(fixed, free, &axes, cell)?;
                    sum_squared_error(series, &p, dt).ok()
                })
                .collect();
            grid_trace += cells;
            for (cell, score) in scores.into_iter().enumerate() {
                match score {
                    Some(sse) if sse < best_sse => {
                        best_sse = sse;
                        best =
                            grid_params(fixed, free, &axes, cell).expect("scored cells are valid");
                    }
                    Some(_) => {}
                    None => failed += 1,
                }
            }
            pass_sse.push(best_sse);
            for (j, &f) in free.iter().enumerate() {
                let (blo, bhi) = bounds[&f];
                let half = 0.5 * (brackets[j].1 - brackets[j].0);
                let lo = (best.get(f) - 0.5 * half).clamp(blo, bhi - half);
                brackets[j] = (lo, (lo + half).min(bhi));
            }
        }
        if !best_sse.is_finite() {
            return Err(Error::Calibration(format!(
                "all {grid_trace} evaluations failed"
            )));
        }
    }

    let path = model_path(series, &best, dt)?;
    let fitted_path = ShareSeries {
        label: format!("{} (fitted)", series.label),
        points: series
            .points
            .iter()
            .zip(path)
            .map(|(o, share)| SeriesPoint {
                period: o.period,
                share,
            })
            .collect(),
    };
    Ok(CalibrationResult {
        fitted: free.iter().map(|&f| (f, best.get(f))).collect(),
        params: best,
        sse: best_sse,
        fitted_path,
        grid_trace,
        pass_sse,
        failed_evaluations: failed,
    })
}
