//! Plot-ready CSV export: `x,y` or `x,y,label`, one row per point.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::calibration::{Period, ShareSeries};
use crate::error::Result;
use crate::population::{CriticalMassPoint, SimulationRun};
use crate::replicator::Trajectory;
use crate::scenario::{BifurcationDiagram, HysteresisPoint};

#[derive(Debug, Clone, PartialEq)]
pub struct PlotRow {
    pub x: f64,
    pub y: f64,
    pub label: Option<String>,
}

impl PlotRow {
    fn xy(x: f64, y: f64) -> Self {
        PlotRow { x, y, label: None }
    }

    fn labeled(x: f64, y: f64, label: impl Into<String>) -> Self {
        PlotRow {
            x,
            y,
            label: Some(label.into()),
        }
    }
}

/// Results that can be flattened into plot rows.
pub trait PlotSeries {
    fn plot_rows(&self) -> Vec<PlotRow>;
}

impl PlotSeries for Trajectory {
    fn plot_rows(&self) -> Vec<PlotRow> {
        self.times
            .iter()
            .zip(&self.shares)
            .map(|(&t, &s)| PlotRow::xy(t, s))
            .collect()
    }
}

/// One row per equilibrium, labeled with its stability.
impl PlotSeries for BifurcationDiagram {
    fn plot_rows(&self) -> Vec<PlotRow> {
        self.samples
            .iter()
            .flat_map(|sample| {
                sample
                    .equilibria
                    .points
                    .iter()
                    .map(|eq| PlotRow::labeled(sample.value, eq.share, eq.stability.to_string()))
            })
            .collect()
    }
}

/// Quarters map to fractional years (`2018Q3` is 2018.5).
impl PlotSeries for ShareSeries {
    fn plot_rows(&self) -> Vec<PlotRow> {
        self.points
            .iter()
            .map(|p| {
                let x = match p.period {
                    Period::Year(y) => y as f64,
                    Period::Quarter(y, q) => y as f64 + (q - 1) as f64 / 4.0,
                };
                PlotRow::labeled(x, p.share, self.label.clone())
            })
            .collect()
    }
}

impl PlotSeries for SimulationRun {
    fn plot_rows(&self) -> Vec<PlotRow> {
        self.share_path
            .iter()
            .enumerate()
            .map(|(r, &s)| PlotRow::xy(r as f64, s))
            .collect()
    }
}

impl PlotSeries for [HysteresisPoint] {
    fn plot_rows(&self) -> Vec<PlotRow> {
        let up = self
            .iter()
            .map(|p| PlotRow::labeled(p.value, p.up_share, "up"));
        let down = self
            .iter()
            .map(|p| PlotRow::labeled(p.value, p.down_share, "down"));
        up.chain(down).collect()
    }
}

impl PlotSeries for [CriticalMassPoint] {
    fn plot_rows(&self) -> Vec<PlotRow> {
        self.iter()
            .map(|p| PlotRow::xy(p.initial_share, p.mean_final_share))
            .collect()
    }
}

/// Writes rows as CSV. The label column appears when any row has a label.
pub fn write_plot_rows<W: Write>(rows: &[PlotRow], out: W) -> Result<()> {
    let labeled = rows.iter().any(|r| r.label.is_some());
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| std::io::Error::other(e);
    if labeled {
        w.write_record(["x", "y", "label"]).map_err(io)?;
    } else {
        w.write_record(["x", "y"]).map_err(io)?;
    }
    for r in rows {
        let (x, y) = (r.x.to_string(), r.y.to_string());
        if labeled {
            w.write_record([&x, &y, r.label.as_deref().unwrap_or("")])
                .map_err(io)?;
        } else {
            w.write_record([&x, &y]).map_err(io)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `result` as plot-ready CSV at `path`.
pub fn emit_plot_series<T: PlotSeries + ?Sized>(result: &T, path: impl AsRef<Path>) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    write_plot_rows(&result.plot_rows(), file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::{run_population, Heterogeneity, PopulationConfig};
    use crate::replicator::{integrate, ReplicatorField, ReplicatorParams};
    use crate::scenario::{sweep, ScanRange};

    fn reference() -> ReplicatorParams {
        ReplicatorParams::new(0.2, 2.0, 0.2, 0.5, 2.0, 0.05, 0.5).unwrap()
    }

    fn lines(path: &Path) -> Vec<String> {
        std::fs::read_to_string(path)
            .unwrap()
            .lines()
            .map(str::to_string)
            .collect()
    }

    #[test]
    fn trajectory_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let traj = integrate(0.5, &reference(), 0.2, 0.1).unwrap();
        assert_eq!(traj.len(), 3);
        emit_plot_series(&traj, &path).unwrap();
        let l = lines(&path);
        assert_eq!(l[0], "x,y");
        assert_eq!(l.len(), 4);
        assert!(l[1].starts_with("0,0.5"));
    }

    #[test]
    fn diagram_rows_carry_stability() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let range = ScanRange {
            parameter: ReplicatorField::P0,
            lo: 0.2,
            hi: 0.35,
            n: 2,
        };
        let d = sweep(&reference(), &range).unwrap();
        assert!(d.samples.iter().all(|s| s.equilibria.points.len() == 3));
        emit_plot_series(&d, &path).unwrap();
        let l = lines(&path);
        assert_eq!(l[0], "x,y,label");
        assert_eq!(l.len(), 7);
        assert_eq!(l[2], "0.2,0.4140625,Unstable");
    }

    #[test]
    fn simulation_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let base =
            crate::baseline::BaselineParams::new(0.2, 0.5, 2.0, 0.05, 0.45, 0.2, 1.0, 0.0).unwrap();
        let run = run_population(&PopulationConfig {
            n_agents: 50,
            revision_rate: 0.05,
            rounds: 100,
            seed: 1,
            base,
            heterogeneity: Heterogeneity::default(),
            initial_share_alt: 0.5,
        })
        .unwrap();
        emit_plot_series(&run, &path).unwrap();
        assert_eq!(lines(&path).len(), 102);
    }

    #[test]
    fn series_and_hysteresis_rows() {
        let series = crate::calibration::parse_series(
            "# label: a, b\nperiod,share\n2018Q1,0.1\n2018Q2,0.2\n2018Q3,0.3\n2018Q4,0.4\n",
            "x",
        )
        .unwrap();
        let mut buf = Vec::new();
        write_plot_rows(&series.plot_rows(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("2018.25,0.2,\"a, b\"\n"), "{text}");

        let pts = [HysteresisPoint {
            value: 0.1,
            up_share: 0.0,
            down_share: 1.0,
        }];
        let rows = pts.plot_rows();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].label.as_deref(), Some("down"));
    }

    #[test]
    fn unwritable_path() {
        let traj = integrate(0.5, &reference(), 0.2, 0.1).unwrap();
        assert!(emit_plot_series(&traj, "/nonexistent-dir/x.csv").is_err());
    }
}
