//! What-if experiments on the replicator model: scheduled parameter shocks,
//! tipping-event detection, equilibrium sweeps and hysteresis scans.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::linspace;
use crate::replicator::{
    check_horizon, find_equilibria, integrate, integrate_regimes, optimal_z, step_count,
    tipping_share, EquilibriumSet, ReplicatorField, ReplicatorParams, Trajectory, DEFAULT_GAP_TOL,
    DEFAULT_GRID_N,
};

/// Branches further apart than this at some parameter value count as hysteresis.
pub const HYSTERESIS_JUMP: f64 = 0.5;

/// An instantaneous step change of one parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Shock {
    pub time: f64,
    pub field: ReplicatorField,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ShockSchedule {
    pub events: Vec<Shock>,
}

impl ShockSchedule {
    pub fn new(events: Vec<Shock>) -> Self {
        ShockSchedule { events }
    }

    /// Checks event ordering and returns the parameter set in force after
    /// each event, starting from `base`.
    pub fn regimes(&self, base: &ReplicatorParams) -> Result<Vec<ReplicatorParams>> {
        let mut prev_time = None;
        let mut params = *base;
        let mut out = Vec::with_capacity(self.events.len());
        for (i, ev) in self.events.iter().enumerate() {
            if !(ev.time >= 0.0 && ev.time.is_finite()) {
                return Err(Error::InvalidSchedule(format!(
                    "event {i} has time {} (must be finite and >= 0)",
                    ev.time
                )));
            }
            if let Some(t) = prev_time {
                if ev.time <= t {
                    return Err(Error::InvalidSchedule(format!(
                        "event {i} at t = {} does not follow t = {t}",
                        ev.time
                    )));
                }
            }
            prev_time = Some(ev.time);
            params = params.with(ev.field, ev.value)?;
            out.push(params);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    AboveToBelow,
    BelowToAbove,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TippingEvent {
    pub time: f64,
    pub direction: Direction,
    /// Threshold in force right after the crossing.
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub trajectory: Trajectory,
    pub tipping_events: Vec<TippingEvent>,
    pub long_run_share: f64,
    /// One set per regime, in schedule order.
    pub regime_equilibria: Vec<EquilibriumSet>,
}

/// Share separating the basins of 0 and 1 under `params`.
///
/// This is the tipping share when one exists. Otherwise it is 0 when every
/// interior share flows up and 1 when every interior share flows down, so a
/// shock that removes the interior equilibrium still registers as a crossing.
pub fn basin_threshold(params: &ReplicatorParams) -> f64 {
    if let Some(s) = tipping_share(params, DEFAULT_GAP_TOL) {
        return s;
    }
    let c = optimal_z(params).constant_term;
    // gap(0) = -alpha_net - c; with no interior root its sign holds everywhere.
    if -params.alpha_net() - c >= 0.0 {
        0.0
    } else {
        1.0
    }
}

/// Integrates piecewise through a shock schedule and records every time the
/// share changes sides of the current basin threshold.
///
/// Event times snap to the nearest step boundary. An empty schedule produces
/// exactly the trajectory of [`integrate`].
pub fn run_scenario(
    s0: f64,
    base: &ReplicatorParams,
    schedule: &ShockSchedule,
    t_end: f64,
    dt: f64,
) -> Result<ScenarioResult> {
    check_horizon(s0, t_end, dt)?;
    let after = schedule.regimes(base)?;
    let n = step_count(t_end, dt);

    let mut regimes: Vec<(usize, ReplicatorParams)> = vec![(0, *base)];
    for (ev, params) in schedule.events.iter().zip(after) {
        if ev.time >= t_end {
            return Err(Error::InvalidSchedule(format!(
                "event at t = {} is not before t_end = {t_end}",
                ev.time
            )));
        }
        let step = ((ev.time / dt).round() as usize).min(n - 1);
        let shocked_before = regimes.len() > 1;
        let last = regimes.last_mut().expect("base regime");
        if step == last.0 {
            if step != 0 || shocked_before {
                return Err(Error::InvalidSchedule(format!(
                    "event at t = {} falls on the same step as the previous event (dt = {dt})",
                    ev.time
                )));
            }
            // A shock at t = 0 replaces the base parameters.
            last.1 = params;
        } else {
            regimes.push((step, params));
        }
    }

    let trajectory = integrate_regimes(s0, &regimes, t_end, dt)?;
    let thresholds: Vec<f64> = regimes.iter().map(|r| basin_threshold(&r.1)).collect();
    let tipping_events = detect_crossings(&trajectory, &regimes, &thresholds);
    let regime_equilibria = regimes
        .iter()
        .map(|r| find_equilibria(&r.1, DEFAULT_GRID_N, DEFAULT_GAP_TOL))
        .collect();

    Ok(ScenarioResult {
        long_run_share: trajectory.final_share(),
        trajectory,
        tipping_events,
        regime_equilibria,
    })
}

fn detect_crossings(
    trajectory: &Trajectory,
    regimes: &[(usize, ReplicatorParams)],
    thresholds: &[f64],
) -> Vec<TippingEvent> {
    let mut events = Vec::new();
    let mut regime = 0;
    let mut last_side: Option<bool> = None;
    for (i, (&t, &s)) in trajectory.times.iter().zip(&trajectory.shares).enumerate() {
        while regime + 1 < regimes.len() && regimes[regime + 1].0 <= i {
            regime += 1;
        }
        let threshold = thresholds[regime];
        if s == threshold {
            continue;
        }
        let above = s > threshold;
        if let Some(was_above) = last_side {
            if was_above != above {
                events.push(TippingEvent {
                    time: t,
                    direction: if above {
                        Direction::BelowToAbove
                    } else {
                        Direction::AboveToBelow
                    },
                    threshold,
                });
            }
        }
        last_side = Some(above);
    }
    events
}

/// A parameter and the interval it is scanned over.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRange {
    pub parameter: ReplicatorField,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl ScanRange {
    fn samples(&self, base: &ReplicatorParams) -> Result<Vec<(f64, ReplicatorParams)>> {
        if !(self.lo < self.hi) {
            return Err(Error::invalid(
                "lo",
                format!("lo = {} must be below hi = {}", self.lo, self.hi),
            ));
        }
        if self.n < 2 {
            return Err(Error::invalid(
                "n",
                format!("{} samples; need at least 2", self.n),
            ));
        }
        linspace(self.lo, self.hi, self.n)
            .into_iter()
            .enumerate()
            .map(|(index, value)| {
                base.with(self.parameter, value)
                    .map(|p| (value, p))
                    .map_err(|e| Error::InvalidSample {
                        index,
                        parameter: self.parameter.name().to_string(),
                        value,
                        source: Box::new(e),
                    })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationSample {
    pub value: f64,
    pub equilibria: EquilibriumSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationDiagram {
    pub parameter: ReplicatorField,
    pub samples: Vec<BifurcationSample>,
}

/// Equilibria at `n` evenly spaced parameter values.
pub fn sweep(base: &ReplicatorParams, range: &ScanRange) -> Result<BifurcationDiagram> {
    let samples = range
        .samples(base)?
        .into_par_iter()
        .map(|(value, params)| BifurcationSample {
            value,
            equilibria: find_equilibria(&params, DEFAULT_GRID_N, DEFAULT_GAP_TOL),
        })
        .collect();
    Ok(BifurcationDiagram {
        parameter: range.parameter,
        samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HysteresisPoint {
    pub value: f64,
    pub up_share: f64,
    pub down_share: f64,
}

/// Quasi-static scan: walk the parameter up then back down, relaxing for
/// `relax_t` at each value starting from the share the previous value left.
///
/// Rows come back in ascending parameter order.
pub fn hysteresis_scan(
    base: &ReplicatorParams,
    range: &ScanRange,
    start_share: f64,
    relax_t: f64,
    dt: f64,
) -> Result<Vec<HysteresisPoint>> {
    check_horizon(start_share, relax_t, dt)?;
    let samples = range.samples(base)?;

    let mut s = start_share;
    let mut up = Vec::with_capacity(samples.len());
    for (_, params) in &samples {
        s = integrate(s, params, relax_t, dt)?.final_share();
        up.push(s);
    }
    let mut down = vec![0.0; samples.len()];
    for (i, (_, params)) in samples.iter().enumerate().rev() {
        s = integrate(s, params, relax_t, dt)?.final_share();
        down[i] = s;
    }

    Ok(samples
        .iter()
        .zip(up.into_iter().zip(down))
        .map(|((value, _), (up_share, down_share))| HysteresisPoint {
            value: *value,
            up_share,
            down_share,
        })
        .collect())
}

/// True when the two branches of a scan separate by more than
/// [`HYSTERESIS_JUMP`] anywhere.
pub fn shows_hysteresis(points: &[HysteresisPoint]) -> bool {
    points
        .iter()
        .any(|p| (p.up_share - p.down_share).abs() > HYSTERESIS_JUMP)
}
