//! Links between the agent population and the replicator ODE.
//!
//! With quadratic network benefits (`gamma = 2`) the replicator gap
//! `theta(s) - theta(1-s) - c` is linear in `s` and equals the population
//! utility gap `EU_A - EU_S(e*)` when the population uses `theta = alpha_net`
//! and a loss net of the forgone premium, `L_pop = L - epsilon`. Both models
//! then agree on the direction of motion at every share.
//!
//! A revision round and an ODE time unit are not the same clock. The round
//! length is fixed by matching halfway times: a best-responding population
//! closes half its distance to the attracting boundary after
//! `ln 0.5 / ln(1 - mu)` rounds, the ODE after `t_half` time units.

use crate::baseline::BaselineParams;
use crate::error::{Error, Result};
use crate::numeric::rk4_step;
use crate::replicator::{replicator_rhs, utility_gap, ReplicatorParams, Trajectory};

/// Longest ODE time searched for the halfway crossing.
const MAX_HALFWAY_TIME: f64 = 1e5;

/// Population parameters whose utility gap matches `params`' replicator gap.
/// Shares start at `(1, 0)`; the simulation overwrites them.
pub fn mean_field_baseline(params: &ReplicatorParams) -> Result<BaselineParams> {
    if params.gamma() != 2.0 {
        return Err(Error::invalid(
            "gamma",
            format!("{} has no population counterpart; need 2", params.gamma()),
        ));
    }
    if params.loss() <= params.epsilon() {
        return Err(Error::invalid(
            "loss",
            format!(
                "{} must exceed epsilon = {} for a population counterpart",
                params.loss(),
                params.epsilon()
            ),
        ));
    }
    BaselineParams::new(
        params.p0(),
        params.alpha_mit(),
        params.k(),
        params.epsilon(),
        params.loss() - params.epsilon(),
        params.alpha_net(),
        1.0,
        0.0,
    )
}

/// ODE time for the share to get halfway from `s0` to the boundary it moves
/// toward.
pub fn halfway_time(params: &ReplicatorParams, s0: f64, dt: f64) -> Result<f64> {
    let gap = utility_gap(s0, params)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Domain {
            name: "dt",
            value: dt,
            domain: "(0, inf)",
        });
    }
    if gap == 0.0 || s0 == 0.0 || s0 == 1.0 {
        return Err(Error::invalid(
            "s0",
            format!("{s0} is a rest point; there is no motion to time"),
        ));
    }
    let limit = if gap > 0.0 { 1.0 } else { 0.0 };
    let target = 0.5 * (s0 + limit);
    let rhs = |x: f64| replicator_rhs(x, params).expect("share clamped to [0, 1]");
    let mut t = 0.0;
    let mut s = s0;
    while t < MAX_HALFWAY_TIME {
        let next = rk4_step(rhs, |x| x.clamp(0.0, 1.0), s, dt).clamp(0.0, 1.0);
        if (next - target) * (s - target) <= 0.0 {
            return Ok(t + dt * (target - s) / (next - s));
        }
        s = next;
        t += dt;
    }
    Err(Error::Calibration(format!(
        "share from {s0} did not reach {target} within t = {MAX_HALFWAY_TIME}"
    )))
}

/// ODE time units per revision round at revision rate `mu`.
pub fn round_duration(params: &ReplicatorParams, s0: f64, mu: f64, dt: f64) -> Result<f64> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::invalid(
            "revision_rate",
            format!("{mu} is not in (0, 1); the time scale is undefined"),
        ));
    }
    let rounds_to_half = 0.5f64.ln() / (1.0 - mu).ln();
    Ok(halfway_time(params, s0, dt)? / rounds_to_half)
}

/// Mean absolute difference between a population share path and the ODE
/// sampled at `round * round_duration`. The trajectory must cover the path.
pub fn mean_abs_deviation(
    share_path: &[f64],
    trajectory: &Trajectory,
    round_duration: f64,
) -> Result<f64> {
    if share_path.is_empty() {
        return Err(Error::TooFewPoints {
            found: 0,
            required: 1,
        });
    }
    let needed = (share_path.len() - 1) as f64 * round_duration;
    let horizon = *trajectory.times.last().expect("non-empty trajectory");
    if needed > horizon * (1.0 + 1e-12) {
        return Err(Error::invalid(
            "t_end",
            format!("trajectory ends at {horizon}; the path needs {needed}"),
        ));
    }
    let total: f64 = share_path
        .iter()
        .enumerate()
        .map(|(r, &s)| (s - trajectory.share_at(r as f64 * round_duration)).abs())
        .sum();
    Ok(total / share_path.len() as f64)
}
