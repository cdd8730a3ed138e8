//! Two-system replicator dynamics with endogenous network benefits.
//!
//! Network benefit is `theta(s) = alpha_net * s^gamma` with `gamma > 1`. With
//! `s_B` the share on the alternative system `B` and `s_A = 1 - s_B`:
//!
//! ```text
//! U_A = epsilon - p(z) L + theta(s_A) - C(z)
//! U_B = theta(s_B)
//! ds_B/dt = s_B (1 - s_B) (U_B - U_A)
//! ```
//!
//! Mitigation `z` does not interact with the network term, so the incumbent
//! side collapses to `theta(s_A) + c` with the constant
//! `c = epsilon - p(z*) L - C(z*)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baseline::{check_non_negative, check_positive, check_probability};
use crate::error::{Error, Result};
use crate::numeric::{bisect, rk4_step};

/// Default integration step.
pub const DEFAULT_DT: f64 = 0.01;
/// Default integration horizon.
pub const DEFAULT_T_END: f64 = 200.0;
/// Default grid resolution for [`find_equilibria`].
pub const DEFAULT_GRID_N: usize = 256;
/// Default utility tolerance for equilibrium refinement.
pub const DEFAULT_GAP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ReplicatorFields", into = "ReplicatorFields")]
pub struct ReplicatorParams {
    alpha_net: f64,
    gamma: f64,
    p0: f64,
    alpha_mit: f64,
    k: f64,
    epsilon: f64,
    loss: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReplicatorFields {
    alpha_net: f64,
    gamma: f64,
    p0: f64,
    alpha_mit: f64,
    k: f64,
    epsilon: f64,
    loss: f64,
}

impl TryFrom<ReplicatorFields> for ReplicatorParams {
    type Error = Error;

    fn try_from(f: ReplicatorFields) -> Result<Self> {
        ReplicatorParams::new(
            f.alpha_net,
            f.gamma,
            f.p0,
            f.alpha_mit,
            f.k,
            f.epsilon,
            f.loss,
        )
    }
}

impl From<ReplicatorParams> for ReplicatorFields {
    fn from(p: ReplicatorParams) -> Self {
        ReplicatorFields {
            alpha_net: p.alpha_net,
            gamma: p.gamma,
            p0: p.p0,
            alpha_mit: p.alpha_mit,
            k: p.k,
            epsilon: p.epsilon,
            loss: p.loss,
        }
    }
}

/// Names of the [`ReplicatorParams`] members, for shocks, sweeps and fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplicatorField {
    AlphaNet,
    Gamma,
    P0,
    AlphaMit,
    K,
    Epsilon,
    Loss,
}

impl ReplicatorField {
    pub const ALL: [ReplicatorField; 7] = [
        ReplicatorField::AlphaNet,
        ReplicatorField::Gamma,
        ReplicatorField::P0,
        ReplicatorField::AlphaMit,
        ReplicatorField::K,
        ReplicatorField::Epsilon,
        ReplicatorField::Loss,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ReplicatorField::AlphaNet => "alpha_net",
            ReplicatorField::Gamma => "gamma",
            ReplicatorField::P0 => "p0",
            ReplicatorField::AlphaMit => "alpha_mit",
            ReplicatorField::K => "k",
            ReplicatorField::Epsilon => "epsilon",
            ReplicatorField::Loss => "loss",
        }
    }
}

impl fmt::Display for ReplicatorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ReplicatorField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ReplicatorField::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::UnknownParameter(s.to_string()))
    }
}

impl ReplicatorParams {
    /// Arguments follow the field order `alpha_net, gamma, p0, alpha_mit, k,
    /// epsilon, loss`.
    pub fn new(
        alpha_net: f64,
        gamma: f64,
        p0: f64,
        alpha_mit: f64,
        k: f64,
        epsilon: f64,
        loss: f64,
    ) -> Result<Self> {
        check_positive("alpha_net", alpha_net)?;
        if !(gamma > 1.0 && gamma.is_finite()) {
            return Err(Error::invalid(
                "gamma",
                format!("{gamma} must be finite and strictly greater than 1"),
            ));
        }
        check_probability("p0", p0)?;
        check_non_negative("alpha_mit", alpha_mit)?;
        check_positive("k", k)?;
        check_positive("epsilon", epsilon)?;
        check_positive("loss", loss)?;
        Ok(ReplicatorParams {
            alpha_net,
            gamma,
            p0,
            alpha_mit,
            k,
            epsilon,
            loss,
        })
    }

    pub fn alpha_net(&self) -> f64 {
        self.alpha_net
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn p0(&self) -> f64 {
        self.p0
    }
    pub fn alpha_mit(&self) -> f64 {
        self.alpha_mit
    }
    pub fn k(&self) -> f64 {
        self.k
    }
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
    pub fn loss(&self) -> f64 {
        self.loss
    }

    pub fn get(&self, field: ReplicatorField) -> f64 {
        match field {
            ReplicatorField::AlphaNet => self.alpha_net,
            ReplicatorField::Gamma => self.gamma,
            ReplicatorField::P0 => self.p0,
            ReplicatorField::AlphaMit => self.alpha_mit,
            ReplicatorField::K => self.k,
            ReplicatorField::Epsilon => self.epsilon,
            ReplicatorField::Loss => self.loss,
        }
    }

    /// Copy with one member replaced, revalidated.
    pub fn with(self, field: ReplicatorField, value: f64) -> Result<Self> {
        let mut f = ReplicatorFields::from(self);
        match field {
            ReplicatorField::AlphaNet => f.alpha_net = value,
            ReplicatorField::Gamma => f.gamma = value,
            ReplicatorField::P0 => f.p0 = value,
            ReplicatorField::AlphaMit => f.alpha_mit = value,
            ReplicatorField::K => f.k = value,
            ReplicatorField::Epsilon => f.epsilon = value,
            ReplicatorField::Loss => f.loss = value,
        }
        ReplicatorParams::try_from(f)
    }
}

fn check_share(name: &'static str, s: f64) -> Result<()> {
    if (0.0..=1.0).contains(&s) {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value: s,
            domain: "[0, 1]",
        })
    }
}

/// `alpha_net * s^gamma`.
pub fn network_benefit(s: f64, params: &ReplicatorParams) -> Result<f64> {
    check_share("share", s)?;
    Ok(theta(s, params))
}

fn theta(s: f64, params: &ReplicatorParams) -> f64 {
    params.alpha_net * s.powf(params.gamma)
}

/// Optimal mitigation on the incumbent side and the resulting constant term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalZ {
    pub z_star: f64,
    pub p_at_z: f64,
    pub cost_at_z: f64,
    /// `epsilon - p(z*) L - C(z*)`.
    pub constant_term: f64,
}

/// Maximizes `-p(z) L - C(z)` over `[0, p0 / alpha_mit]`.
///
/// The marginal benefit of effort here is `alpha_mit L`, so the interior
/// candidate is `alpha_mit L / k`.
pub fn optimal_z(params: &ReplicatorParams) -> OptimalZ {
    let z_star = if params.alpha_mit > 0.0 {
        (params.alpha_mit * params.loss / params.k).min(params.p0 / params.alpha_mit)
    } else {
        0.0
    };
    let p_at_z = (params.p0 - params.alpha_mit * z_star).clamp(0.0, 1.0);
    let cost_at_z = 0.5 * params.k * z_star * z_star;
    OptimalZ {
        z_star,
        p_at_z,
        cost_at_z,
        constant_term: params.epsilon - p_at_z * params.loss - cost_at_z,
    }
}

/// `U_B - U_A = theta(s_b) - theta(1 - s_b) - c`.
pub fn utility_gap(s_b: f64, params: &ReplicatorParams) -> Result<f64> {
    check_share("s_b", s_b)?;
    Ok(gap_with(s_b, params, optimal_z(params).constant_term))
}

fn gap_with(s_b: f64, params: &ReplicatorParams, c: f64) -> f64 {
    theta(s_b, params) - theta(1.0 - s_b, params) - c
}

/// `s_b (1 - s_b) (U_B - U_A)`.
pub fn replicator_rhs(s_b: f64, params: &ReplicatorParams) -> Result<f64> {
    check_share("s_b", s_b)?;
    Ok(rhs_with(s_b, params, optimal_z(params).constant_term))
}

fn rhs_with(s_b: f64, params: &ReplicatorParams, c: f64) -> f64 {
    s_b * (1.0 - s_b) * gap_with(s_b, params, c)
}

/// A stretch of a [`Trajectory`] governed by one parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    /// Index into `times` where this regime takes effect.
    pub start_index: usize,
    pub start_time: f64,
    pub params: ReplicatorParams,
}

/// Share path `s_B(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub shares: Vec<f64>,
    pub regimes: Vec<Regime>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_share(&self) -> f64 {
        *self
            .shares
            .last()
            .expect("trajectory holds the initial point")
    }

    /// Linear interpolation at time `t`, held constant outside the recorded span.
    pub fn share_at(&self, t: f64) -> f64 {
        if t <= self.times[0] {
            return self.shares[0];
        }
        let j = self.times.partition_point(|&x| x < t);
        if j >= self.times.len() {
            return self.final_share();
        }
        let (t0, t1) = (self.times[j - 1], self.times[j]);
        let w = (t - t0) / (t1 - t0);
        self.shares[j - 1] + w * (self.shares[j] - self.shares[j - 1])
    }
}

/// Step plan for integrating to `t_end`: every step is `dt` except a shorter
/// last one when `dt` does not divide `t_end`.
pub(crate) fn step_count(t_end: f64, dt: f64) -> usize {
    let n = (t_end / dt - 1e-9).ceil();
    (n as usize).max(1)
}

pub(crate) fn check_horizon(s0: f64, t_end: f64, dt: f64) -> Result<()> {
    if !s0.is_finite() {
        return Err(Error::Domain {
            name: "s0",
            value: s0,
            domain: "[0, 1]",
        });
    }
    check_share("s0", s0)?;
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::Domain {
            name: "t_end",
            value: t_end,
            domain: "(0, inf)",
        });
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Domain {
            name: "dt",
            value: dt,
            domain: "(0, inf)",
        });
    }
    Ok(())
}

/// Integrates with the parameter set switching at given step indices.
///
/// `regimes` must start at step 0 and be sorted by step index. Each step is a
/// classical RK4 step followed by clamping to `[0, 1]`.
pub(crate) fn integrate_regimes(
    s0: f64,
    regimes: &[(usize, ReplicatorParams)],
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    debug_assert!(regimes.first().map(|r| r.0) == Some(0));
    let n = step_count(t_end, dt);
    let mut times = Vec::with_capacity(n + 1);
    let mut shares = Vec::with_capacity(n + 1);
    times.push(0.0);
    shares.push(s0);

    let mut recorded = Vec::with_capacity(regimes.len());
    let mut s = s0;
    let mut next = 0;
    let mut current: Option<(ReplicatorParams, f64)> = None;
    for i in 0..n {
        while next < regimes.len() && regimes[next].0 <= i {
            let params = regimes[next].1;
            current = Some((params, optimal_z(&params).constant_term));
            recorded.push(Regime {
                start_index: i,
                start_time: times[i],
                params,
            });
            next += 1;
        }
        let (params, c) = current.expect("first regime starts at step 0");
        let t = i as f64 * dt;
        let h = if i + 1 == n { t_end - t } else { dt };
        s = rk4_step(|x| rhs_with(x, &params, c), |x| x.clamp(0.0, 1.0), s, h).clamp(0.0, 1.0);
        if !s.is_finite() {
            return Err(Error::NonFinite { time: t + h });
        }
        times.push(if i + 1 == n {
            t_end
        } else {
            (i + 1) as f64 * dt
        });
        shares.push(s);
    }
    Ok(Trajectory {
        times,
        shares,
        regimes: recorded,
    })
}

/// Fixed-step RK4 from `s0` to `t_end`, recording every step.
pub fn integrate(s0: f64, params: &ReplicatorParams, t_end: f64, dt: f64) -> Result<Trajectory> {
    check_horizon(s0, t_end, dt)?;
    integrate_regimes(s0, &[(0, *params)], t_end, dt)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stability {
    Stable,
    Unstable,
    Semistable,
}

impl fmt::Display for Stability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stability::Stable => "Stable",
            Stability::Unstable => "Unstable",
            Stability::Semistable => "Semistable",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub share: f64,
    pub stability: Stability,
}

/// Fixed points of the replicator in ascending order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSet {
    pub points: Vec<Equilibrium>,
    pub tipping_share: Option<f64>,
}

impl EquilibriumSet {
    pub fn interior(&self) -> impl Iterator<Item = &Equilibrium> {
        self.points
            .iter()
            .filter(|e| e.share > 0.0 && e.share < 1.0)
    }
}

fn classify(s: f64, h: f64, params: &ReplicatorParams, c: f64) -> Stability {
    // Boundary points are judged on their single interior side.
    let left = (s > 0.0).then(|| rhs_with((s - h).max(0.0), params, c));
    let right = (s < 1.0).then(|| rhs_with((s + h).min(1.0), params, c));
    let attracting = left.is_none_or(|r| r > 0.0) && right.is_none_or(|r| r < 0.0);
    let repelling = left.is_none_or(|r| r < 0.0) && right.is_none_or(|r| r > 0.0);
    if attracting {
        Stability::Stable
    } else if repelling {
        Stability::Unstable
    } else {
        Stability::Semistable
    }
}

/// Scans the utility gap on `grid_n + 1` points, refines each sign change by
/// bisection and labels every fixed point by the direction of flow one grid
/// step to either side.
///
/// A grid point where `|gap| <= tol` is taken as a root as is; refined roots
/// lie within `tol / 2` of the sign change.
pub fn find_equilibria(params: &ReplicatorParams, grid_n: usize, tol: f64) -> EquilibriumSet {
    let grid_n = grid_n.max(16);
    let c = optimal_z(params).constant_term;
    let h = 1.0 / grid_n as f64;
    let gap = |s: f64| gap_with(s, params, c);

    let mut interior = Vec::new();
    let mut prev_s = 0.0;
    let mut prev_g = gap(0.0);
    for i in 1..=grid_n {
        let s = i as f64 * h;
        let g = gap(s);
        if g.abs() <= tol {
            if i < grid_n {
                interior.push(s);
            }
        } else if prev_g.abs() > tol && prev_g.signum() != g.signum() {
            if let Some(root) = bisect(gap, prev_s, s, tol, 0.0) {
                if root > 0.0 && root < 1.0 {
                    interior.push(root);
                }
            }
        }
        prev_s = s;
        prev_g = g;
    }

    let mut shares = Vec::with_capacity(interior.len() + 2);
    shares.push(0.0);
    shares.extend(interior.iter().copied());
    shares.push(1.0);
    let points = shares
        .into_iter()
        .map(|share| Equilibrium {
            share,
            stability: classify(share, h, params, c),
        })
        .collect();
    EquilibriumSet {
        points,
        tipping_share: (interior.len() == 1).then(|| interior[0]),
    }
}

/// Interior share solving `theta(s) = theta(1 - s) + c`.
///
/// The gap is strictly increasing in `s`, so a root exists exactly when the
/// gap is negative at 0 and positive at 1. The result lies within `tol / 2`
/// of the root.
pub fn tipping_share(params: &ReplicatorParams, tol: f64) -> Option<f64> {
    let c = optimal_z(params).constant_term;
    let gap = |s: f64| gap_with(s, params, c);
    if gap(0.0) < 0.0 && gap(1.0) > 0.0 {
        bisect(gap, 0.0, 1.0, tol, 0.0)
    } else {
        None
    }
}
