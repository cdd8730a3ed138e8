//! Single-agent stay-or-switch model.
//!
//! An agent on the incumbent system `S` faces sanction probability
//! `p(e) = p0 - alpha_mit * e`, which it can lower by spending effort `e` at
//! cost `k e^2 / 2`. Its expected utility is
//!
//! ```text
//! EU_S(e) = (1 - p(e)) (1 + epsilon + theta N_S) + p(e) (1 + theta N_S - L) - C(e)
//! EU_A    = 1 + theta N_A
//! ```
//!
//! and it switches to the alternative `A` when `EU_A > max_e EU_S(e)`. The
//! sanction probability at which the two sides balance is the critical
//! threshold `p*`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::bisect;

/// Absolute utility tolerance for calling a comparison a tie.
pub const INDIFFERENCE_TOL: f64 = 1e-12;

/// Largest acceptable error of the bisected threshold `p*`.
pub const THRESHOLD_TOL: f64 = 1e-9;

/// Bracket width at which the threshold bisection stops. Much tighter than
/// [`THRESHOLD_TOL`] so the balance condition also holds to ~1e-12 in utility.
const THRESHOLD_XTOL: f64 = 1e-15;

/// Parameters of the single-agent model, validated on construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BaselineFields", into = "BaselineFields")]
pub struct BaselineParams {
    p0: f64,
    alpha_mit: f64,
    k: f64,
    epsilon: f64,
    loss: f64,
    theta: f64,
    n_s: f64,
    n_a: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BaselineFields {
    p0: f64,
    alpha_mit: f64,
    k: f64,
    epsilon: f64,
    loss: f64,
    theta: f64,
    n_s: f64,
    n_a: f64,
}

impl TryFrom<BaselineFields> for BaselineParams {
    type Error = Error;

    fn try_from(f: BaselineFields) -> Result<Self> {
        BaselineParams::new(
            f.p0,
            f.alpha_mit,
            f.k,
            f.epsilon,
            f.loss,
            f.theta,
            f.n_s,
            f.n_a,
        )
    }
}

impl From<BaselineParams> for BaselineFields {
    fn from(p: BaselineParams) -> Self {
        BaselineFields {
            p0: p.p0,
            alpha_mit: p.alpha_mit,
            k: p.k,
            epsilon: p.epsilon,
            loss: p.loss,
            theta: p.theta,
            n_s: p.n_s,
            n_a: p.n_a,
        }
    }
}

pub(crate) fn check_probability(field: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("{v} is not in [0, 1]")))
    }
}

pub(crate) fn check_positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(
            field,
            format!("{v} must be positive and finite"),
        ))
    }
}

pub(crate) fn check_non_negative(field: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(
            field,
            format!("{v} must be non-negative and finite"),
        ))
    }
}

impl BaselineParams {
    /// Arguments follow the field order `p0, alpha_mit, k, epsilon, loss,
    /// theta, n_s, n_a`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        p0: f64,
        alpha_mit: f64,
        k: f64,
        epsilon: f64,
        loss: f64,
        theta: f64,
        n_s: f64,
        n_a: f64,
    ) -> Result<Self> {
        check_probability("p0", p0)?;
        check_non_negative("alpha_mit", alpha_mit)?;
        check_positive("k", k)?;
        check_positive("epsilon", epsilon)?;
        check_positive("loss", loss)?;
        check_non_negative("theta", theta)?;
        check_probability("n_s", n_s)?;
        check_probability("n_a", n_a)?;
        Ok(BaselineParams {
            p0,
            alpha_mit,
            k,
            epsilon,
            loss,
            theta,
            n_s,
            n_a,
        })
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
    pub fn theta(&self) -> f64 {
        self.theta
    }
    pub fn n_s(&self) -> f64 {
        self.n_s
    }
    pub fn n_a(&self) -> f64 {
        self.n_a
    }

    pub fn with_p0(self, p0: f64) -> Result<Self> {
        check_probability("p0", p0)?;
        Ok(BaselineParams { p0, ..self })
    }

    pub fn with_shares(self, n_s: f64, n_a: f64) -> Result<Self> {
        check_probability("n_s", n_s)?;
        check_probability("n_a", n_a)?;
        Ok(BaselineParams { n_s, n_a, ..self })
    }

    pub fn with_theta(self, theta: f64) -> Result<Self> {
        check_non_negative("theta", theta)?;
        Ok(BaselineParams { theta, ..self })
    }

    pub fn with_loss(self, loss: f64) -> Result<Self> {
        check_positive("loss", loss)?;
        Ok(BaselineParams { loss, ..self })
    }

    pub fn with_epsilon(self, epsilon: f64) -> Result<Self> {
        check_positive("epsilon", epsilon)?;
        Ok(BaselineParams { epsilon, ..self })
    }

    /// Largest effort that keeps the unclamped sanction probability
    /// non-negative; zero when effort has no effect.
    pub fn max_effort(&self) -> f64 {
        if self.alpha_mit > 0.0 {
            self.p0 / self.alpha_mit
        } else {
            0.0
        }
    }
}

fn check_effort(e: f64) -> Result<()> {
    if e >= 0.0 && e.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "effort",
            value: e,
            domain: "[0, inf)",
        })
    }
}

/// `p(e) = p0 - alpha_mit * e`, clamped to `[0, 1]`.
pub fn sanction_probability(e: f64, params: &BaselineParams) -> Result<f64> {
    check_effort(e)?;
    Ok(probability_unchecked(e, params))
}

fn probability_unchecked(e: f64, params: &BaselineParams) -> f64 {
    (params.p0 - params.alpha_mit * e).clamp(0.0, 1.0)
}

/// `C(e) = k e^2 / 2`.
pub fn mitigation_cost(e: f64, params: &BaselineParams) -> Result<f64> {
    check_effort(e)?;
    Ok(0.5 * params.k * e * e)
}

/// Expected utility of staying on the incumbent system with effort `e`.
pub fn eu_incumbent(e: f64, params: &BaselineParams) -> Result<f64> {
    check_effort(e)?;
    Ok(eu_incumbent_unchecked(e, params))
}

fn eu_incumbent_unchecked(e: f64, params: &BaselineParams) -> f64 {
    let p = probability_unchecked(e, params);
    let network = params.theta * params.n_s;
    (1.0 - p) * (1.0 + params.epsilon + network) + p * (1.0 + network - params.loss)
        - 0.5 * params.k * e * e
}

/// Expected utility of switching: `1 + theta * n_a`.
pub fn eu_alternative(params: &BaselineParams) -> f64 {
    1.0 + params.theta * params.n_a
}

/// Which end of the feasible effort interval, if any, binds at the optimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryHit {
    None,
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffortSolution {
    pub e_star: f64,
    pub p_at_e_star: f64,
    pub eu_s_star: f64,
    pub boundary_hit: BoundaryHit,
}

/// Maximizes `EU_S` over `[0, p0 / alpha_mit]`.
///
/// The objective is concave there with stationary point
/// `alpha_mit (epsilon + L) / k`; when that lies past the upper end the
/// optimum is the upper end. With `alpha_mit = 0` effort only costs, so the
/// optimum is zero.
pub fn optimal_effort(params: &BaselineParams) -> EffortSolution {
    let (e_star, boundary_hit) = if params.alpha_mit == 0.0 {
        (0.0, BoundaryHit::Lower)
    } else {
        let interior = params.alpha_mit * (params.epsilon + params.loss) / params.k;
        let e_max = params.max_effort();
        if interior > e_max {
            (e_max, BoundaryHit::Upper)
        } else {
            (interior, BoundaryHit::None)
        }
    };
    EffortSolution {
        e_star,
        p_at_e_star: probability_unchecked(e_star, params),
        eu_s_star: eu_incumbent_unchecked(e_star, params),
        boundary_hit,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Stay,
    Switch,
    Indifferent,
}

impl Decision {
    /// Classifies `EU_A - max EU_S`.
    pub fn from_gap(gap: f64) -> Self {
        if gap > INDIFFERENCE_TOL {
            Decision::Switch
        } else if gap < -INDIFFERENCE_TOL {
            Decision::Stay
        } else {
            Decision::Indifferent
        }
    }
}

/// Where the threshold lies relative to the admissible probability range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThresholdRange {
    /// `p*` is in `[0, 1]`.
    Within,
    /// Switching is preferred even at zero sanction risk; `p_star` reports 0.
    BelowZero,
    /// Staying is preferred even under certain sanction; `p_star` reports 1.
    AboveOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub p_star: f64,
    pub p_star_range: ThresholdRange,
    pub decision_at_p0: Decision,
    /// `EU_A - max_e EU_S` at the configured `p0`.
    pub eu_gap: f64,
}

fn gap_at(params: &BaselineParams, p0: f64) -> f64 {
    let at = BaselineParams { p0, ..*params };
    eu_alternative(&at) - optimal_effort(&at).eu_s_star
}

/// Critical sanction probability, found by bisection on `p0`.
///
/// `max_e EU_S` is strictly decreasing in `p0` while `EU_A` does not depend on
/// it, so the switching gap has at most one root in `[0, 1]`.
pub fn critical_threshold(params: &BaselineParams) -> ThresholdResult {
    let eu_gap = gap_at(params, params.p0);
    let decision_at_p0 = Decision::from_gap(eu_gap);

    let g = |p: f64| gap_at(params, p);
    let (p_star, p_star_range) = if g(0.0) > 0.0 {
        (0.0, ThresholdRange::BelowZero)
    } else if g(1.0) < 0.0 {
        (1.0, ThresholdRange::AboveOne)
    } else {
        let root = bisect(g, 0.0, 1.0, THRESHOLD_XTOL, 0.0)
            .expect("gap is monotone with a sign change on [0, 1]");
        (root, ThresholdRange::Within)
    };

    ThresholdResult {
        p_star,
        p_star_range,
        decision_at_p0,
        eu_gap,
    }
}

/// Closed-form `p*`, or `None` when it falls outside `[0, 1]`.
///
/// With `D = epsilon + theta (N_S - N_A)` the threshold is
/// `D / (epsilon + L)` without mitigation, `alpha sqrt(2 D / k)` while the
/// effort cap binds (`p0 <= alpha^2 (epsilon + L) / k`), and
/// `(D + alpha^2 (epsilon + L)^2 / 2k) / (epsilon + L)` once optimal effort is
/// interior.
pub fn critical_threshold_closed_form(params: &BaselineParams) -> Option<f64> {
    let d = params.epsilon + params.theta * (params.n_s - params.n_a);
    let spread = params.epsilon + params.loss;
    let a = params.alpha_mit;
    let p = if a == 0.0 {
        d / spread
    } else {
        if d < 0.0 {
            return None;
        }
        let regime_edge = a * a * spread / params.k;
        let capped = a * (2.0 * d / params.k).sqrt();
        if capped <= regime_edge {
            capped
        } else {
            (d + a * a * spread * spread / (2.0 * params.k)) / spread
        }
    };
    (0.0..=1.0).contains(&p).then_some(p)
}

/// Stay, switch, or tie at the configured `p0`.
pub fn switch_decision(params: &BaselineParams) -> Decision {
    Decision::from_gap(gap_at(params, params.p0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> BaselineParams {
        BaselineParams::new(0.2, 0.5, 2.0, 0.05, 0.5, 0.1, 0.9, 0.1).unwrap()
    }

    fn grid_argmax(params: &BaselineParams, hi: f64, step: f64) -> (f64, f64) {
        let n = (hi / step).round() as usize;
        (0..=n)
            .map(|i| {
                let e = i as f64 * step;
                (e, eu_incumbent(e, params).unwrap())
            })
            .fold((0.0, f64::NEG_INFINITY), |best, cur| {
                if cur.1 > best.1 {
                    cur
                } else {
                    best
                }
            })
    }

    #[test]
    fn construction_names_offending_field() {
        let err = BaselineParams::new(1.2, 0.5, 2.0, 0.05, 0.5, 0.1, 0.9, 0.1).unwrap_err();
        assert!(err.to_string().contains("`p0`"), "{err}");
        let err = BaselineParams::new(0.2, 0.5, 0.0, 0.05, 0.5, 0.1, 0.9, 0.1).unwrap_err();
        assert!(err.to_string().contains("`k`"), "{err}");
        let err = BaselineParams::new(0.2, -0.1, 2.0, 0.05, 0.5, 0.1, 0.9, 0.1).unwrap_err();
        assert!(err.to_string().contains("`alpha_mit`"), "{err}");
        let err = BaselineParams::new(0.2, 0.5, 2.0, 0.05, 0.5, 0.1, 0.9, f64::NAN).unwrap_err();
        assert!(err.to_string().contains("`n_a`"), "{err}");
    }

    #[test]
    fn json_rejects_unknown_and_invalid() {
        let ok = r#"{"p0":0.2,"alpha_mit":0.5,"k":2,"epsilon":0.05,"loss":0.5,"theta":0.1,"n_s":0.9,"n_a":0.1}"#;
        let p: BaselineParams = serde_json::from_str(ok).unwrap();
        assert_eq!(p, reference());
        let bad = ok.replace("\"k\"", "\"kk\"");
        let err = serde_json::from_str::<BaselineParams>(&bad).unwrap_err();
        assert!(err.to_string().contains("kk"), "{err}");
        let invalid = ok.replace("\"loss\":0.5", "\"loss\":-1");
        let err = serde_json::from_str::<BaselineParams>(&invalid).unwrap_err();
        assert!(err.to_string().contains("loss"), "{err}");
    }

    #[test]
    fn sanction_probability_examples() {
        let p = reference();
        assert_eq!(sanction_probability(0.0, &p).unwrap(), 0.2);
        assert!((sanction_probability(0.1, &p).unwrap() - 0.15).abs() < 1e-15);
        assert_eq!(sanction_probability(1.0, &p).unwrap(), 0.0);
        assert!(sanction_probability(-0.1, &p).is_err());
    }

    #[test]
    fn mitigation_cost_examples() {
        let p = reference();
        assert_eq!(mitigation_cost(0.0, &p).unwrap(), 0.0);
        assert!((mitigation_cost(0.2, &p).unwrap() - 0.04).abs() < 1e-15);
        let k3 = BaselineParams::new(0.2, 0.5, 3.0, 0.05, 0.5, 0.1, 0.9, 0.1).unwrap();
        assert_eq!(mitigation_cost(1.0, &k3).unwrap(), 1.5);
        assert!(mitigation_cost(-1.0, &p).is_err());
    }

    #[test]
    fn eu_incumbent_examples() {
        let p = reference();
        assert!((eu_incumbent(0.0, &p).unwrap() - 1.030).abs() < 1e-12);
        let safe = BaselineParams::new(0.0, 0.5, 2.0, 0.05, 0.5, 0.0, 0.9, 0.1).unwrap();
        assert!((eu_incumbent(0.0, &safe).unwrap() - 1.05).abs() < 1e-15);
        assert!((eu_incumbent(0.1375, &p).unwrap() - 1.04890625).abs() < 1e-12);
        assert!(eu_incumbent(-1e-3, &p).is_err());
    }

    #[test]
    fn eu_alternative_examples() {
        let p = reference();
        assert_eq!(eu_alternative(&p.with_theta(0.0).unwrap()), 1.0);
        assert!((eu_alternative(&p) - 1.01).abs() < 1e-15);
        let full = p.with_shares(0.0, 1.0).unwrap();
        assert!((eu_alternative(&full) - 1.1).abs() < 1e-15);
    }

    #[test]
    fn optimal_effort_interior_matches_grid() {
        let p = reference();
        let sol = optimal_effort(&p);
        assert_eq!(sol.boundary_hit, BoundaryHit::None);
        assert!((sol.e_star - 0.1375).abs() < 1e-15);
        assert!((sol.p_at_e_star - 0.13125).abs() < 1e-15);
        assert!((sol.eu_s_star - 1.04890625).abs() < 1e-12);

        let (e_grid, u_grid) = grid_argmax(&p, 0.4, 1e-5);
        assert!((e_grid - sol.e_star).abs() < 1e-6);
        assert!(sol.eu_s_star >= u_grid - 1e-12);
    }

    #[test]
    fn optimal_effort_without_mitigation() {
        let p = BaselineParams::new(0.2, 0.0, 2.0, 0.05, 0.5, 0.1, 0.9, 0.1).unwrap();
        let sol = optimal_effort(&p);
        assert_eq!(sol.e_star, 0.0);
        assert_eq!(sol.boundary_hit, BoundaryHit::Lower);
    }

    #[test]
    fn optimal_effort_upper_boundary() {
        let p = BaselineParams::new(0.05, 1.0, 0.1, 0.05, 0.5, 0.0, 1.0, 0.0).unwrap();
        let sol = optimal_effort(&p);
        assert_eq!(sol.boundary_hit, BoundaryHit::Upper);
        assert!((sol.e_star - 0.05).abs() < 1e-15);
        assert_eq!(sol.p_at_e_star, 0.0);
        let (e_grid, _) = grid_argmax(&p, 0.05, 1e-5);
        assert!((e_grid - 0.05).abs() < 1e-9);
    }

    #[test]
    fn threshold_without_mitigation_is_linear() {
        let p = BaselineParams::new(0.2, 0.0, 2.0, 0.05, 0.5, 0.1, 0.9, 0.1).unwrap();
        let t = critical_threshold(&p);
        let expected = (0.05 + 0.1 * 0.8) / 0.55;
        assert_eq!(t.p_star_range, ThresholdRange::Within);
        assert!((t.p_star - expected).abs() < 1e-12);
        assert!((t.p_star - 0.2363636363636).abs() < 1e-12);
        assert!((critical_threshold_closed_form(&p).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn threshold_reference() {
        let t = critical_threshold(&reference());
        assert!((t.p_star - 0.270_738_636_363_636_4).abs() < 1e-9);
        assert_eq!(t.decision_at_p0, Decision::Stay);
        assert!((t.eu_gap - (1.01 - 1.04890625)).abs() < 1e-12);
        let closed = critical_threshold_closed_form(&reference()).unwrap();
        assert!((closed - t.p_star).abs() < 1e-9);
    }

    #[test]
    fn threshold_symmetric_networks() {
        for theta in [0.0, 0.3, 2.0] {
            let p = BaselineParams::new(0.2, 0.0, 2.0, 0.05, 0.5, theta, 0.4, 0.4).unwrap();
            let t = critical_threshold(&p);
            assert!((t.p_star - 0.05 / 0.55).abs() < 1e-12);
        }
    }

    #[test]
    fn threshold_out_of_range() {
        // Large alternative network: switching wins even without risk.
        let p = BaselineParams::new(0.1, 0.5, 2.0, 0.05, 0.5, 1.0, 0.0, 1.0).unwrap();
        let t = critical_threshold(&p);
        assert_eq!(t.p_star_range, ThresholdRange::BelowZero);
        assert_eq!(t.decision_at_p0, Decision::Switch);
        assert_eq!(critical_threshold_closed_form(&p), None);
        // Tiny loss: staying wins even under certain sanction.
        let p = BaselineParams::new(0.5, 0.0, 2.0, 0.5, 0.01, 1.0, 1.0, 0.0).unwrap();
        let t = critical_threshold(&p);
        assert_eq!(t.p_star_range, ThresholdRange::AboveOne);
        assert_eq!(t.decision_at_p0, Decision::Stay);
    }

    #[test]
    fn switch_decision_examples() {
        assert_eq!(switch_decision(&reference()), Decision::Stay);
        let certain = BaselineParams::new(1.0, 0.0, 2.0, 0.05, 10.0, 0.0, 0.9, 0.1).unwrap();
        assert_eq!(switch_decision(&certain), Decision::Switch);
        // p0 = p* = epsilon / (epsilon + L) = 0.25 with alpha = 0 and symmetric shares.
        let tie = BaselineParams::new(0.25, 0.0, 2.0, 0.25, 0.75, 0.1, 0.5, 0.5).unwrap();
        assert_eq!(switch_decision(&tie), Decision::Indifferent);
    }
}
