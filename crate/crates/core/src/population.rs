//! Seeded agent-based version of the stay-or-switch game.
//!
//! Each round every agent gets a revision opportunity with probability `mu`.
//! A revising agent re-solves the single-agent problem from [`crate::baseline`]
//! using the population shares at the start of the round and moves to the
//! system it prefers. Shares are then recounted, and every agent still on the
//! incumbent is sanctioned with probability `p(effort)`.
//!
//! Randomness: each agent owns a ChaCha8 stream (`rand_chacha` 0.3.1) seeded
//! with `ChaCha8Rng::seed_from_u64(seed)` and selected with
//! `set_stream(agent_index)`. Heterogeneous parameters are drawn from it at
//! construction, then exactly two uniforms per round (revision, sanction), so
//! runs are bit-reproducible and independent of processing order.

pub mod mean_field;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{
    mitigation_cost, optimal_effort, sanction_probability, switch_decision, BaselineParams,
    Decision,
};
use crate::error::{Error, Result};

/// Revision probability used when none is configured.
pub const DEFAULT_REVISION_RATE: f64 = 0.05;

/// Uniform half-widths around the base value, per parameter. Shares are
/// set by the population itself and cannot be randomized.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Heterogeneity {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_mit: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

impl Heterogeneity {
    fn widths(&self) -> [(&'static str, Option<f64>); 6] {
        [
            ("p0", self.p0),
            ("alpha_mit", self.alpha_mit),
            ("k", self.k),
            ("epsilon", self.epsilon),
            ("loss", self.loss),
            ("theta", self.theta),
        ]
    }

    pub fn is_homogeneous(&self) -> bool {
        self.widths().iter().all(|(_, w)| w.unwrap_or(0.0) == 0.0)
    }

    /// Applies per-field offsets in `[-1, 1]` (scaled by the widths) to `base`.
    fn perturb(&self, base: &BaselineParams, offsets: [f64; 6]) -> Result<BaselineParams> {
        let w = self.widths().map(|(_, w)| w.unwrap_or(0.0));
        let v = |i: usize, b: f64| b + w[i] * offsets[i];
        BaselineParams::new(
            v(0, base.p0()),
            v(1, base.alpha_mit()),
            v(2, base.k()),
            v(3, base.epsilon()),
            v(4, base.loss()),
            v(5, base.theta()),
            base.n_s(),
            base.n_a(),
        )
    }

    fn validate(&self, base: &BaselineParams) -> Result<()> {
        for (i, (name, w)) in self.widths().into_iter().enumerate() {
            let Some(w) = w else { continue };
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::invalid(
                    format!("heterogeneity.{name}"),
                    format!("half-width {w} must be non-negative and finite"),
                ));
            }
            for sign in [-1.0, 1.0] {
                let mut offsets = [0.0; 6];
                offsets[i] = sign;
                self.perturb(base, offsets).map_err(|e| {
                    Error::invalid(
                        format!("heterogeneity.{name}"),
                        format!("half-width {w} leaves the valid range: {e}"),
                    )
                })?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationConfig {
    pub n_agents: usize,
    #[serde(default = "default_revision_rate")]
    pub revision_rate: f64,
    pub rounds: usize,
    #[serde(default)]
    pub seed: u64,
    pub base: BaselineParams,
    #[serde(default)]
    pub heterogeneity: Heterogeneity,
    pub initial_share_alt: f64,
}

fn default_revision_rate() -> f64 {
    DEFAULT_REVISION_RATE
}

impl PopulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_agents < 2 {
            return Err(Error::invalid(
                "n_agents",
                format!("{} agents; need at least 2", self.n_agents),
            ));
        }
        if !(self.revision_rate > 0.0 && self.revision_rate <= 1.0) {
            return Err(Error::invalid(
                "revision_rate",
                format!("{} is not in (0, 1]", self.revision_rate),
            ));
        }
        if !(0.0..=1.0).contains(&self.initial_share_alt) {
            return Err(Error::invalid(
                "initial_share_alt",
                format!("{} is not in [0, 1]", self.initial_share_alt),
            ));
        }
        self.heterogeneity.validate(&self.base)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum System {
    Incumbent,
    Alternative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub params: BaselineParams,
    pub system: System,
    /// Mitigation effort; zero while on the alternative.
    pub effort: f64,
    pub cum_payoff: f64,
    pub sanctioned_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRun {
    /// Share on the alternative system, initial state first.
    pub share_path: Vec<f64>,
    /// Sanctions realized in each round; entry 0 (the initial state) is 0.
    pub sanction_events: Vec<u64>,
    /// Agents on the incumbent during each round's sanction draw; entry 0 is 0.
    pub exposure: Vec<u64>,
    /// Sum of `p(effort)` over exposed agents in each round; entry 0 is 0.
    pub expected_sanctions: Vec<f64>,
    pub final_share: f64,
    pub seed: u64,
}

/// Mutable population state, advanced one round at a time.
#[derive(Debug, Clone)]
pub struct Population {
    config: PopulationConfig,
    agents: Vec<AgentState>,
    streams: Vec<ChaCha8Rng>,
    round: usize,
}

/// Sanction counts for one round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundOutcome {
    pub share_alt: f64,
    pub sanctions: u64,
    pub exposure: u64,
    pub expected_sanctions: f64,
}

fn revise(agent: &mut AgentState, share_alt: f64) {
    let params = agent
        .params
        .with_shares(1.0 - share_alt, share_alt)
        .expect("population shares lie in [0, 1]");
    agent.params = params;
    let effort = optimal_effort(&params).e_star;
    match switch_decision(&params) {
        Decision::Switch => agent.system = System::Alternative,
        Decision::Stay => agent.system = System::Incumbent,
        Decision::Indifferent => {}
    }
    agent.effort = match agent.system {
        System::Incumbent => effort,
        System::Alternative => 0.0,
    };
}

impl Population {
    pub fn new(config: PopulationConfig) -> Result<Self> {
        config.validate()?;
        let n = config.n_agents;
        let n_alt = (n as f64 * config.initial_share_alt).floor() as usize;
        let share_alt = n_alt as f64 / n as f64;
        let homogeneous = config.heterogeneity.is_homogeneous();

        let mut agents = Vec::with_capacity(n);
        let mut streams = Vec::with_capacity(n);
        for i in 0..n {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(i as u64);
            let drawn = if homogeneous {
                config.base
            } else {
                let offsets: [f64; 6] = std::array::from_fn(|_| 2.0 * rng.gen::<f64>() - 1.0);
                config.heterogeneity.perturb(&config.base, offsets)?
            };
            let params = drawn.with_shares(1.0 - share_alt, share_alt)?;
            let system = if i < n_alt {
                System::Alternative
            } else {
                System::Incumbent
            };
            let effort = match system {
                System::Incumbent => optimal_effort(&params).e_star,
                System::Alternative => 0.0,
            };
            agents.push(AgentState {
                params,
                system,
                effort,
                cum_payoff: 0.0,
                sanctioned_count: 0,
            });
            streams.push(rng);
        }
        Ok(Population {
            config,
            agents,
            streams,
            round: 0,
        })
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn count_alternative(&self) -> usize {
        self.agents
            .iter()
            .filter(|a| a.system == System::Alternative)
            .count()
    }

    pub fn share_alternative(&self) -> f64 {
        self.count_alternative() as f64 / self.agents.len() as f64
    }

    /// Runs one round: revisions against the start-of-round shares, recount,
    /// sanction draws, payoff accrual.
    pub fn step(&mut self) -> RoundOutcome {
        let mu = self.config.revision_rate;
        let snapshot = self.share_alternative();

        let draws: Vec<(f64, f64)> = self
            .streams
            .iter_mut()
            .map(|rng| (rng.gen::<f64>(), rng.gen::<f64>()))
            .collect();

        self.agents
            .par_iter_mut()
            .zip(draws.par_iter())
            .for_each(|(agent, &(u_revise, _))| {
                if u_revise < mu {
                    revise(agent, snapshot);
                }
            });

        let share_alt = self.share_alternative();
        let share_inc = 1.0 - share_alt;
        let mut outcome = RoundOutcome {
            share_alt,
            sanctions: 0,
            exposure: 0,
            expected_sanctions: 0.0,
        };
        for (agent, &(_, u_sanction)) in self.agents.iter_mut().zip(&draws) {
            let p = &agent.params;
            match agent.system {
                System::Incumbent => {
                    let prob = sanction_probability(agent.effort, p).expect("effort >= 0");
                    let cost = mitigation_cost(agent.effort, p).expect("effort >= 0");
                    outcome.exposure += 1;
                    outcome.expected_sanctions += prob;
                    let network = 1.0 + p.theta() * share_inc;
                    if u_sanction < prob {
                        agent.sanctioned_count += 1;
                        outcome.sanctions += 1;
                        agent.cum_payoff += network - p.loss() - cost;
                    } else {
                        agent.cum_payoff += network + p.epsilon() - cost;
                    }
                }
                System::Alternative => {
                    agent.cum_payoff += 1.0 + p.theta() * share_alt;
                }
            }
        }
        self.round += 1;
        outcome
    }
}

/// Runs `config.rounds` rounds and records the share path and sanction counts.
pub fn run_population(config: &PopulationConfig) -> Result<SimulationRun> {
    let mut pop = Population::new(*config)?;
    let rounds = config.rounds;
    let mut run = SimulationRun {
        share_path: Vec::with_capacity(rounds + 1),
        sanction_events: Vec::with_capacity(rounds + 1),
        exposure: Vec::with_capacity(rounds + 1),
        expected_sanctions: Vec::with_capacity(rounds + 1),
        final_share: 0.0,
        seed: config.seed,
    };
    run.share_path.push(pop.share_alternative());
    run.sanction_events.push(0);
    run.exposure.push(0);
    run.expected_sanctions.push(0.0);
    for _ in 0..rounds {
        let out = pop.step();
        run.share_path.push(out.share_alt);
        run.sanction_events.push(out.sanctions);
        run.exposure.push(out.exposure);
        run.expected_sanctions.push(out.expected_sanctions);
    }
    run.final_share = *run.share_path.last().expect("initial share recorded");
    Ok(run)
}

/// Seed for the `index`-th derived run (SplitMix64 finalizer over
/// `seed + index`).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalMassPoint {
    pub initial_share: f64,
    pub mean_final_share: f64,
}

/// Adoption S-curve: mean final share for each initial share, over
/// `replicates` runs with seeds derived from `config.seed`.
pub fn critical_mass_experiment(
    config: &PopulationConfig,
    share_grid: &[f64],
    replicates: usize,
) -> Result<Vec<CriticalMassPoint>> {
    if replicates == 0 {
        return Err(Error::invalid("replicates", "need at least one replicate"));
    }
    for (i, &s) in share_grid.iter().enumerate() {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::invalid(
                format!("share_grid[{i}]"),
                format!("{s} is not in [0, 1]"),
            ));
        }
    }
    config.validate()?;

    let jobs: Vec<(usize, usize)> = (0..share_grid.len())
        .flat_map(|i| (0..replicates).map(move |r| (i, r)))
        .collect();
    let finals = jobs
        .par_iter()
        .map(|&(i, r)| {
            let cfg = PopulationConfig {
                initial_share_alt: share_grid[i],
                seed: derive_seed(config.seed, (i * replicates + r) as u64),
                ..*config
            };
            run_population(&cfg).map(|run| run.final_share)
        })
        .collect::<Result<Vec<f64>>>()?;

    Ok(share_grid
        .iter()
        .enumerate()
        .map(|(i, &initial_share)| CriticalMassPoint {
            initial_share,
            mean_final_share: finals[i * replicates..(i + 1) * replicates]
                .iter()
                .sum::<f64>()
                / replicates as f64,
        })
        .collect())
}
