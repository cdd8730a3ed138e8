//! Agent-based run matched to the replicator reference parameters: the
//! adoption S-curve over initial shares, and one path against the ODE.

use pml::population::mean_field::{mean_abs_deviation, mean_field_baseline, round_duration};
use pml::population::{critical_mass_experiment, run_population, Heterogeneity, PopulationConfig};
use pml::replicator::{integrate, tipping_share, ReplicatorParams, DEFAULT_GAP_TOL};

fn main() -> pml::Result<()> {
    let ode_params = ReplicatorParams::new(0.2, 2.0, 0.2, 0.5, 2.0, 0.05, 0.5)?;
    let config = PopulationConfig {
        n_agents: 2_000,
        revision_rate: 0.05,
        rounds: 300,
        seed: 2024,
        base: mean_field_baseline(&ode_params)?,
        heterogeneity: Heterogeneity::default(),
        initial_share_alt: 0.5,
    };

    let grid: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    let curve = critical_mass_experiment(&config, &grid, 3)?;
    println!(
        "mean-field tipping share {:.4}",
        tipping_share(&ode_params, DEFAULT_GAP_TOL).unwrap_or(f64::NAN)
    );
    for p in &curve {
        let bar = "#".repeat((p.mean_final_share * 40.0).round() as usize);
        println!("{:>5.2} {:>7.4} {bar}", p.initial_share, p.mean_final_share);
    }

    let run = run_population(&PopulationConfig {
        n_agents: 10_000,
        rounds: 100,
        ..config
    })?;
    let kappa = round_duration(&ode_params, 0.5, config.revision_rate, 0.01)?;
    let ode = integrate(0.5, &ode_params, 100.0 * kappa, 0.01)?;
    println!(
        "\none round = {kappa:.4} ODE time units; mean |ABM - ODE| over 100 rounds = {:.4}",
        mean_abs_deviation(&run.share_path, &ode, kappa)?
    );
    let sanctions: u64 = run.sanction_events.iter().sum();
    let exposure: u64 = run.exposure.iter().sum();
    println!("{sanctions} sanctions over {exposure} incumbent agent-rounds");
    Ok(())
}
