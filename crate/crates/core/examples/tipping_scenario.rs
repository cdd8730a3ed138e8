//! A jump in baseline sanction risk at t = 5 moves the tipping share below the
//! current share and the system migrates; without it the share decays.

use pml::replicator::{ReplicatorField, ReplicatorParams};
use pml::scenario::{run_scenario, Shock, ShockSchedule};

fn main() -> pml::Result<()> {
    let params = ReplicatorParams::new(0.2, 2.0, 0.2, 0.5, 2.0, 0.05, 0.5)?;
    let shock = ShockSchedule::new(vec![Shock {
        time: 5.0,
        field: ReplicatorField::P0,
        value: 0.35,
    }]);

    for (name, schedule) in [
        ("no shock", ShockSchedule::default()),
        ("p0 -> 0.35", shock),
    ] {
        let res = run_scenario(0.3, &params, &schedule, 200.0, 0.01)?;
        println!("{name}: long-run share {:.6}", res.long_run_share);
        for (regime, eq) in res.trajectory.regimes.iter().zip(&res.regime_equilibria) {
            println!(
                "  from t = {:<4} tipping share {:?}",
                regime.start_time, eq.tipping_share
            );
        }
        for ev in &res.tipping_events {
            println!(
                "  crossing at t = {:.2}: {:?} (threshold {:.4})",
                ev.time, ev.direction, ev.threshold
            );
        }
        let samples: Vec<String> = [0.0, 5.0, 20.0, 40.0, 80.0]
            .iter()
            .map(|&t| format!("s({t}) = {:.4}", res.trajectory.share_at(t)))
            .collect();
        println!("  {}", samples.join(", "));
    }
    Ok(())
}
