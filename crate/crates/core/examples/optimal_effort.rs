//! Optimal mitigation effort as the sanction loss grows, including the point
//! where effort hits its cap and the sanction probability reaches zero.

use pml::baseline::{optimal_effort, BaselineParams};

fn main() -> pml::Result<()> {
    let base = BaselineParams::new(0.2, 0.5, 2.0, 0.05, 0.5, 0.1, 0.9, 0.1)?;
    println!(
        "{:>6} {:>10} {:>10} {:>10} {:>8}",
        "loss", "e*", "p(e*)", "EU_S(e*)", "cap"
    );
    for i in 0..=10 {
        let loss = 0.25 * (i + 1) as f64;
        let sol = optimal_effort(&base.with_loss(loss)?);
        println!(
            "{loss:>6.2} {:>10.5} {:>10.5} {:>10.5} {:>8?}",
            sol.e_star, sol.p_at_e_star, sol.eu_s_star, sol.boundary_hit
        );
    }
    Ok(())
}
