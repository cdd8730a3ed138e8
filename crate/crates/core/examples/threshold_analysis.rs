//! Critical sanction probability p* and how it moves with the network
//! benefit and the alternative's current share.

use pml::baseline::{critical_threshold, critical_threshold_closed_form, BaselineParams};

fn main() -> pml::Result<()> {
    let base = BaselineParams::new(0.2, 0.5, 2.0, 0.05, 0.5, 0.1, 0.9, 0.1)?;
    let res = critical_threshold(&base);
    println!(
        "reference: p* = {:.10} ({:?}), decision at p0 = {}: {:?}, gap {:+.6}",
        res.p_star,
        res.p_star_range,
        base.p0(),
        res.decision_at_p0,
        res.eu_gap
    );
    if let Some(cf) = critical_threshold_closed_form(&base) {
        println!("closed form agrees to {:.1e}", (cf - res.p_star).abs());
    }

    println!("\n{:>6} {:>8} {:>12} {:>10}", "theta", "N_A", "p*", "range");
    for theta in [0.0, 0.1, 0.3] {
        for n_a in [0.1, 0.3, 0.5, 0.7] {
            let p = base.with_theta(theta)?.with_shares(1.0 - n_a, n_a)?;
            let r = critical_threshold(&p);
            println!(
                "{theta:>6.2} {n_a:>8.2} {:>12.6} {:>10?}",
                r.p_star, r.p_star_range
            );
        }
    }
    Ok(())
}
