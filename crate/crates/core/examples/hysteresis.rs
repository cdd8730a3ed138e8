//! Quasi-static scan of p0 up and back down. Starting from a 1% share, the
//! upward branch decays onto the absorbing boundary at 0 before the interior
//! equilibrium disappears, so it stays near 0 even where 0 is unstable. The
//! downward branch continues from the upward scan's end state, reaches 1
//! while relaxing at p0 = 1, and stays there all the way back down.

use pml::replicator::{ReplicatorField, ReplicatorParams};
use pml::scenario::{hysteresis_scan, shows_hysteresis, ScanRange};

fn main() -> pml::Result<()> {
    let params = ReplicatorParams::new(0.2, 2.0, 0.2, 0.5, 2.0, 0.05, 0.5)?;
    let range = ScanRange {
        parameter: ReplicatorField::P0,
        lo: 0.05,
        hi: 1.0,
        n: 20,
    };
    let points = hysteresis_scan(&params, &range, 0.01, 50.0, 0.01)?;
    println!("{:>6} {:>10} {:>10}", "p0", "up", "down");
    for p in &points {
        println!(
            "{:>6.3} {:>10.5} {:>10.5}",
            p.value, p.up_share, p.down_share
        );
    }
    println!("hysteresis: {}", shows_hysteresis(&points));
    Ok(())
}
