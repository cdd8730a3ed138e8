//! Equilibria of the replicator dynamics across baseline sanction risk p0.
//! Pass an output path to also write plot-ready CSV.

use pml::plot::emit_plot_series;
use pml::replicator::{ReplicatorField, ReplicatorParams};
use pml::scenario::{sweep, ScanRange};

fn main() -> pml::Result<()> {
    let params = ReplicatorParams::new(0.2, 2.0, 0.2, 0.5, 2.0, 0.05, 0.5)?;
    let range = ScanRange {
        parameter: ReplicatorField::P0,
        lo: 0.0,
        hi: 1.0,
        n: 21,
    };
    let diagram = sweep(&params, &range)?;
    println!("{:>6}  equilibria", "p0");
    for sample in &diagram.samples {
        let points: Vec<String> = sample
            .equilibria
            .points
            .iter()
            .map(|e| format!("{:.4} {}", e.share, e.stability))
            .collect();
        println!("{:>6.2}  {}", sample.value, points.join(" | "));
    }
    if let Some(path) = std::env::args().nth(1) {
        emit_plot_series(&diagram, &path)?;
        println!("wrote {path}");
    }
    Ok(())
}
