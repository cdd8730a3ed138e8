//! Fixed points of the replicator dynamics for the reference parameters and
//! a few short trajectories on either side of the tipping share.

use pml::replicator::{
    find_equilibria, integrate, optimal_z, ReplicatorParams, DEFAULT_GAP_TOL, DEFAULT_GRID_N,
};

fn main() -> pml::Result<()> {
    let params = ReplicatorParams::new(0.2, 2.0, 0.2, 0.5, 2.0, 0.05, 0.5)?;
    let z = optimal_z(&params);
    println!(
        "z* = {}, p(z*) = {}, c = {}",
        z.z_star, z.p_at_z, z.constant_term
    );

    let set = find_equilibria(&params, DEFAULT_GRID_N, DEFAULT_GAP_TOL);
    for eq in &set.points {
        println!("equilibrium {:<10} {}", eq.share, eq.stability);
    }

    println!(
        "\n{:>6} {:>10} {:>10} {:>10}",
        "s0", "s(10)", "s(50)", "s(200)"
    );
    for s0 in [0.2, 0.4, 0.42, 0.6] {
        let traj = integrate(s0, &params, 200.0, 0.01)?;
        println!(
            "{s0:>6.2} {:>10.5} {:>10.5} {:>10.5}",
            traj.share_at(10.0),
            traj.share_at(50.0),
            traj.final_share()
        );
    }
    Ok(())
}
