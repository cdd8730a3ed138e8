//! Loads the bundled share series and fits replicator parameters to them.
//! Fixtures are synthetic; see the header comment in each file.

use std::collections::BTreeMap;
use std::path::Path;

use pml::calibration::{fit_replicator, load_series};
use pml::replicator::{ReplicatorField, ReplicatorParams, DEFAULT_DT};

fn main() -> pml::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let fixed = ReplicatorParams::new(0.2, 2.0, 0.2, 0.5, 2.0, 0.05, 0.5)?;
    let free = [ReplicatorField::AlphaNet, ReplicatorField::P0];
    let bounds = BTreeMap::from([
        (ReplicatorField::AlphaNet, (0.01, 1.0)),
        (ReplicatorField::P0, (0.0, 1.0)),
    ]);

    for name in [
        "rmb_payments_share.csv",
        "usd_reserve_share.csv",
        "yuan_trade_settlement_share.csv",
    ] {
        let series = load_series(fixtures.join(name))?;
        let res = fit_replicator(&series, &free, &bounds, &fixed, DEFAULT_DT)?;
        println!("{} ({} points)", series.label, series.len());
        for (f, v) in &res.fitted {
            println!("  {f} = {v:.4}");
        }
        println!(
            "  sse = {:.3e} after {} evaluations",
            res.sse, res.grid_trace
        );
        for (obs, fit) in series.points.iter().zip(&res.fitted_path.points).step_by(2) {
            println!(
                "  {:>7} observed {:.4} fitted {:.4}",
                obs.period, obs.share, fit.share
            );
        }
    }
    Ok(())
}
