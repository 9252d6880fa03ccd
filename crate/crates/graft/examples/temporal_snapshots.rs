//! Temporal mode: chronological snapshot pairs with the last held out,
//! reconstructing the final snapshot from its predecessor.
//!
//! ```sh
//! cargo run --release --example temporal_snapshots
//! ```

use graft::eval::run_temporal;
use graft::graph::generate_snapshots;
use graft::signals::{BackboneKind, StudentSpec};
use graft::trainer::TrainConfig;

fn main() -> graft::Result<()> {
    let snapshots = generate_snapshots(5, &[20, 20, 20], 0.2, 0.03, 0.3, 6, 0.3, 4)?;
    let cfg = TrainConfig {
        level_sizes: vec![15, 5],
        episodes_max: 40,
        batch_attr: 16,
        batch_edge: 16,
        student: StudentSpec { kind: BackboneKind::Gcn, widths: vec![12, 8] },
        seed: 4,
        ..TrainConfig::default()
    };
    let out = std::env::temp_dir().join("graft-example-temporal");
    let artifacts = run_temporal(&snapshots, &cfg, Some(&out))?;
    for (k, (a, b)) in artifacts.pairs.names.iter().enumerate() {
        let role = if k + 1 == artifacts.pairs.names.len() { "held out" } else { "training" };
        println!("pair {k}: ({a}, {b})  [{role}]");
    }
    println!(
        "generated final-snapshot embedding: {} nodes x {} dims",
        artifacts.generated.nrows(),
        artifacts.generated.ncols()
    );
    println!("2-D projections written to {}", out.display());
    Ok(())
}
