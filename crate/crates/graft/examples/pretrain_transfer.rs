//! Pre-training on the bundled 30-node sample pair: the alternating
//! teacher/student loop with the growing curriculum.
//!
//! ```sh
//! cargo run --example pretrain_transfer
//! ```

use std::path::Path;

use graft::graph::load_graph_bundle;
use graft::signals::{BackboneKind, StudentSpec};
use graft::trainer::{pretrain, TrainConfig};

fn main() -> graft::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/sample");
    let source = load_graph_bundle(data.join("source"))?;
    let target = load_graph_bundle(data.join("target"))?;
    println!(
        "source {} ({} nodes), target {} ({} nodes)",
        source.name(),
        source.num_nodes(),
        target.name(),
        target.num_nodes()
    );

    let cfg = TrainConfig {
        level_sizes: vec![10, 4],
        episodes_max: 120,
        batch_attr: 10,
        batch_edge: 10,
        student: StudentSpec { kind: BackboneKind::Gcn, widths: vec![12, 8] },
        seed: 3,
        ..TrainConfig::default()
    };
    let (state, metrics) = pretrain(&[source], &target, &cfg)?;
    println!("trained {} episodes; {} parameter tensors", state.episode, state.params.len());
    println!("episode  weighted  recon   mean_w  active  lambda1");
    for m in metrics.iter().step_by(20) {
        println!(
            "{:>7}  {:>8.4}  {:>6.4} {:>7.3} {:>7.2} {:>8.4}",
            m.episode, m.weighted_loss, m.recon_loss, m.mean_weight, m.active_fraction, m.lambda1
        );
    }
    let first = &metrics[0];
    let last = metrics.last().unwrap();
    println!(
        "reconstruction loss {:.4} -> {:.4}; thresholds grew {:.3}x",
        first.recon_loss,
        last.recon_loss,
        last.lambda1 / first.lambda1
    );
    Ok(())
}
