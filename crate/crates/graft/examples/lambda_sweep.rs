//! Sensitivity of accuracy and signal admission to the curriculum
//! thresholds.
//!
//! ```sh
//! cargo run --release --example lambda_sweep
//! ```

use graft::eval::{lambda_sweep, ExperimentConfig, FinetuneConfig};
use graft::graph::{generate_sbm_pair, SbmParams};
use graft::signals::{BackboneKind, StudentSpec};
use graft::trainer::TrainConfig;

fn main() -> graft::Result<()> {
    let params = SbmParams {
        block_sizes_source: vec![30, 30],
        block_sizes_target: vec![30, 30],
        p_in: 0.2,
        p_out: 0.03,
        feature_noise: 0.4,
        feature_dim: 6,
    };
    let (source, target) = generate_sbm_pair(&params, 8)?;
    let cfg = ExperimentConfig {
        train: TrainConfig {
            level_sizes: vec![12, 4],
            episodes_max: 40,
            batch_attr: 16,
            batch_edge: 16,
            student: StudentSpec { kind: BackboneKind::Gcn, widths: vec![12, 8] },
            seed: 1,
            ..TrainConfig::default()
        },
        finetune: FinetuneConfig { epochs: 80, ..FinetuneConfig::default() },
        split_ratios: (0.2, 0.2, 0.6),
        split_seed: 0,
        ..ExperimentConfig::default()
    };

    let l1 = [0.05, 0.2, 0.8];
    let l2 = [0.5, 1.0];
    let table = lambda_sweep(&[source], &target, (&l1, &l2), &cfg)?;
    println!("{:>8} {:>8} {:>10} {:>10} {:>10}", "lambda1", "lambda2", "train_acc", "test_acc", "active@0");
    for r in &table.rows {
        println!(
            "{:>8} {:>8} {:>10.4} {:>10.4} {:>10.3}",
            r.lambda1, r.lambda2, r.train_acc, r.test_acc, r.active_fraction_ep0
        );
    }
    Ok(())
}
