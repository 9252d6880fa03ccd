//! Repeated-seed transfer comparison: the full model against the
//! no-curriculum ablation and the no-pre-training baseline on a synthetic
//! source/target pair with shared community structure.
//!
//! ```sh
//! cargo run --release --example transfer_experiment
//! ```

use graft::eval::{run_experiment, Ablation, ExperimentConfig, FinetuneConfig};
use graft::graph::{generate_sbm_pair, SbmParams};
use graft::signals::{BackboneKind, StudentSpec};
use graft::trainer::TrainConfig;

fn main() -> graft::Result<()> {
    let params = SbmParams {
        block_sizes_source: vec![60, 60, 60],
        block_sizes_target: vec![60, 60, 60],
        p_in: 0.15,
        p_out: 0.02,
        feature_noise: 0.5,
        feature_dim: 8,
    };
    let (source, target) = generate_sbm_pair(&params, 42)?;

    let cfg = ExperimentConfig {
        train: TrainConfig {
            level_sizes: vec![24, 6],
            episodes_max: 120,
            batch_attr: 32,
            batch_edge: 32,
            student: StudentSpec { kind: BackboneKind::Gcn, widths: vec![16, 12] },
            seed: 0,
            ..TrainConfig::default()
        },
        finetune: FinetuneConfig { epochs: 150, ..FinetuneConfig::default() },
        split_ratios: (0.04, 0.16, 0.80),
        split_seed: 0,
        jobs: 2,
        ablations: vec![Ablation::Full, Ablation::NoCurriculum, Ablation::NoPretrain],
    };

    let results = run_experiment(&[source], &target, &cfg, 3, None)?;
    println!("{:<16} {:>8} {:>8}   per-run accuracies", "variant", "mean", "std");
    for r in &results {
        let accs: Vec<String> = r.runs.iter().map(|o| format!("{:.3}", o.accuracy)).collect();
        println!(
            "{:<16} {:>8.4} {:>8}   [{}]",
            r.label,
            r.mean,
            r.std.map(|s| format!("{s:.4}")).unwrap_or_else(|| "n/a".into()),
            accs.join(", ")
        );
    }
    Ok(())
}
