//! The experimental surface: fine-tuning and node-classification
//! evaluation, repeated-seed experiments with ablations, threshold sweeps,
//! scalability runs, temporal snapshot pairing, domain-discrepancy
//! estimation with the re-weighted bound check, and report emission.

mod discrepancy;
mod experiment;
mod finetune;
mod report;
mod scalability;
mod temporal;

pub use discrepancy::{bound_check, proxy_discrepancy, BoundReport};
pub use experiment::{
    lambda_sweep, run_experiment, Ablation, ExperimentConfig, ExperimentResult, RunOutcome,
    SweepRow, SweepTable,
};
pub use finetune::{
    evaluate_accuracy, finetune, load_classifier, reconstruct_target, save_classifier,
    train_baseline, Classifier, FinetuneConfig, FinetuneLog,
};
pub use report::{
    collect_bundle, emit_report, pca_2d, read_metrics_csv, scatter_svg, write_metrics_csv,
    Projection2D, ReportBundle,
};
pub use scalability::{scalability_run, ScalabilityCell, ScalabilityConfig, ScalabilityTable};
pub use temporal::{run_temporal, temporal_pairs, TemporalArtifacts, TemporalPairs};
