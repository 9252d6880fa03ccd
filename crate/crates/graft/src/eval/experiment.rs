//! Repeated-seed transfer experiments with ablations, and threshold sweeps.

use std::path::Path;
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::finetune::{
    evaluate_accuracy, finetune, train_baseline, FinetuneConfig,
};
use crate::graph::{Graph, Split};
use crate::signals::SignalType;
use crate::trainer::{pretrain, TrainConfig};

/// Model variants compared by an experiment: the full model plus the
/// standard ablations (attributes-only signals, no curriculum, and the
/// no-pre-training baseline).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    Full,
    AttributesOnly,
    NoCurriculum,
    NoPretrain,
}

impl Ablation {
    pub fn label(&self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::AttributesOnly => "attributes_only",
            Ablation::NoCurriculum => "no_curriculum",
            Ablation::NoPretrain => "no_pretrain",
        }
    }

    /// Applies the ablation to a base training configuration.
    pub fn apply(&self, base: &TrainConfig) -> TrainConfig {
        let mut cfg = base.clone();
        match self {
            Ablation::Full | Ablation::NoPretrain => {}
            Ablation::AttributesOnly => {
                cfg.signal_types = vec![SignalType::Attribute];
            }
            Ablation::NoCurriculum => {
                cfg.curriculum_enabled = false;
            }
        }
        cfg
    }
}

/// Configuration for a repeated-seed experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub train: TrainConfig,
    pub finetune: FinetuneConfig,
    pub split_ratios: (f64, f64, f64),
    pub split_seed: u64,
    /// Worker threads over seeds (1 = fully serial).
    pub jobs: usize,
    pub ablations: Vec<Ablation>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            train: TrainConfig::default(),
            finetune: FinetuneConfig::default(),
            split_ratios: (0.04, 0.16, 0.80),
            split_seed: 0,
            jobs: 1,
            ablations: vec![Ablation::Full],
        }
    }
}

/// One seed's outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub seed: u64,
    pub accuracy: f64,
    pub wall_seconds: f64,
}

/// Accuracy statistics over the repeated runs of one variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub label: String,
    pub runs: Vec<RunOutcome>,
    pub mean: f64,
    /// Sample standard deviation; absent for a single run.
    pub std: Option<f64>,
    pub n_runs: usize,
}

impl ExperimentResult {
    fn from_runs(label: &str, mut runs: Vec<RunOutcome>) -> Self {
        runs.sort_by_key(|r| r.seed);
        let n = runs.len();
        let mean = runs.iter().map(|r| r.accuracy).sum::<f64>() / n.max(1) as f64;
        let std = if n >= 2 {
            let var =
                runs.iter().map(|r| (r.accuracy - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            Some(var.sqrt())
        } else {
            None
        };
        ExperimentResult { label: label.to_string(), runs, mean, std, n_runs: n }
    }
}

fn one_run(
    variant: Ablation,
    sources: &[Graph],
    target: &Graph,
    split: &Split,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<RunOutcome> {
    let start = Instant::now();
    let tcfg = TrainConfig { seed, ..variant.apply(&cfg.train) };
    let fcfg = FinetuneConfig { seed, ..cfg.finetune.clone() };
    let classifier = match variant {
        Ablation::NoPretrain => train_baseline(target, split, &tcfg.student, &fcfg)?.0,
        _ => {
            let (state, _) = pretrain(sources, target, &tcfg)?;
            finetune(&state, sources, target, split, &tcfg, &fcfg)?.0
        }
    };
    let accuracy = evaluate_accuracy(&classifier, target, &split.test)?;
    Ok(RunOutcome { seed, accuracy, wall_seconds: start.elapsed().as_secs_f64() })
}

/// Pre-trains, fine-tunes, and tests `n_runs` seeds for every configured
/// variant. A failed seed aborts the experiment, but results collected up
/// to that point are saved into `partial_out` if given.
pub fn run_experiment(
    sources: &[Graph],
    target: &Graph,
    cfg: &ExperimentConfig,
    n_runs: usize,
    partial_out: Option<&Path>,
) -> Result<Vec<ExperimentResult>> {
    if n_runs == 0 {
        return Err(Error::Param("n_runs must be at least 1".into()));
    }
    let split = crate::graph::make_split(target, cfg.split_ratios, cfg.split_seed)?;
    let mut results = Vec::new();
    for &variant in &cfg.ablations {
        let outcomes: Mutex<Vec<RunOutcome>> = Mutex::new(Vec::new());
        let failure: Mutex<Option<Error>> = Mutex::new(None);
        let next: Mutex<usize> = Mutex::new(0);
        let jobs = cfg.jobs.max(1).min(n_runs);
        std::thread::scope(|scope| {
            for _ in 0..jobs {
                scope.spawn(|| loop {
                    let idx = {
                        let mut guard = next.lock().unwrap();
                        if *guard >= n_runs || failure.lock().unwrap().is_some() {
                            return;
                        }
                        let i = *guard;
                        *guard += 1;
                        i
                    };
                    let seed = cfg.train.seed + idx as u64;
                    match one_run(variant, sources, target, &split, cfg, seed) {
                        Ok(outcome) => outcomes.lock().unwrap().push(outcome),
                        Err(e) => {
                            let mut f = failure.lock().unwrap();
                            if f.is_none() {
                                *f = Some(e);
                            }
                            return;
                        }
                    }
                });
            }
        });
        let collected = outcomes.into_inner().unwrap();
        if let Some(err) = failure.into_inner().unwrap() {
            let mut partial = results;
            if !collected.is_empty() {
                partial.push(ExperimentResult::from_runs(variant.label(), collected));
            }
            if let Some(path) = partial_out {
                let _ = save_results_json(&partial, path);
            }
            return Err(err);
        }
        results.push(ExperimentResult::from_runs(variant.label(), collected));
    }
    Ok(results)
}

pub(crate) fn save_results_json(results: &[ExperimentResult], path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut json = serde_json::to_string_pretty(results).expect("results serialize");
    json.push('\n');
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

/// One cell of a threshold sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda1: f64,
    pub lambda2: f64,
    pub train_acc: f64,
    pub test_acc: f64,
    /// Fraction of signals with non-zero weight at episode 0.
    pub active_fraction_ep0: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

/// Runs one pre-train/fine-tune cycle per (lambda1, lambda2) grid cell,
/// all from the same seed, recording train/test accuracy and the episode-0
/// active-signal fraction.
pub fn lambda_sweep(
    sources: &[Graph],
    target: &Graph,
    grid: (&[f64], &[f64]),
    cfg: &ExperimentConfig,
) -> Result<SweepTable> {
    let (l1s, l2s) = grid;
    if l1s.is_empty() || l2s.is_empty() {
        return Err(Error::Param("sweep grid must be non-empty".into()));
    }
    let split = crate::graph::make_split(target, cfg.split_ratios, cfg.split_seed)?;
    let mut rows = Vec::with_capacity(l1s.len() * l2s.len());
    for &l1 in l1s {
        for &l2 in l2s {
            let mut tcfg = cfg.train.clone();
            tcfg.curriculum.lambda1 = l1;
            tcfg.curriculum.lambda2 = l2;
            let (state, metrics) = pretrain(sources, target, &tcfg)?;
            let (classifier, _) =
                finetune(&state, sources, target, &split, &tcfg, &cfg.finetune)?;
            let train_acc = evaluate_accuracy(&classifier, target, &split.train)?;
            let test_acc = evaluate_accuracy(&classifier, target, &split.test)?;
            rows.push(SweepRow {
                lambda1: l1,
                lambda2: l2,
                train_acc,
                test_acc,
                active_fraction_ep0: metrics.first().map(|m| m.active_fraction).unwrap_or(0.0),
            });
        }
    }
    Ok(SweepTable { rows })
}
