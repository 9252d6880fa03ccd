//! The alternating teacher/student pre-training loop.
//!
//! Each episode fetches a batch of signals per (type, level) group from the
//! target hierarchy, lets the teacher weight them in closed form with the
//! current thresholds, and takes one optimizer step on the weighted signal
//! loss plus the reconstruction loss. Both thresholds grow by `xi` once per
//! full pass over the signal populations. With several source graphs the
//! episodes round-robin over sources, each with its own encoder and
//! translator, sharing the target-side decoder, student, and heads.

mod checkpoint;
mod episode;
mod optimizer;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use episode::{EpisodeBatches, GraphConsts};
pub use optimizer::AdamState;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::curriculum::{schedule_step, weight_batch, CurriculumState, SignalWeights};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::nn::{init_linear, ParamTree};
use crate::signals::{SignalType, StudentSpec};

use episode::EpisodeBuild;

/// Curriculum hyperparameters: initial thresholds and growth ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurriculumConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub xi: f64,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        CurriculumConfig { lambda1: 0.2, lambda2: 1.0, xi: 1.1 }
    }
}

/// Pre-training configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub level_sizes: Vec<usize>,
    pub episodes_max: usize,
    pub learning_rate: f64,
    pub curriculum: CurriculumConfig,
    pub batch_attr: usize,
    pub batch_edge: usize,
    pub neg_ratio: f64,
    pub seed: u64,
    pub student: StudentSpec,
    /// Episodes between teacher updates (1 = every episode).
    pub teacher_period: usize,
    /// Episodes between student updates (1 = every episode).
    pub student_period: usize,
    /// Early-stop patience window in episodes.
    pub patience: usize,
    /// Signal types to pre-train on (ablation: attributes-only drops edges).
    pub signal_types: Vec<SignalType>,
    /// Ablation switch: false pins every signal weight to 1.
    pub curriculum_enabled: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            level_sizes: vec![500, 100],
            episodes_max: 2000,
            learning_rate: 0.005,
            curriculum: CurriculumConfig::default(),
            batch_attr: 64,
            batch_edge: 64,
            neg_ratio: 1.0,
            seed: 0,
            student: StudentSpec::default(),
            teacher_period: 1,
            student_period: 1,
            patience: 100,
            signal_types: vec![SignalType::Attribute, SignalType::Edge],
            curriculum_enabled: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.episodes_max < 1 {
            problems.push("episodes_max must be at least 1".to_string());
        }
        if self.learning_rate <= 0.0 {
            problems.push("learning_rate must be positive".to_string());
        }
        if self.level_sizes.is_empty() {
            problems.push("level_sizes must be non-empty".to_string());
        } else if self.level_sizes.windows(2).any(|w| w[1] >= w[0]) {
            problems.push("level_sizes must strictly decrease".to_string());
        }
        if self.teacher_period == 0 || self.student_period == 0 {
            problems.push("teacher_period and student_period must be at least 1".to_string());
        }
        if self.signal_types.is_empty() {
            problems.push("at least one signal type is required".to_string());
        }
        if self.curriculum.lambda1 <= 0.0 {
            problems.push("curriculum.lambda1 must be positive".to_string());
        }
        if self.curriculum.lambda2 < 0.0 {
            problems.push("curriculum.lambda2 must be non-negative".to_string());
        }
        if self.curriculum.xi <= 1.0 {
            problems.push("curriculum.xi must exceed 1".to_string());
        }
        if self.neg_ratio < 0.0 {
            problems.push("neg_ratio must be non-negative".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    /// Stable hash of the configuration, used to guard checkpoints.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        let mut hex = String::with_capacity(64);
        for b in digest {
            hex.push_str(&format!("{b:02x}"));
        }
        hex
    }
}

/// One row of the pre-training metrics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub episode: usize,
    pub weighted_loss: f64,
    pub recon_loss: f64,
    pub mean_weight: f64,
    pub active_fraction: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

/// Full training state: master parameter tree (encoders, translators,
/// decoder, student, heads), optimizer state, curriculum, RNG, and the
/// per-episode loss history.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub params: ParamTree,
    pub opt: AdamState,
    pub curriculum: CurriculumState,
    /// Thresholds at the most recent teacher update.
    pub teacher_lambda: (f64, f64),
    pub episode: usize,
    pub rng: ChaCha20Rng,
    pub history: Vec<EpisodeMetrics>,
    pub config_hash: String,
    pub num_sources: usize,
    pub source_dims: Vec<usize>,
    pub target_dim: usize,
}

impl TrainState {
    /// Names of all parameter leaves, deterministic order.
    pub fn parameter_manifest(&self) -> Vec<String> {
        self.params.names()
    }
}

/// Signal groups in deterministic order: one (type, level) pair per
/// configured type and hierarchy level.
pub fn signal_groups(cfg: &TrainConfig) -> Vec<(SignalType, usize)> {
    let mut groups = Vec::new();
    for &ty in &cfg.signal_types {
        for level in 0..=cfg.level_sizes.len() {
            groups.push((ty, level));
        }
    }
    groups
}

/// Initializes parameters for all sources, the shared target-side decoder,
/// the student, and the prediction heads.
pub fn init_state(sources: &[Graph], target: &Graph, cfg: &TrainConfig) -> Result<TrainState> {
    cfg.validate()?;
    if sources.is_empty() {
        return Err(Error::Config("at least one source graph is required".into()));
    }
    let coarsest = *cfg.level_sizes.last().unwrap();
    for g in sources.iter().chain(std::iter::once(target)) {
        if g.num_nodes() <= cfg.level_sizes[0] {
            return Err(Error::Config(format!(
                "graph {:?} has {} nodes, not above the first level size {}",
                g.name(),
                g.num_nodes(),
                cfg.level_sizes[0]
            )));
        }
    }
    let _ = coarsest; // equality across graphs holds by the shared level_sizes

    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let d_t = target.feature_dim();
    let mut params = ParamTree::new();
    let mut source_dims = Vec::with_capacity(sources.len());
    for (s, src) in sources.iter().enumerate() {
        let d_s = src.feature_dim();
        source_dims.push(d_s);
        for (l, &size) in cfg.level_sizes.iter().enumerate() {
            params.insert(format!("enc.{s}.{l}.w"), init_linear(d_s, size, &mut rng));
            params.insert(format!("enc.{s}.{l}.b"), init_linear(1, size, &mut rng));
        }
        params.insert(format!("trans.{s}.0.w"), init_linear(d_s, d_t, &mut rng));
        params.insert(format!("trans.{s}.0.b"), init_linear(1, d_t, &mut rng));
        params.insert(format!("trans.{s}.1.w"), init_linear(d_t, d_t, &mut rng));
        params.insert(format!("trans.{s}.1.b"), init_linear(1, d_t, &mut rng));
    }
    for (l, &size) in cfg.level_sizes.iter().enumerate() {
        params.insert(format!("dec.{l}.w"), init_linear(d_t, size, &mut rng));
        params.insert(format!("dec.{l}.b"), init_linear(1, size, &mut rng));
    }
    let student = cfg.student.init(2 * d_t, &mut rng);
    params.merge_namespaced("student", &student);
    let heads = crate::signals::init_heads(
        cfg.student.embedding_dim(),
        d_t,
        cfg.level_sizes.len() + 1,
        &mut rng,
    );
    params.merge_namespaced("heads", &heads);

    let cur = &cfg.curriculum;
    Ok(TrainState {
        params,
        opt: AdamState::new(),
        curriculum: CurriculumState::new(cur.lambda1, cur.lambda2, cur.xi)?,
        teacher_lambda: (cur.lambda1, cur.lambda2),
        episode: 0,
        rng,
        history: Vec::new(),
        config_hash: cfg.hash(),
        num_sources: sources.len(),
        source_dims,
        target_dim: d_t,
    })
}

/// Samples one episode's batches (one per signal group) from the target
/// hierarchy at the given parameters, without touching any state.
pub fn sample_episode_batches(
    params: &ParamTree,
    cfg: &TrainConfig,
    graphs: &GraphConsts,
    source_idx: usize,
    batch_seeds: &[u64],
) -> Result<EpisodeBatches> {
    let build = EpisodeBuild::sample(params, cfg, graphs, source_idx, batch_seeds)?;
    Ok(build.batches)
}

/// Value of the training objective `sum_i w_i J_i + reconstruction` for
/// fixed batches and weights.
pub fn episode_objective(
    params: &ParamTree,
    cfg: &TrainConfig,
    graphs: &GraphConsts,
    batches: &EpisodeBatches,
    weights: &SignalWeights,
) -> Result<f64> {
    let mut build = EpisodeBuild::from_batches(params, cfg, graphs, batches)?;
    let (value, _, _) = build.objective(weights)?;
    Ok(value)
}

/// Objective value plus its analytic gradient for every parameter leaf
/// touched by the episode.
pub fn episode_gradients(
    params: &ParamTree,
    cfg: &TrainConfig,
    graphs: &GraphConsts,
    batches: &EpisodeBatches,
    weights: &SignalWeights,
) -> Result<(f64, std::collections::BTreeMap<String, ndarray::Array2<f64>>)> {
    let mut build = EpisodeBuild::from_batches(params, cfg, graphs, batches)?;
    let (value, _, _) = build.objective(weights)?;
    let grads = build.gradients()?;
    Ok((value, grads))
}

/// Computes per-signal losses with the parameters frozen and applies the
/// closed-form weighting. Never mutates state.
pub fn teacher_step(
    state: &TrainState,
    cfg: &TrainConfig,
    graphs: &GraphConsts,
    batches: &EpisodeBatches,
) -> Result<SignalWeights> {
    let build = EpisodeBuild::from_batches(&state.params, cfg, graphs, batches)?;
    let losses = build.loss_values();
    weight_batch(&losses, &state.curriculum)
}

/// One optimizer step on the weighted signal loss plus the reconstruction
/// loss, updating student, heads, coder, and translator. Teacher weights
/// are treated as constants; curriculum thresholds are untouched.
pub fn student_step(
    state: &TrainState,
    cfg: &TrainConfig,
    graphs: &GraphConsts,
    batches: &EpisodeBatches,
    weights: &SignalWeights,
) -> Result<TrainState> {
    let mut build = EpisodeBuild::from_batches(&state.params, cfg, graphs, batches)?;
    let mut next = state.clone();
    apply_student_update(&mut next, cfg, &mut build, weights)?;
    Ok(next)
}

fn apply_student_update(
    state: &mut TrainState,
    cfg: &TrainConfig,
    build: &mut EpisodeBuild,
    weights: &SignalWeights,
) -> Result<(f64, f64)> {
    let (objective, weighted_loss, recon_loss) = build.objective(weights)?;
    if !objective.is_finite() {
        return Err(Error::Numerical(format!("non-finite training objective {objective}")));
    }
    if objective > 1e6 {
        return Err(Error::Numerical(format!(
            "training objective exploded to {objective} at episode {}",
            state.episode
        )));
    }
    let grads = build.gradients()?;
    for (name, g) in &grads {
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite gradient for parameter {name:?}")));
        }
    }
    state.opt.step(&mut state.params, &grads, cfg.learning_rate)?;
    if let Some(bad) = state.params.first_non_finite() {
        return Err(Error::Numerical(format!("parameter {bad:?} became non-finite")));
    }
    Ok((weighted_loss, recon_loss))
}

/// True once the episode cap is reached or the weighted loss has stopped
/// improving (relative improvement below 1e-5 over the patience window).
pub fn stopping_criterion(history: &[EpisodeMetrics], cfg: &TrainConfig) -> bool {
    if history.len() >= cfg.episodes_max {
        return true;
    }
    let window = cfg.patience;
    if window == 0 || history.len() <= window {
        return false;
    }
    let split = history.len() - window;
    let best_before =
        history[..split].iter().map(|m| m.weighted_loss).fold(f64::INFINITY, f64::min);
    let best_recent =
        history[split..].iter().map(|m| m.weighted_loss).fold(f64::INFINITY, f64::min);
    let improvement = (best_before - best_recent) / best_before.abs().max(1e-12);
    improvement < 1e-5
}

/// Episodes that constitute one full pass over the signal populations
/// (largest population divided by its batch size). The thresholds grow
/// once per pass rather than every episode; per-episode growth at the
/// default ratio would saturate all weights almost immediately.
pub fn episodes_per_pass(target: &Graph, cfg: &TrainConfig) -> usize {
    let mut passes = 1usize;
    if cfg.signal_types.contains(&SignalType::Attribute) && cfg.batch_attr > 0 {
        passes = passes.max(target.num_nodes().div_ceil(cfg.batch_attr));
    }
    if cfg.signal_types.contains(&SignalType::Edge) && cfg.batch_edge > 0 {
        passes = passes.max(target.num_edges().max(1).div_ceil(cfg.batch_edge));
    }
    passes
}

/// Runs the full alternating loop. Returns the final state and the
/// per-episode metrics table.
pub fn pretrain(
    sources: &[Graph],
    target: &Graph,
    cfg: &TrainConfig,
) -> Result<(TrainState, Vec<EpisodeMetrics>)> {
    pretrain_with_rescue(sources, target, cfg, None)
}

/// [`pretrain`] that writes a checkpoint into `rescue_dir` before
/// surfacing a numerical failure.
pub fn pretrain_with_rescue(
    sources: &[Graph],
    target: &Graph,
    cfg: &TrainConfig,
    rescue_dir: Option<&std::path::Path>,
) -> Result<(TrainState, Vec<EpisodeMetrics>)> {
    let state = init_state(sources, target, cfg)?;
    let graphs = GraphConsts::new(sources, target);
    resume_pretrain(state, &graphs, cfg, rescue_dir)
}

/// Continues the loop from an existing state (fresh or checkpointed).
pub fn resume_pretrain(
    mut state: TrainState,
    graphs: &GraphConsts,
    cfg: &TrainConfig,
    rescue_dir: Option<&std::path::Path>,
) -> Result<(TrainState, Vec<EpisodeMetrics>)> {
    let pass_len = episodes_per_pass(graphs.target_graph(), cfg);
    while !stopping_criterion(&state.history, cfg) {
        let source_idx = state.episode % state.num_sources;
        let groups = signal_groups(cfg);
        let seeds: Vec<u64> = groups.iter().map(|_| state.rng.gen()).collect();

        let step = run_episode(&mut state, cfg, graphs, source_idx, &seeds);
        match step {
            Ok(()) => {}
            Err(e) => {
                if matches!(e, Error::Numerical(_)) {
                    if let Some(dir) = rescue_dir {
                        let _ = save_checkpoint(&state, dir);
                        log::error!("numerical failure; checkpoint saved to {}", dir.display());
                    }
                }
                return Err(e);
            }
        }

        if state.episode % pass_len == 0 {
            state.curriculum = schedule_step(&state.curriculum);
        }
    }
    let history = state.history.clone();
    Ok((state, history))
}

fn run_episode(
    state: &mut TrainState,
    cfg: &TrainConfig,
    graphs: &GraphConsts,
    source_idx: usize,
    batch_seeds: &[u64],
) -> Result<()> {
    let mut build =
        EpisodeBuild::sample(&state.params, cfg, graphs, source_idx, batch_seeds)?;

    // Teacher: weight the fetched signals with parameters frozen.
    if cfg.curriculum_enabled && state.episode % cfg.teacher_period == 0 {
        state.teacher_lambda = (state.curriculum.lambda1, state.curriculum.lambda2);
    }
    let weights = if cfg.curriculum_enabled {
        let rule = CurriculumState {
            lambda1: state.teacher_lambda.0,
            lambda2: state.teacher_lambda.1,
            xi: state.curriculum.xi,
            step: state.curriculum.step,
        };
        weight_batch(&build.loss_values(), &rule)?
    } else {
        SignalWeights { weights: vec![1.0; build.num_signals()] }
    };

    // Student: one gradient step on the weighted objective.
    let (weighted_loss, recon_loss) = if state.episode % cfg.student_period == 0 {
        apply_student_update(state, cfg, &mut build, &weights)?
    } else {
        let (_, w, r) = build.objective(&weights)?;
        (w, r)
    };

    state.history.push(EpisodeMetrics {
        episode: state.episode,
        weighted_loss,
        recon_loss,
        mean_weight: weights.mean(),
        active_fraction: weights.active_fraction(),
        lambda1: state.curriculum.lambda1,
        lambda2: state.curriculum.lambda2,
    });
    state.episode += 1;
    Ok(())
}
