//! Trainer-level behavior through the public API: alternation contracts,
//! weighted-objective wiring, and pre-training efficacy at desk scale.

use graft::curriculum::SignalWeights;
use graft::graph::{generate_sbm_pair, SbmParams};
use graft::signals::{BackboneKind, StudentSpec};
use graft::trainer::{
    episode_objective, init_state, pretrain, sample_episode_batches, signal_groups, student_step,
    teacher_step, GraphConsts, TrainConfig, TrainState,
};

fn sbm(seed: u64, per_block: usize) -> (graft::graph::Graph, graft::graph::Graph) {
    let params = SbmParams {
        block_sizes_source: vec![per_block, per_block],
        block_sizes_target: vec![per_block, per_block],
        p_in: 0.6,
        p_out: 0.08,
        feature_noise: 0.4,
        feature_dim: 4,
    };
    generate_sbm_pair(&params, seed).unwrap()
}

fn cfg_for(n: usize, lr: f64, seed: u64) -> TrainConfig {
    TrainConfig {
        level_sizes: vec![n / 2, n / 5],
        episodes_max: 50,
        learning_rate: lr,
        batch_attr: n,
        batch_edge: n,
        student: StudentSpec { kind: BackboneKind::Gcn, widths: vec![8, 6] },
        seed,
        ..TrainConfig::default()
    }
}

fn setup(seed: u64, per_block: usize, lr: f64) -> (TrainState, TrainConfig, GraphConsts) {
    let (s, t) = sbm(seed, per_block);
    let cfg = cfg_for(2 * per_block, lr, seed);
    let state = init_state(&[s.clone()], &t, &cfg).unwrap();
    let graphs = GraphConsts::new(&[s], &t);
    (state, cfg, graphs)
}

fn batch_seeds(cfg: &TrainConfig, base: u64) -> Vec<u64> {
    (0..signal_groups(cfg).len() as u64).map(|i| base + i).collect()
}

#[test]
fn teacher_step_is_pure_and_repeatable() {
    let (state, cfg, graphs) = setup(1, 6, 0.005);
    let before = state.params.clone();
    let batches =
        sample_episode_batches(&state.params, &cfg, &graphs, 0, &batch_seeds(&cfg, 50)).unwrap();
    let w1 = teacher_step(&state, &cfg, &graphs, &batches).unwrap();
    let w2 = teacher_step(&state, &cfg, &graphs, &batches).unwrap();
    assert_eq!(w1, w2, "teacher weights changed without a student step");
    assert_eq!(state.params, before, "teacher mutated parameters");
}

#[test]
fn zero_weights_leave_signal_heads_untouched() {
    let (state, cfg, graphs) = setup(2, 6, 0.005);
    let batches =
        sample_episode_batches(&state.params, &cfg, &graphs, 0, &batch_seeds(&cfg, 60)).unwrap();
    let weights = SignalWeights { weights: vec![0.0; batches.num_signals()] };
    let next = student_step(&state, &cfg, &graphs, &batches, &weights).unwrap();
    for name in state.params.names() {
        let before = state.params.get(&name).unwrap();
        let after = next.params.get(&name).unwrap();
        if name.starts_with("heads.") {
            assert_eq!(before, after, "head {name} moved with all-zero weights");
        }
    }
    // Reconstruction gradients still flow into the coder.
    let moved = state
        .params
        .names()
        .iter()
        .filter(|n| n.starts_with("dec.") || n.starts_with("trans."))
        .any(|n| state.params.get(n).unwrap() != next.params.get(n).unwrap());
    assert!(moved, "reconstruction path received no update");
}

#[test]
fn repeated_student_steps_decrease_the_objective() {
    // Full-batch deterministic 10-node pair at learning rate 1e-3: the
    // fixed-weight objective trends down over 50 consecutive steps, with
    // any single-step increase below 1e-3.
    let (state, cfg, graphs) = setup(3, 5, 1e-3);
    let batches =
        sample_episode_batches(&state.params, &cfg, &graphs, 0, &batch_seeds(&cfg, 70)).unwrap();
    let weights = SignalWeights { weights: vec![1.0; batches.num_signals()] };

    let mut state = state;
    let mut values = Vec::new();
    for _ in 0..50 {
        values.push(episode_objective(&state.params, &cfg, &graphs, &batches, &weights).unwrap());
        state = student_step(&state, &cfg, &graphs, &batches, &weights).unwrap();
    }
    values.push(episode_objective(&state.params, &cfg, &graphs, &batches, &weights).unwrap());

    for w in values.windows(2) {
        assert!(w[1] - w[0] <= 1e-3, "objective jumped from {} to {}", w[0], w[1]);
    }
    let head = values[..10].iter().sum::<f64>() / 10.0;
    let tail = values[values.len() - 10..].iter().sum::<f64>() / 10.0;
    assert!(tail < head, "objective trend not decreasing: {head} -> {tail}");
}

#[test]
fn pretraining_reduces_mean_signal_loss_over_seeds() {
    let mut initial_sum = 0.0;
    let mut final_sum = 0.0;
    for seed in 0..5u64 {
        let (s, t) = sbm(100 + seed, 8);
        let cfg = TrainConfig { episodes_max: 60, ..cfg_for(16, 0.005, seed) };
        let graphs = GraphConsts::new(std::slice::from_ref(&s), &t);
        let start = init_state(&[s.clone()], &t, &cfg).unwrap();
        let (end, _) = pretrain(&[s], &t, &cfg).unwrap();

        // Mean per-signal loss on a fresh fixed batch, before vs after:
        // objective(all ones) - objective(all zeros) isolates the signal
        // term from the reconstruction term.
        let seeds = batch_seeds(&cfg, 500 + seed);
        let mean_loss = |st: &TrainState| {
            let batches = sample_episode_batches(&st.params, &cfg, &graphs, 0, &seeds).unwrap();
            let n = batches.num_signals() as f64;
            let ones = SignalWeights { weights: vec![1.0; batches.num_signals()] };
            let zeros = SignalWeights { weights: vec![0.0; batches.num_signals()] };
            let with = episode_objective(&st.params, &cfg, &graphs, &batches, &ones).unwrap();
            let without = episode_objective(&st.params, &cfg, &graphs, &batches, &zeros).unwrap();
            (with - without) / n
        };
        initial_sum += mean_loss(&start);
        final_sum += mean_loss(&end);
    }
    assert!(
        final_sum < initial_sum,
        "mean signal loss did not improve: {initial_sum:.4} -> {final_sum:.4}"
    );
}

#[test]
fn episodes_max_one_runs_exactly_one_update() {
    let (s, t) = sbm(7, 6);
    // Batches covering both signal populations make one episode one pass.
    let cfg = TrainConfig {
        episodes_max: 1,
        batch_attr: 200,
        batch_edge: 200,
        ..cfg_for(12, 0.005, 7)
    };
    let (state, metrics) = pretrain(&[s], &t, &cfg).unwrap();
    assert_eq!(metrics.len(), 1);
    assert_eq!(state.episode, 1);
    // Full-population batches make every pass one episode, so the
    // thresholds were scheduled exactly once.
    assert_eq!(state.curriculum.step, 1);
    let growth = state.curriculum.lambda1 / cfg.curriculum.lambda1;
    assert!((growth - cfg.curriculum.xi).abs() < 1e-12);
}
