//! Heterogeneous graph signals: extraction, masking, prediction, scoring.
//!
//! Two signal types ship: node attribute rows and edges, each available at
//! every hierarchy level. Coarse levels have real-valued adjacencies, so an
//! entry counts as a positive edge there when its mass exceeds the level's
//! mean positive mass; level 0 uses the actual edge set.

use std::collections::HashSet;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::coder::Hierarchy;
use crate::error::{Error, Result};
use crate::nn::{
    bind_params, gat_forward, gcn_forward, init_linear, normalize_dense, BoundParams,
    GatParams, Nonlinearity, ParamTree,
};
use crate::tape::{Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalType {
    Attribute,
    Edge,
}

impl std::fmt::Display for SignalType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SignalType::Attribute => write!(f, "attribute"),
            SignalType::Edge => write!(f, "edge"),
        }
    }
}

/// Position of a signal within its level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SignalIndex {
    Node(usize),
    Pair(usize, usize),
}

/// What the student should predict for a signal.
#[derive(Debug, Clone, PartialEq)]
pub enum SignalTruth {
    /// The hidden attribute row.
    Attribute(Vec<f64>),
    /// 1.0 for a positive edge, 0.0 for a sampled non-edge.
    EdgeLabel(f64),
}

/// One masked graph signal: its type, level, position, and ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalInstance {
    pub signal_type: SignalType,
    pub level: usize,
    pub index: SignalIndex,
    pub ground_truth: SignalTruth,
    pub is_negative: bool,
}

/// Entries of the hierarchy hidden for one batch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MaskSpec {
    pub level: usize,
    pub attr_rows: Vec<usize>,
    pub edges: Vec<(usize, usize)>,
}

/// A sampled batch of signals of one type at one level.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalBatch {
    pub instances: Vec<SignalInstance>,
    pub mask: MaskSpec,
    pub seed: u64,
    /// Requested batch exceeded the population and was clipped.
    pub clipped: bool,
    /// Negative sampling ran out of non-edges.
    pub exhausted_negatives: bool,
}

impl SignalBatch {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }
}

/// Positive edges of one hierarchy level as unordered pairs. Level 0 uses
/// the exact edge pattern; coarse levels threshold at the mean positive
/// mass of the strict upper triangle.
pub fn positive_edges(adjacency: &Array2<f64>, level: usize) -> Vec<(usize, usize)> {
    let n = adjacency.nrows();
    let mut positives = Vec::new();
    if level == 0 {
        for i in 0..n {
            for j in (i + 1)..n {
                if adjacency[[i, j]] > 0.0 {
                    positives.push((i, j));
                }
            }
        }
        return positives;
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            let v = adjacency[[i, j]];
            if v > 0.0 {
                total += v;
                count += 1;
            }
        }
    }
    if count == 0 {
        return positives;
    }
    let threshold = total / count as f64;
    for i in 0..n {
        for j in (i + 1)..n {
            if adjacency[[i, j]] > threshold {
                positives.push((i, j));
            }
        }
    }
    positives
}

/// Samples a batch of one signal type at one level. Attribute batches draw
/// node rows uniformly without replacement; edge batches draw positive
/// pairs plus `ceil(neg_ratio * positives)` non-edges. Oversized requests
/// clip and set the flag instead of failing.
pub fn sample_signals(
    hier: &Hierarchy,
    signal_type: SignalType,
    level: usize,
    batch_size: usize,
    neg_ratio: f64,
    seed: u64,
) -> Result<SignalBatch> {
    if level >= hier.num_levels() {
        return Err(Error::Param(format!(
            "level {level} out of range for a {}-level hierarchy",
            hier.num_levels()
        )));
    }
    let (adjacency, features) = &hier.levels[level];
    sample_level(adjacency, features, signal_type, level, batch_size, neg_ratio, seed)
}

/// [`sample_signals`] over one level's raw matrices.
pub fn sample_level(
    adjacency: &Array2<f64>,
    features: &Array2<f64>,
    signal_type: SignalType,
    level: usize,
    batch_size: usize,
    neg_ratio: f64,
    seed: u64,
) -> Result<SignalBatch> {
    if neg_ratio < 0.0 {
        return Err(Error::Param("neg_ratio must be non-negative".into()));
    }
    let n = adjacency.nrows();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut batch = SignalBatch {
        instances: Vec::new(),
        mask: MaskSpec { level, ..Default::default() },
        seed,
        clipped: false,
        exhausted_negatives: false,
    };

    match signal_type {
        SignalType::Attribute => {
            let take = if batch_size > n {
                batch.clipped = true;
                n
            } else {
                batch_size
            };
            let mut ids: Vec<usize> = (0..n).collect();
            partial_shuffle(&mut ids, take, &mut rng);
            let mut picked: Vec<usize> = ids[..take].to_vec();
            picked.sort_unstable();
            for &i in &picked {
                batch.instances.push(SignalInstance {
                    signal_type,
                    level,
                    index: SignalIndex::Node(i),
                    ground_truth: SignalTruth::Attribute(features.row(i).to_vec()),
                    is_negative: false,
                });
            }
            batch.mask.attr_rows = picked;
        }
        SignalType::Edge => {
            let positives = positive_edges(adjacency, level);
            let take = if batch_size > positives.len() {
                batch.clipped = true;
                positives.len()
            } else {
                batch_size
            };
            let mut order: Vec<usize> = (0..positives.len()).collect();
            partial_shuffle(&mut order, take, &mut rng);
            let mut picked: Vec<(usize, usize)> = order[..take].iter().map(|&k| positives[k]).collect();
            picked.sort_unstable();
            for &(i, j) in &picked {
                batch.instances.push(SignalInstance {
                    signal_type,
                    level,
                    index: SignalIndex::Pair(i, j),
                    ground_truth: SignalTruth::EdgeLabel(1.0),
                    is_negative: false,
                });
            }
            batch.mask.edges = picked.clone();

            let wanted = (neg_ratio * picked.len() as f64).ceil() as usize;
            if wanted > 0 {
                let positive_set: HashSet<(usize, usize)> = positives.iter().copied().collect();
                let negatives = sample_non_edges(n, &positive_set, wanted, &mut rng);
                if negatives.len() < wanted {
                    batch.exhausted_negatives = true;
                }
                for (i, j) in negatives {
                    batch.instances.push(SignalInstance {
                        signal_type,
                        level,
                        index: SignalIndex::Pair(i, j),
                        ground_truth: SignalTruth::EdgeLabel(0.0),
                        is_negative: true,
                    });
                }
            }
        }
    }
    Ok(batch)
}

/// Fisher-Yates over the first `take` positions only.
fn partial_shuffle(ids: &mut [usize], take: usize, rng: &mut ChaCha20Rng) {
    let n = ids.len();
    for k in 0..take.min(n.saturating_sub(1)) {
        let j = rng.gen_range(k..n);
        ids.swap(k, j);
    }
}

/// Uniform non-edge pairs (i < j, no self pairs), without replacement.
/// Enumerates the complement on small levels; otherwise rejection-samples
/// with a bounded attempt budget.
fn sample_non_edges(
    n: usize,
    positives: &HashSet<(usize, usize)>,
    wanted: usize,
    rng: &mut ChaCha20Rng,
) -> Vec<(usize, usize)> {
    let total_pairs = n * n.saturating_sub(1) / 2;
    let available = total_pairs.saturating_sub(positives.len());
    if available == 0 {
        return Vec::new();
    }
    let wanted = wanted.min(available);
    if n <= 512 {
        let mut complement: Vec<(usize, usize)> = Vec::with_capacity(available);
        for i in 0..n {
            for j in (i + 1)..n {
                if !positives.contains(&(i, j)) {
                    complement.push((i, j));
                }
            }
        }
        let mut order: Vec<usize> = (0..complement.len()).collect();
        partial_shuffle(&mut order, wanted, rng);
        let mut out: Vec<(usize, usize)> = order[..wanted].iter().map(|&k| complement[k]).collect();
        out.sort_unstable();
        return out;
    }
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(wanted);
    let budget = 100 * wanted + 1000;
    let mut attempts = 0usize;
    while out.len() < wanted && attempts < budget {
        attempts += 1;
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a == b {
            continue;
        }
        let pair = (a.min(b), a.max(b));
        if positives.contains(&pair) || !seen.insert(pair) {
            continue;
        }
        out.push(pair);
    }
    out.sort_unstable();
    out
}

/// Returns a copy of the hierarchy with the batch's signals hidden: masked
/// attribute rows zeroed and masked positive edges removed at the batch's
/// level. The input hierarchy is untouched.
pub fn apply_mask(hier: &Hierarchy, batch: &SignalBatch) -> Hierarchy {
    let mut out = hier.clone();
    let level = batch.mask.level;
    let (adjacency, features) = &mut out.levels[level];
    for &row in &batch.mask.attr_rows {
        features.row_mut(row).fill(0.0);
    }
    for &(i, j) in &batch.mask.edges {
        adjacency[[i, j]] = 0.0;
        adjacency[[j, i]] = 0.0;
    }
    out
}

/// Student backbone choice for the hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackboneKind {
    Gcn,
    Gat,
}

/// Architecture of the student: backbone kind and per-layer output widths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentSpec {
    pub kind: BackboneKind,
    pub widths: Vec<usize>,
}

impl Default for StudentSpec {
    fn default() -> Self {
        StudentSpec { kind: BackboneKind::Gat, widths: vec![50, 50] }
    }
}

impl StudentSpec {
    pub fn embedding_dim(&self) -> usize {
        *self.widths.last().expect("student needs at least one layer")
    }

    /// Seeded parameters: layer `i` gets `i.w`/`i.b`, attention layers add
    /// `i.a_l`/`i.a_r`.
    pub fn init(&self, input_dim: usize, rng: &mut ChaCha20Rng) -> ParamTree {
        let mut p = ParamTree::new();
        let mut d = input_dim;
        for (i, &w) in self.widths.iter().enumerate() {
            p.insert(format!("{i}.w"), init_linear(d, w, rng));
            p.insert(format!("{i}.b"), init_linear(1, w, rng));
            if self.kind == BackboneKind::Gat {
                p.insert(format!("{i}.a_l"), init_linear(w, 1, rng));
                p.insert(format!("{i}.a_r"), init_linear(w, 1, rng));
            }
            d = w;
        }
        p
    }
}

/// Graph connectivity handed to the student: a normalized adjacency for
/// convolution, or a 0/1 neighborhood mask (with self-loops) for attention.
pub enum StudentGraph<'a> {
    Gcn { a_norm: Var },
    Gat { mask: &'a Array2<f64> },
}

/// Runs the student backbone over one level's graph, producing node
/// embeddings. Student layers live under `prefix.<i>.*`.
pub fn student_forward(
    t: &mut Tape,
    bound: &BoundParams,
    prefix: &str,
    spec: &StudentSpec,
    graph: &StudentGraph,
    x: Var,
) -> Result<Var> {
    let mut h = x;
    for i in 0..spec.widths.len() {
        let layer = format!("{prefix}.{i}");
        match (graph, spec.kind) {
            (StudentGraph::Gcn { a_norm }, BackboneKind::Gcn) => {
                let w = bound.var(&format!("{layer}.w"))?;
                let b = bound.var_opt(&format!("{layer}.b"));
                h = gcn_forward(t, *a_norm, h, w, b, Nonlinearity::LeakyRelu { slope: 0.2 });
            }
            (StudentGraph::Gat { mask }, BackboneKind::Gat) => {
                let gp = GatParams::from_bound(bound, &layer)?;
                h = gat_forward(t, mask, h, &gp, Nonlinearity::LeakyRelu { slope: 0.2 });
            }
            _ => {
                return Err(Error::Config(
                    "student graph input does not match the backbone kind".into(),
                ))
            }
        }
    }
    Ok(h)
}

/// Attribute-head losses for a batch: a linear head maps each masked
/// node's embedding to a predicted attribute row; per-instance loss is the
/// mean squared error over dimensions. Returns a (batch, 1) column.
pub fn attr_losses_on_tape(
    t: &mut Tape,
    bound: &BoundParams,
    head_prefix: &str,
    embeddings: Var,
    rows: &[usize],
    truth: &Array2<f64>,
) -> Result<Var> {
    let w = bound.var(&format!("{head_prefix}.w"))?;
    let b = bound.var_opt(&format!("{head_prefix}.b"));
    let dims = truth.ncols();
    let z = t.gather_rows(embeddings, rows);
    let mut pred = t.matmul(z, w);
    if let Some(b) = b {
        pred = t.add_row(pred, b);
    }
    let truth = t.constant(truth.clone());
    let diff = t.sub(pred, truth);
    let sq = t.mul(diff, diff);
    let sums = t.sum_cols(sq);
    Ok(t.scale(sums, 1.0 / dims as f64))
}

/// Edge-head losses for a batch: a bilinear score of the two endpoint
/// embeddings squashed through a logistic, scored by clamped binary
/// cross-entropy. Returns a (batch, 1) column.
pub fn edge_losses_on_tape(
    t: &mut Tape,
    bound: &BoundParams,
    head_prefix: &str,
    embeddings: Var,
    pairs: &[(usize, usize)],
    labels: &[f64],
) -> Result<Var> {
    assert_eq!(pairs.len(), labels.len());
    let w = bound.var(&format!("{head_prefix}.w"))?;
    let b = bound.var_opt(&format!("{head_prefix}.b"));
    let left: Vec<usize> = pairs.iter().map(|&(i, _)| i).collect();
    let right: Vec<usize> = pairs.iter().map(|&(_, j)| j).collect();
    let zi = t.gather_rows(embeddings, &left);
    let zj = t.gather_rows(embeddings, &right);
    let ziw = t.matmul(zi, w);
    let prod = t.mul(ziw, zj);
    let mut score = t.sum_cols(prod);
    if let Some(b) = b {
        // Bilinear bias is a single scalar broadcast over the batch.
        let bv = t.value(b).clone();
        assert_eq!(bv.dim(), (1, 1), "edge head bias must be 1x1");
        let ones = t.constant(Array2::ones((pairs.len(), 1)));
        let bb = t.matmul(ones, b);
        score = t.add(score, bb);
    }
    let p = t.sigmoid(score);
    let p = t.clamp(p, 1e-7, 1.0 - 1e-7);
    let y = t.constant(Array2::from_shape_vec((labels.len(), 1), labels.to_vec()).unwrap());
    let one_minus_y = t.constant(Array2::from_shape_vec(
        (labels.len(), 1),
        labels.iter().map(|&v| 1.0 - v).collect(),
    )
    .unwrap());
    let ln_p = t.ln(p);
    let one = t.constant(Array2::ones((labels.len(), 1)));
    let q = t.sub(one, p);
    let ln_q = t.ln(q);
    let pos = t.mul(y, ln_p);
    let neg = t.mul(one_minus_y, ln_q);
    let s = t.add(pos, neg);
    Ok(t.scale(s, -1.0))
}

/// A prediction for one signal instance.
#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    Attribute(Vec<f64>),
    EdgeProbability(f64),
}

/// Parameters of the hypothesis: student backbone plus prediction heads
/// (`attr.<level>.*` and `edge.<level>.*`).
pub struct SignalModel<'a> {
    pub student: &'a ParamTree,
    pub heads: &'a ParamTree,
    pub spec: &'a StudentSpec,
}

/// Seeded head parameters for all levels: attribute heads map the
/// embedding to the feature width, edge heads are bilinear forms.
pub fn init_heads(
    embedding_dim: usize,
    feature_dim: usize,
    num_levels: usize,
    rng: &mut ChaCha20Rng,
) -> ParamTree {
    let mut p = ParamTree::new();
    for l in 0..num_levels {
        p.insert(format!("attr.{l}.w"), init_linear(embedding_dim, feature_dim, rng));
        p.insert(format!("attr.{l}.b"), init_linear(1, feature_dim, rng));
        p.insert(format!("edge.{l}.w"), init_linear(embedding_dim, embedding_dim, rng));
        p.insert(format!("edge.{l}.b"), Array2::zeros((1, 1)));
    }
    p
}

/// Applies the student hypothesis to one signal: the backbone runs on the
/// masked level-`l` graph with the reconstructed representation
/// concatenated to the masked features, and the matching head scores the
/// instance.
pub fn predict_signal(
    hier_masked: &Hierarchy,
    reconstructed: &[Array2<f64>],
    inst: &SignalInstance,
    model: &SignalModel,
) -> Result<Prediction> {
    let level = inst.level;
    if level >= reconstructed.len() {
        return Err(Error::Param(format!(
            "no reconstruction for level {level} (have {})",
            reconstructed.len()
        )));
    }
    if level >= hier_masked.num_levels() {
        return Err(Error::Param(format!("level {level} outside the hierarchy")));
    }
    let (adjacency, features) = &hier_masked.levels[level];
    let mut t = Tape::new();
    let mut master = ParamTree::new();
    master.merge_namespaced("student", model.student);
    master.merge_namespaced("heads", model.heads);
    let bound = bind_params(&mut t, &master);

    let x_hat = t.constant(reconstructed[level].clone());
    let x_masked = t.constant(features.clone());
    let x = t.concat_cols(x_hat, x_masked);
    let gat_mask;
    let graph = match model.spec.kind {
        BackboneKind::Gcn => {
            let a_norm = t.constant(normalize_dense(adjacency, true));
            StudentGraph::Gcn { a_norm }
        }
        BackboneKind::Gat => {
            gat_mask = neighborhood_mask(adjacency, level);
            StudentGraph::Gat { mask: &gat_mask }
        }
    };
    let embeddings = student_forward(&mut t, &bound, "student", model.spec, &graph, x)?;

    match (inst.signal_type, &inst.index) {
        (SignalType::Attribute, SignalIndex::Node(i)) => {
            let head = format!("heads.attr.{level}");
            let w = bound.var(&format!("{head}.w"))?;
            let b = bound.var_opt(&format!("{head}.b"));
            let z = t.gather_rows(embeddings, &[*i]);
            let mut pred = t.matmul(z, w);
            if let Some(b) = b {
                pred = t.add_row(pred, b);
            }
            Ok(Prediction::Attribute(t.value(pred).row(0).to_vec()))
        }
        (SignalType::Edge, SignalIndex::Pair(i, j)) => {
            let head = format!("heads.edge.{level}");
            let losses_input = [(*i, *j)];
            // Reuse the batch machinery with a singleton batch to get the
            // probability; reconstruct it from the score path directly.
            let w = bound.var(&format!("{head}.w"))?;
            let b = bound.var_opt(&format!("{head}.b"));
            let zi = t.gather_rows(embeddings, &[losses_input[0].0]);
            let zj = t.gather_rows(embeddings, &[losses_input[0].1]);
            let ziw = t.matmul(zi, w);
            let prod = t.mul(ziw, zj);
            let mut score = t.sum_cols(prod);
            if let Some(b) = b {
                score = t.add_row(score, b);
            }
            let p = t.sigmoid(score);
            Ok(Prediction::EdgeProbability(t.value(p)[[0, 0]]))
        }
        _ => Err(Error::Param("signal type does not match its index kind".into())),
    }
}

/// GAT neighborhood pattern of a (possibly masked) level adjacency:
/// positive edges plus self-loops.
pub fn neighborhood_mask(adjacency: &Array2<f64>, level: usize) -> Array2<f64> {
    let n = adjacency.nrows();
    let mut mask = Array2::zeros((n, n));
    for (i, j) in positive_edges(adjacency, level) {
        mask[[i, j]] = 1.0;
        mask[[j, i]] = 1.0;
    }
    for i in 0..n {
        mask[[i, i]] = 1.0;
    }
    mask
}

/// Per-signal loss: mean squared error for attributes, clamped binary
/// cross-entropy for edges. Always finite and non-negative on valid input.
pub fn signal_loss(pred: &Prediction, inst: &SignalInstance) -> Result<f64> {
    let loss = match (pred, &inst.ground_truth) {
        (Prediction::Attribute(p), SignalTruth::Attribute(gt)) => {
            if p.len() != gt.len() {
                return Err(Error::Shape(format!(
                    "prediction has {} dims, ground truth {}",
                    p.len(),
                    gt.len()
                )));
            }
            p.iter().zip(gt.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / p.len() as f64
        }
        (Prediction::EdgeProbability(p), SignalTruth::EdgeLabel(y)) => {
            let p = p.clamp(1e-7, 1.0 - 1e-7);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        }
        _ => return Err(Error::Param("prediction type does not match the instance".into())),
    };
    if !loss.is_finite() {
        return Err(Error::Numerical(format!(
            "non-finite loss for {} signal at level {} ({:?})",
            inst.signal_type, inst.level, inst.index
        )));
    }
    Ok(loss)
}
