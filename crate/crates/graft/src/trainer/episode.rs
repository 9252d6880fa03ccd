use std::collections::BTreeMap;
use std::rc::Rc;

use ndarray::Array2;

use crate::coder::{
    decode_on_tape, encode_on_tape, reconstruction_loss_on_tape, translate_on_tape, TapeHierarchy,
};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::nn::{bind_params, normalize_dense, normalize_dense_on_tape, BoundParams, ParamTree};
use crate::signals::{
    attr_losses_on_tape, edge_losses_on_tape, neighborhood_mask, sample_level, student_forward,
    BackboneKind, SignalBatch, SignalTruth, SignalType, StudentGraph,
};
use crate::tape::{Tape, Var};
use crate::trainer::{signal_groups, TrainConfig};

/// Shared dense matrices for a graph, computed once per run.
struct GraphData {
    adj: Rc<Array2<f64>>,
    adj_norm: Rc<Array2<f64>>,
    feats: Rc<Array2<f64>>,
}

impl GraphData {
    fn new(g: &Graph) -> Self {
        let adj = g.dense_adjacency();
        let adj_norm = normalize_dense(&adj, true);
        GraphData {
            adj: Rc::new(adj),
            adj_norm: Rc::new(adj_norm),
            feats: Rc::new(g.features().clone()),
        }
    }
}

/// Precomputed constants for every graph in a run.
pub struct GraphConsts {
    sources: Vec<GraphData>,
    target: GraphData,
    target_graph: Graph,
}

impl GraphConsts {
    pub fn new(sources: &[Graph], target: &Graph) -> Self {
        GraphConsts {
            sources: sources.iter().map(GraphData::new).collect(),
            target: GraphData::new(target),
            target_graph: target.clone(),
        }
    }

    pub fn num_sources(&self) -> usize {
        self.sources.len()
    }

    pub fn target_graph(&self) -> &Graph {
        &self.target_graph
    }
}

/// The signal batches fetched for one episode, one per (type, level) group.
#[derive(Debug, Clone)]
pub struct EpisodeBatches {
    pub source_idx: usize,
    pub groups: Vec<(SignalType, usize, SignalBatch)>,
}

impl EpisodeBatches {
    pub fn num_signals(&self) -> usize {
        self.groups.iter().map(|(_, _, b)| b.len()).sum()
    }
}

/// One episode's differentiable computation: the source/target pooling
/// chains, translation, decoding, per-signal losses per group, and the
/// reconstruction loss, all on a single tape.
pub(crate) struct EpisodeBuild {
    tape: Tape,
    param_vars: Vec<(String, Var)>,
    group_losses: Vec<Option<Var>>,
    recon: Var,
    pub(crate) batches: EpisodeBatches,
    objective: Option<(Var, f64, f64)>,
}

enum SampleMode<'a> {
    Fresh(&'a [u64]),
    Reuse(&'a EpisodeBatches),
}

impl EpisodeBuild {
    /// Builds the episode, sampling fresh batches with the given per-group
    /// seeds.
    pub(crate) fn sample(
        params: &ParamTree,
        cfg: &TrainConfig,
        graphs: &GraphConsts,
        source_idx: usize,
        batch_seeds: &[u64],
    ) -> Result<EpisodeBuild> {
        Self::build(params, cfg, graphs, source_idx, SampleMode::Fresh(batch_seeds))
    }

    /// Builds the episode over previously sampled batches.
    pub(crate) fn from_batches(
        params: &ParamTree,
        cfg: &TrainConfig,
        graphs: &GraphConsts,
        batches: &EpisodeBatches,
    ) -> Result<EpisodeBuild> {
        Self::build(params, cfg, graphs, batches.source_idx, SampleMode::Reuse(batches))
    }

    fn build(
        params: &ParamTree,
        cfg: &TrainConfig,
        graphs: &GraphConsts,
        source_idx: usize,
        mode: SampleMode,
    ) -> Result<EpisodeBuild> {
        if source_idx >= graphs.sources.len() {
            return Err(Error::Param(format!(
                "source index {source_idx} out of range ({} sources)",
                graphs.sources.len()
            )));
        }
        let mut t = Tape::new();
        let bound = bind_params(&mut t, params);
        let src = &graphs.sources[source_idx];
        let tgt = &graphs.target;

        let sa = t.constant_shared(Rc::clone(&src.adj));
        let san = t.constant_shared(Rc::clone(&src.adj_norm));
        let sx = t.constant_shared(Rc::clone(&src.feats));
        let ta = t.constant_shared(Rc::clone(&tgt.adj));
        let tan = t.constant_shared(Rc::clone(&tgt.adj_norm));
        let tx = t.constant_shared(Rc::clone(&tgt.feats));

        let src_h = encode_on_tape(
            &mut t,
            &bound,
            &format!("enc.{source_idx}"),
            sa,
            san,
            sx,
            &cfg.level_sizes,
        )?;
        let tgt_h = encode_on_tape(&mut t, &bound, "dec", ta, tan, tx, &cfg.level_sizes)?;

        let coarse = *src_h.features.last().unwrap();
        let translated = translate_on_tape(&mut t, &bound, &format!("trans.{source_idx}"), coarse)?;
        let recon_levels = decode_on_tape(&mut t, translated, &tgt_h);
        let recon = reconstruction_loss_on_tape(&mut t, &recon_levels, &tgt_h.features);

        // Fetch (or reuse) one batch per signal group, then build the
        // masked student pass and per-signal losses for each.
        let groups = signal_groups(cfg);
        let batches: Vec<(SignalType, usize, SignalBatch)> = match mode {
            SampleMode::Fresh(seeds) => {
                if seeds.len() != groups.len() {
                    return Err(Error::Param(format!(
                        "{} batch seeds for {} signal groups",
                        seeds.len(),
                        groups.len()
                    )));
                }
                let mut out = Vec::with_capacity(groups.len());
                for (&(ty, level), &seed) in groups.iter().zip(seeds.iter()) {
                    let adjacency = t.value_rc(tgt_h.adjacency[level]);
                    let features = t.value_rc(tgt_h.features[level]);
                    let size = match ty {
                        SignalType::Attribute => cfg.batch_attr,
                        SignalType::Edge => cfg.batch_edge,
                    };
                    let batch =
                        sample_level(&adjacency, &features, ty, level, size, cfg.neg_ratio, seed)?;
                    out.push((ty, level, batch));
                }
                out
            }
            SampleMode::Reuse(b) => b.groups.clone(),
        };

        let mut group_losses = Vec::with_capacity(batches.len());
        for (ty, level, batch) in &batches {
            if batch.is_empty() {
                group_losses.push(None);
                continue;
            }
            let losses =
                signal_group_losses(&mut t, &bound, cfg, &tgt_h, recon_levels[*level], *ty, *level, batch)?;
            group_losses.push(Some(losses));
        }

        Ok(EpisodeBuild {
            tape: t,
            param_vars: bound.iter().map(|(n, v)| (n.to_string(), v)).collect(),
            group_losses,
            recon,
            batches: EpisodeBatches { source_idx, groups: batches },
            objective: None,
        })
    }

    pub(crate) fn num_signals(&self) -> usize {
        self.batches.num_signals()
    }

    /// Per-signal loss values, concatenated over groups in group order.
    pub(crate) fn loss_values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_signals());
        for losses in self.group_losses.iter().flatten() {
            out.extend(self.tape.value(*losses).column(0).iter().copied());
        }
        out
    }

    /// Builds (and caches) the scalar objective
    /// `sum_i w_i * J_i + reconstruction`. Returns
    /// (objective, weighted signal loss, reconstruction loss) values.
    pub(crate) fn objective(
        &mut self,
        weights: &crate::curriculum::SignalWeights,
    ) -> Result<(f64, f64, f64)> {
        if let Some((obj, w, r)) = self.objective {
            return Ok((self.tape.scalar(obj), w, r));
        }
        if weights.weights.len() != self.num_signals() {
            return Err(Error::Param(format!(
                "{} weights for {} signals",
                weights.weights.len(),
                self.num_signals()
            )));
        }
        let t = &mut self.tape;
        let mut offset = 0usize;
        let mut weighted: Option<Var> = None;
        for losses in self.group_losses.iter().flatten() {
            let len = t.value(*losses).nrows();
            let w = Array2::from_shape_vec(
                (len, 1),
                weights.weights[offset..offset + len].to_vec(),
            )
            .expect("weight column");
            offset += len;
            let wv = t.constant(w);
            let prod = t.mul(*losses, wv);
            let s = t.sum_all(prod);
            weighted = Some(match weighted {
                Some(acc) => t.add(acc, s),
                None => s,
            });
        }
        let weighted_var = match weighted {
            Some(v) => v,
            None => t.constant(Array2::zeros((1, 1))),
        };
        let obj = t.add(weighted_var, self.recon);
        let weighted_value = t.scalar(weighted_var);
        let recon_value = t.scalar(self.recon);
        self.objective = Some((obj, weighted_value, recon_value));
        Ok((t.scalar(obj), weighted_value, recon_value))
    }

    /// Gradients of the cached objective for every parameter leaf that
    /// participates in this episode.
    pub(crate) fn gradients(&mut self) -> Result<BTreeMap<String, Array2<f64>>> {
        let (obj, _, _) =
            self.objective.ok_or_else(|| Error::Param("objective not built yet".into()))?;
        let grads = self.tape.backward(obj);
        let mut out = BTreeMap::new();
        for (name, var) in &self.param_vars {
            if let Some(g) = grads.get(*var) {
                out.insert(name.clone(), g.clone());
            }
        }
        Ok(out)
    }
}

/// Builds one signal group's student pass on the tape: masks the group's
/// signals out of the level, runs the student on the masked graph with the
/// reconstructed representation concatenated to the masked features, and
/// scores the batch with the matching head. Returns the (batch, 1) column
/// of per-signal losses.
#[allow(clippy::too_many_arguments)]
fn signal_group_losses(
    t: &mut Tape,
    bound: &BoundParams,
    cfg: &TrainConfig,
    tgt_h: &TapeHierarchy,
    x_hat_level: Var,
    ty: SignalType,
    level: usize,
    batch: &SignalBatch,
) -> Result<Var> {
    let features = tgt_h.features[level];
    let adjacency = tgt_h.adjacency[level];
    let n = t.value(features).nrows();
    let d = t.value(features).ncols();

    // Mask the batch's signals. Attribute batches zero feature rows;
    // edge batches drop the masked positive pairs from the adjacency.
    let (masked_features, masked_adjacency) = match ty {
        SignalType::Attribute => {
            let mut rows = Array2::ones((n, d));
            for &r in &batch.mask.attr_rows {
                rows.row_mut(r).fill(0.0);
            }
            let mask = t.constant(rows);
            (t.mul(features, mask), adjacency)
        }
        SignalType::Edge => {
            let masked = if t.needs_grad(adjacency) {
                let mut keep = Array2::ones((n, n));
                for &(i, j) in &batch.mask.edges {
                    keep[[i, j]] = 0.0;
                    keep[[j, i]] = 0.0;
                }
                let mask = t.constant(keep);
                t.mul(adjacency, mask)
            } else {
                // Constant level: mask the value directly.
                let mut masked = t.value(adjacency).clone();
                for &(i, j) in &batch.mask.edges {
                    masked[[i, j]] = 0.0;
                    masked[[j, i]] = 0.0;
                }
                t.constant(masked)
            };
            (features, masked)
        }
    };

    let x = t.concat_cols(x_hat_level, masked_features);
    let embeddings = match cfg.student.kind {
        BackboneKind::Gcn => {
            let a_norm = if ty == SignalType::Edge {
                if t.needs_grad(masked_adjacency) {
                    normalize_dense_on_tape(t, masked_adjacency)
                } else {
                    let norm = normalize_dense(t.value(masked_adjacency), true);
                    t.constant(norm)
                }
            } else {
                tgt_h.adjacency_norm[level]
            };
            student_forward(t, bound, "student", &cfg.student, &StudentGraph::Gcn { a_norm }, x)?
        }
        BackboneKind::Gat => {
            let pattern = neighborhood_mask(&t.value_rc(masked_adjacency), level);
            student_forward(
                t,
                bound,
                "student",
                &cfg.student,
                &StudentGraph::Gat { mask: &pattern },
                x,
            )?
        }
    };

    match ty {
        SignalType::Attribute => {
            let rows = batch.mask.attr_rows.clone();
            let mut truth = Array2::zeros((rows.len(), d));
            for (k, inst) in batch.instances.iter().enumerate() {
                match &inst.ground_truth {
                    SignalTruth::Attribute(v) => {
                        truth.row_mut(k).assign(&ndarray::ArrayView::from(v.as_slice()))
                    }
                    _ => return Err(Error::Param("attribute batch holds a non-attribute".into())),
                }
            }
            attr_losses_on_tape(t, bound, &format!("heads.attr.{level}"), embeddings, &rows, &truth)
        }
        SignalType::Edge => {
            let mut pairs = Vec::with_capacity(batch.len());
            let mut labels = Vec::with_capacity(batch.len());
            for inst in &batch.instances {
                match (&inst.index, &inst.ground_truth) {
                    (crate::signals::SignalIndex::Pair(i, j), SignalTruth::EdgeLabel(y)) => {
                        pairs.push((*i, *j));
                        labels.push(*y);
                    }
                    _ => return Err(Error::Param("edge batch holds a non-edge".into())),
                }
            }
            edge_losses_on_tape(t, bound, &format!("heads.edge.{level}"), embeddings, &pairs, &labels)
        }
    }
}
