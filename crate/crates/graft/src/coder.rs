//! Multi-scale encoder/decoder across graphs.
//!
//! The encoder pools a graph through learned soft assignments: at each
//! level a one-layer graph convolution produces logits whose row softmax is
//! the assignment matrix `P`, giving coarse features `P' X` and coarse
//! adjacency `P' A P`. The decoder reuses the target graph's own
//! assignments to expand a translated coarsest representation back to every
//! finer level, and the translation function `g` is a row-wise two-layer
//! MLP mapping source coarsest features into the target feature space.
//!
//! Level 0 is the original graph; `assigns[l]` maps level `l` to `l+1`.

use ndarray::Array2;
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::nn::{
    bind_params, gcn_forward, init_linear, mlp, mlp_forward, normalize_dense,
    normalize_dense_on_tape, BoundParams, DenseMatrix, Nonlinearity, ParamTree,
};
use crate::tape::{Tape, Var};

/// Per-level coarse adjacency/feature matrices plus the soft-assignment
/// matrices that produced them. Level 0 is the original graph.
#[derive(Debug, Clone)]
pub struct Hierarchy {
    /// `(adjacency, features)` per level, finest first.
    pub levels: Vec<(Array2<f64>, Array2<f64>)>,
    /// `assigns[l]` has shape `n_l x n_{l+1}` with simplex rows.
    pub assigns: Vec<Array2<f64>>,
}

impl Hierarchy {
    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level_sizes(&self) -> Vec<usize> {
        self.levels.iter().map(|(a, _)| a.nrows()).collect()
    }

    pub fn feature_dim(&self) -> usize {
        self.levels[0].1.ncols()
    }

    /// Checks the structural invariants: simplex assignment rows, strictly
    /// decreasing level sizes, and the feature chain `X_{l+1} = P_l' X_l`.
    pub fn validate(&self) -> Result<()> {
        if self.assigns.len() + 1 != self.levels.len() {
            return Err(Error::Shape(format!(
                "{} assignment matrices for {} levels",
                self.assigns.len(),
                self.levels.len()
            )));
        }
        for (l, p) in self.assigns.iter().enumerate() {
            let (n_l, _) = self.levels[l].0.dim();
            let (n_next, _) = self.levels[l + 1].0.dim();
            if n_next >= n_l {
                return Err(Error::Shape(format!(
                    "level sizes must strictly decrease, got {n_l} -> {n_next} at level {l}"
                )));
            }
            if p.dim() != (n_l, n_next) {
                return Err(Error::Shape(format!(
                    "assigns[{l}] is {:?}, expected ({n_l}, {n_next})",
                    p.dim()
                )));
            }
            for (i, row) in p.rows().into_iter().enumerate() {
                if row.iter().any(|&v| v < 0.0) {
                    return Err(Error::Numerical(format!(
                        "assigns[{l}] row {i} has a negative entry"
                    )));
                }
                if (row.sum() - 1.0).abs() > 1e-6 {
                    return Err(Error::Numerical(format!(
                        "assigns[{l}] row {i} sums to {}, expected 1",
                        row.sum()
                    )));
                }
            }
            let expected = p.t().dot(&self.levels[l].1);
            let diff = &expected - &self.levels[l + 1].1;
            if diff.iter().any(|v| v.abs() > 1e-5) {
                return Err(Error::Numerical(format!("feature chain broken at level {l}")));
            }
        }
        Ok(())
    }
}

/// Learnable pieces of the encoder/decoder: one pooling surrogate per
/// encoder level, one unpooling surrogate per decoder level, and the
/// translation MLP.
#[derive(Debug, Clone, PartialEq)]
pub struct CoderParams {
    pub pool_surrogates: Vec<ParamTree>,
    pub unpool_surrogates: Vec<ParamTree>,
    pub translator: ParamTree,
}

impl CoderParams {
    /// Seeded initialization. The translator maps `source_dim` features to
    /// `target_dim` through one hidden layer of width `target_dim`.
    pub fn init(
        source_dim: usize,
        target_dim: usize,
        level_sizes: &[usize],
        rng: &mut ChaCha20Rng,
    ) -> Self {
        let surrogate = |dim: usize, out: usize, rng: &mut ChaCha20Rng| {
            let mut p = ParamTree::new();
            p.insert("w", init_linear(dim, out, rng));
            p.insert("b", init_linear(1, out, rng));
            p
        };
        let pool_surrogates = level_sizes.iter().map(|&s| surrogate(source_dim, s, rng)).collect();
        let unpool_surrogates =
            level_sizes.iter().map(|&s| surrogate(target_dim, s, rng)).collect();
        let mut translator = ParamTree::new();
        translator.insert("0.w", init_linear(source_dim, target_dim, rng));
        translator.insert("0.b", init_linear(1, target_dim, rng));
        translator.insert("1.w", init_linear(target_dim, target_dim, rng));
        translator.insert("1.b", init_linear(1, target_dim, rng));
        CoderParams { pool_surrogates, unpool_surrogates, translator }
    }

    pub fn num_levels(&self) -> usize {
        self.pool_surrogates.len()
    }

    /// Copies all tensors into `tree` under `prefix.pool.<l>.*`,
    /// `prefix.unpool.<l>.*`, and `prefix.trans.*`.
    pub fn flatten_into(&self, tree: &mut ParamTree, prefix: &str) {
        for (l, p) in self.pool_surrogates.iter().enumerate() {
            tree.merge_namespaced(&format!("{prefix}.pool.{l}"), p);
        }
        for (l, p) in self.unpool_surrogates.iter().enumerate() {
            tree.merge_namespaced(&format!("{prefix}.unpool.{l}"), p);
        }
        tree.merge_namespaced(&format!("{prefix}.trans"), &self.translator);
    }

    /// Inverse of [`CoderParams::flatten_into`].
    pub fn from_tree(tree: &ParamTree, prefix: &str, num_levels: usize) -> Result<Self> {
        let mut pool_surrogates = Vec::with_capacity(num_levels);
        let mut unpool_surrogates = Vec::with_capacity(num_levels);
        for l in 0..num_levels {
            let p = tree.subtree(&format!("{prefix}.pool.{l}"));
            let u = tree.subtree(&format!("{prefix}.unpool.{l}"));
            if p.is_empty() || u.is_empty() {
                return Err(Error::Param(format!("missing surrogate at level {l}")));
            }
            pool_surrogates.push(p);
            unpool_surrogates.push(u);
        }
        Ok(CoderParams {
            pool_surrogates,
            unpool_surrogates,
            translator: tree.subtree(&format!("{prefix}.trans")),
        })
    }
}

fn check_level_sizes(n: usize, level_sizes: &[usize]) -> Result<()> {
    if level_sizes.is_empty() {
        return Err(Error::Config("level_sizes must be non-empty".into()));
    }
    let mut prev = n;
    for (l, &s) in level_sizes.iter().enumerate() {
        if s == 0 {
            return Err(Error::Config(format!("level size at {l} is zero")));
        }
        if s >= prev {
            return Err(Error::Config(format!(
                "level sizes must strictly shrink: {s} >= {prev} at level {l}"
            )));
        }
        prev = s;
    }
    Ok(())
}

/// Soft assignment from a level's nodes to `out_size` supernodes:
/// `softmax(GCN(A, X))` with identity activation feeding the softmax.
pub fn compute_assignment(
    a: &DenseMatrix,
    x: &DenseMatrix,
    surrogate: &ParamTree,
    out_size: usize,
) -> Result<Array2<f64>> {
    let n = a.nrows();
    if out_size >= n {
        return Err(Error::Config(format!(
            "assignment out_size {out_size} must be smaller than the level size {n}"
        )));
    }
    let w = surrogate.get("w")?;
    if w.ncols() != out_size {
        return Err(Error::Shape(format!(
            "surrogate output width {} does not match out_size {out_size}",
            w.ncols()
        )));
    }
    let mut t = Tape::new();
    let bound = bind_params(&mut t, surrogate);
    let a_norm = t.constant(normalize_dense(a, true));
    let xv = t.constant(x.clone());
    let p = assignment_on_tape(&mut t, &bound, "", a_norm, xv)?;
    Ok(t.value(p).clone())
}

/// Tape version of [`compute_assignment`] with the surrogate looked up
/// under `prefix` (empty prefix = bare `w`/`b` names).
pub fn assignment_on_tape(
    t: &mut Tape,
    bound: &BoundParams,
    prefix: &str,
    a_norm: Var,
    x: Var,
) -> Result<Var> {
    let key = |s: &str| if prefix.is_empty() { s.to_string() } else { format!("{prefix}.{s}") };
    let w = bound.var(&key("w"))?;
    let b = bound.var_opt(&key("b"));
    let logits = gcn_forward(t, a_norm, x, w, b, Nonlinearity::Identity);
    Ok(t.softmax_rows(logits))
}

/// One coarsening step: `X_next = P' X`, `A_next = P' A P`. Rejects
/// assignment matrices whose rows are not simplex vectors.
pub fn coarsen(
    a: &DenseMatrix,
    x: &DenseMatrix,
    p: &DenseMatrix,
) -> Result<(Array2<f64>, Array2<f64>)> {
    if p.nrows() != a.nrows() || x.nrows() != a.nrows() {
        return Err(Error::Shape(format!(
            "coarsen: adjacency has {} rows, features {}, assignment {}",
            a.nrows(),
            x.nrows(),
            p.nrows()
        )));
    }
    for (i, row) in p.rows().into_iter().enumerate() {
        if row.iter().any(|&v| v < 0.0) || (row.sum() - 1.0).abs() > 1e-6 {
            return Err(Error::Numerical(format!(
                "assignment row {i} is not a simplex vector (sum {})",
                row.sum()
            )));
        }
    }
    let ap = a.dot(p);
    let a_next = p.t().dot(&ap);
    let x_next = p.t().dot(x);
    Ok((a_next, x_next))
}

/// A graph hierarchy expressed as tape nodes, so gradients flow through
/// assignments, coarse features, and coarse adjacencies.
pub struct TapeHierarchy {
    pub adjacency: Vec<Var>,
    pub adjacency_norm: Vec<Var>,
    pub features: Vec<Var>,
    pub assigns: Vec<Var>,
}

impl TapeHierarchy {
    pub fn num_levels(&self) -> usize {
        self.features.len()
    }

    /// Detached value snapshot (for sampling and inspection).
    pub fn snapshot(&self, t: &Tape) -> Hierarchy {
        let levels = self
            .adjacency
            .iter()
            .zip(self.features.iter())
            .map(|(&a, &x)| (t.value(a).clone(), t.value(x).clone()))
            .collect();
        let assigns = self.assigns.iter().map(|&p| t.value(p).clone()).collect();
        Hierarchy { levels, assigns }
    }
}

/// Builds the full pooling chain on the tape. `a0`/`a0_norm` are the raw
/// and pre-normalized level-0 adjacency (typically constants); surrogate
/// parameters live under `prefix.<level>`.
pub fn encode_on_tape(
    t: &mut Tape,
    bound: &BoundParams,
    prefix: &str,
    a0: Var,
    a0_norm: Var,
    x0: Var,
    level_sizes: &[usize],
) -> Result<TapeHierarchy> {
    check_level_sizes(t.value(a0).nrows(), level_sizes)?;
    let mut h = TapeHierarchy {
        adjacency: vec![a0],
        adjacency_norm: vec![a0_norm],
        features: vec![x0],
        assigns: Vec::new(),
    };
    for (l, _) in level_sizes.iter().enumerate() {
        let a = h.adjacency[l];
        let a_norm = h.adjacency_norm[l];
        let x = h.features[l];
        let p = assignment_on_tape(t, bound, &format!("{prefix}.{l}"), a_norm, x)?;
        let pt = t.transpose(p);
        let x_next = t.matmul(pt, x);
        let ap = t.matmul(a, p);
        let a_next = t.matmul(pt, ap);
        let a_next_norm = normalize_dense_on_tape(t, a_next);
        h.assigns.push(p);
        h.adjacency.push(a_next);
        h.adjacency_norm.push(a_next_norm);
        h.features.push(x_next);
    }
    Ok(h)
}

/// Pools a graph with the given surrogate set (value level).
pub fn encode_with(
    graph: &Graph,
    surrogates: &[ParamTree],
    level_sizes: &[usize],
) -> Result<Hierarchy> {
    if surrogates.len() != level_sizes.len() {
        return Err(Error::Config(format!(
            "{} surrogates for {} levels",
            surrogates.len(),
            level_sizes.len()
        )));
    }
    let mut t = Tape::new();
    let mut master = ParamTree::new();
    for (l, s) in surrogates.iter().enumerate() {
        master.merge_namespaced(&format!("enc.{l}"), s);
    }
    let bound = bind_params(&mut t, &master);
    let a0_val = graph.dense_adjacency();
    let a0_norm = t.constant(normalize_dense(&a0_val, true));
    let a0 = t.constant(a0_val);
    let x0 = t.constant(graph.features().clone());
    let h = encode_on_tape(&mut t, &bound, "enc", a0, a0_norm, x0, level_sizes)?;
    Ok(h.snapshot(&t))
}

/// Pools the source graph with the encoder surrogates.
pub fn encode(source: &Graph, params: &CoderParams, level_sizes: &[usize]) -> Result<Hierarchy> {
    encode_with(source, &params.pool_surrogates, level_sizes)
}

/// Pools the target graph with the decoder's unpooling surrogates; the
/// resulting assignments double as the unpooling matrices.
pub fn build_target_hierarchy(
    target: &Graph,
    params: &CoderParams,
    level_sizes: &[usize],
) -> Result<Hierarchy> {
    encode_with(target, &params.unpool_surrogates, level_sizes)
}

/// Maps source coarsest-level features into the target feature space
/// (row-wise MLP).
pub fn translate(x_s_coarsest: &DenseMatrix, params: &CoderParams) -> Result<DenseMatrix> {
    let w0 = params.translator.get("0.w")?;
    if x_s_coarsest.ncols() != w0.nrows() {
        return Err(Error::Config(format!(
            "translator expects feature width {}, got {}",
            w0.nrows(),
            x_s_coarsest.ncols()
        )));
    }
    mlp(x_s_coarsest, &params.translator, Nonlinearity::Relu)
}

/// Tape version of [`translate`]; translator layers live under
/// `prefix.<i>.w` / `prefix.<i>.b`.
pub fn translate_on_tape(t: &mut Tape, bound: &BoundParams, prefix: &str, x: Var) -> Result<Var> {
    let mut layers = Vec::new();
    for i in 0.. {
        let Some(w) = bound.var_opt(&format!("{prefix}.{i}.w")) else { break };
        let b = bound.var_opt(&format!("{prefix}.{i}.b"));
        layers.push((w, b));
    }
    if layers.is_empty() {
        return Err(Error::Param(format!("no translator layers under {prefix:?}")));
    }
    Ok(mlp_forward(t, x, &layers, Nonlinearity::Relu))
}

/// Expands a translated coarsest representation along the target
/// hierarchy: `X_hat_l = U_l X_hat_{l+1}` down to level 0. Returns one
/// matrix per level, finest first.
pub fn decode(
    x_hat_coarsest: &DenseMatrix,
    target_hierarchy: &Hierarchy,
    params: &CoderParams,
) -> Result<Vec<DenseMatrix>> {
    if params.unpool_surrogates.len() != target_hierarchy.assigns.len() {
        return Err(Error::Config(format!(
            "decoder has {} levels but the hierarchy has {}",
            params.unpool_surrogates.len(),
            target_hierarchy.assigns.len()
        )));
    }
    let coarsest_rows = target_hierarchy.levels.last().unwrap().0.nrows();
    if x_hat_coarsest.nrows() != coarsest_rows {
        return Err(Error::Config(format!(
            "translated representation has {} rows but the target coarsest level has {coarsest_rows}",
            x_hat_coarsest.nrows()
        )));
    }
    let n_levels = target_hierarchy.num_levels();
    let mut out = vec![DenseMatrix::zeros((0, 0)); n_levels];
    out[n_levels - 1] = x_hat_coarsest.clone();
    for l in (0..n_levels - 1).rev() {
        out[l] = target_hierarchy.assigns[l].dot(&out[l + 1]);
    }
    Ok(out)
}

/// Tape version of [`decode`] over a tape hierarchy.
pub fn decode_on_tape(t: &mut Tape, x_hat_coarsest: Var, target: &TapeHierarchy) -> Vec<Var> {
    let n_levels = target.num_levels();
    let mut out = vec![x_hat_coarsest; n_levels];
    for l in (0..n_levels - 1).rev() {
        out[l] = t.matmul(target.assigns[l], out[l + 1]);
    }
    out
}

/// Mean squared error between reconstructed and actual features, averaged
/// over levels and entries.
pub fn reconstruction_loss(reconstructed: &[DenseMatrix], hier: &Hierarchy) -> Result<f64> {
    if reconstructed.len() != hier.num_levels() {
        return Err(Error::Shape(format!(
            "{} reconstructed levels for a {}-level hierarchy",
            reconstructed.len(),
            hier.num_levels()
        )));
    }
    let mut total = 0.0;
    for (r, (_, x)) in reconstructed.iter().zip(hier.levels.iter()) {
        if r.dim() != x.dim() {
            return Err(Error::Shape(format!(
                "reconstructed level is {:?} but the hierarchy level is {:?}",
                r.dim(),
                x.dim()
            )));
        }
        let diff = r - x;
        total += diff.mapv(|v| v * v).mean().unwrap_or(0.0);
    }
    Ok(total / reconstructed.len() as f64)
}

/// Tape version of [`reconstruction_loss`].
pub fn reconstruction_loss_on_tape(
    t: &mut Tape,
    reconstructed: &[Var],
    target_features: &[Var],
) -> Var {
    assert_eq!(reconstructed.len(), target_features.len());
    let mut acc: Option<Var> = None;
    for (&r, &x) in reconstructed.iter().zip(target_features.iter()) {
        let diff = t.sub(r, x);
        let sq = t.mul(diff, diff);
        let mse = t.mean_all(sq);
        acc = Some(match acc {
            Some(a) => t.add(a, mse),
            None => mse,
        });
    }
    let total = acc.expect("at least one level");
    t.scale(total, 1.0 / reconstructed.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_er, generate_sbm_pair, SbmParams};
    use crate::nn::grad_check;
    use ndarray::arr2;
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(seed)
    }

    #[test]
    fn equal_logits_give_uniform_assignment() {
        let a = Array2::zeros((4, 4));
        let x = Array2::zeros((4, 3));
        let mut surrogate = ParamTree::new();
        surrogate.insert("w", Array2::zeros((3, 2)));
        surrogate.insert("b", Array2::zeros((1, 2)));
        let p = compute_assignment(&a, &x, &surrogate, 2).unwrap();
        assert!(p.iter().all(|&v| (v - 0.5).abs() < 1e-12));
    }

    #[test]
    fn assignment_rows_are_simplex() {
        let g = generate_er(15, 0.3, 4, 3).unwrap();
        let mut r = rng(1);
        let mut surrogate = ParamTree::new();
        surrogate.insert("w", init_linear(4, 5, &mut r));
        surrogate.insert("b", init_linear(1, 5, &mut r));
        let p = compute_assignment(&g.dense_adjacency(), g.features(), &surrogate, 5).unwrap();
        for row in p.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-6);
            assert!(row.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn assignment_rejects_non_shrinking_size() {
        let a = Array2::zeros((3, 3));
        let x = Array2::zeros((3, 2));
        let mut surrogate = ParamTree::new();
        surrogate.insert("w", Array2::zeros((2, 3)));
        let err = compute_assignment(&a, &x, &surrogate, 3).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn assignment_gradient_matches_finite_differences() {
        let g = generate_er(8, 0.4, 3, 7).unwrap();
        let a_norm = normalize_dense(&g.dense_adjacency(), true);
        let x = g.features().clone();
        let mut r = rng(2);
        let mut surrogate = ParamTree::new();
        surrogate.insert("w", init_linear(3, 4, &mut r));
        surrogate.insert("b", init_linear(1, 4, &mut r));
        let err = grad_check(
            |t, bound| {
                let av = t.constant(a_norm.clone());
                let xv = t.constant(x.clone());
                let p = assignment_on_tape(t, bound, "", av, xv).unwrap();
                let sq = t.mul(p, p);
                t.sum_all(sq)
            },
            &surrogate,
            1e-5,
        )
        .unwrap();
        assert!(err <= 1e-4, "assignment gradient error {err}");
    }

    #[test]
    fn identity_assignment_preserves_graph() {
        let a = arr2(&[[0.0, 1.0], [1.0, 0.0]]);
        let x = arr2(&[[1.0, 2.0], [3.0, 4.0]]);
        let p = Array2::eye(2);
        let (a2, x2) = coarsen(&a, &x, &p).unwrap();
        assert_eq!(a2, a);
        assert_eq!(x2, x);
    }

    #[test]
    fn all_ones_column_totals_everything() {
        let a = arr2(&[[0.0, 1.0, 2.0], [1.0, 0.0, 0.5], [2.0, 0.5, 0.0]]);
        let x = arr2(&[[1.0, 10.0], [2.0, 20.0], [3.0, 30.0]]);
        let p = Array2::ones((3, 1));
        let (a2, x2) = coarsen(&a, &x, &p).unwrap();
        assert_eq!(a2.dim(), (1, 1));
        assert!((a2[[0, 0]] - a.sum()).abs() < 1e-12);
        assert!((x2[[0, 0]] - 6.0).abs() < 1e-12);
        assert!((x2[[0, 1]] - 60.0).abs() < 1e-12);
    }

    #[test]
    fn block_indicator_counts_cross_block_mass() {
        let params = SbmParams {
            block_sizes_source: vec![8, 8],
            block_sizes_target: vec![8, 8],
            p_in: 0.7,
            p_out: 0.2,
            feature_noise: 0.1,
            feature_dim: 3,
        };
        let (g, _) = generate_sbm_pair(&params, 5).unwrap();
        let mut p = Array2::zeros((16, 2));
        for i in 0..16 {
            p[[i, g.labels()[i] as usize]] = 1.0;
        }
        let a = g.dense_adjacency();
        let (a2, _) = coarsen(&a, g.features(), &p).unwrap();
        let cross =
            g.edges().iter().filter(|&&(u, v)| g.labels()[u] != g.labels()[v]).count() as f64;
        assert!((a2[[0, 1]] - cross).abs() < 1e-9);
        assert!((a2[[1, 0]] - cross).abs() < 1e-9);
    }

    #[test]
    fn coarsen_rejects_non_simplex_rows() {
        let a = Array2::zeros((2, 2));
        let x = Array2::zeros((2, 1));
        let p = arr2(&[[0.5, 0.2], [0.5, 0.5]]);
        assert!(matches!(coarsen(&a, &x, &p), Err(Error::Numerical(_))));
    }

    #[test]
    fn encode_produces_expected_level_shapes() {
        let g = generate_er(60, 0.1, 5, 9).unwrap();
        let mut r = rng(3);
        let params = CoderParams::init(5, 5, &[20, 7], &mut r);
        let h = encode(&g, &params, &[20, 7]).unwrap();
        assert_eq!(h.level_sizes(), vec![60, 20, 7]);
        h.validate().unwrap();
    }

    #[test]
    fn encode_single_supernode_is_weighted_centroid() {
        let g = generate_er(10, 0.3, 4, 2).unwrap();
        let mut r = rng(4);
        let params = CoderParams::init(4, 4, &[1], &mut r);
        let h = encode(&g, &params, &[1]).unwrap();
        assert_eq!(h.levels[1].1.nrows(), 1);
        let expected = h.assigns[0].t().dot(&h.levels[0].1);
        let diff = &expected - &h.levels[1].1;
        assert!(diff.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn encode_conserves_feature_and_adjacency_mass() {
        let g = generate_er(40, 0.15, 3, 11).unwrap();
        let mut r = rng(5);
        let params = CoderParams::init(3, 3, &[15, 4], &mut r);
        let h = encode(&g, &params, &[15, 4]).unwrap();
        for l in 0..h.assigns.len() {
            let (fine_a, fine_x) = &h.levels[l];
            let (coarse_a, coarse_x) = &h.levels[l + 1];
            for c in 0..fine_x.ncols() {
                let fine_mass: f64 = fine_x.column(c).sum();
                let coarse_mass: f64 = coarse_x.column(c).sum();
                assert!((fine_mass - coarse_mass).abs() < 1e-5);
            }
            assert!((fine_a.sum() - coarse_a.sum()).abs() < 1e-5);
        }
    }

    #[test]
    fn encode_is_deterministic() {
        let g = generate_er(25, 0.2, 4, 13).unwrap();
        let mut r = rng(6);
        let params = CoderParams::init(4, 4, &[8], &mut r);
        let h1 = encode(&g, &params, &[8]).unwrap();
        let h2 = encode(&g, &params, &[8]).unwrap();
        assert_eq!(h1.levels[1].1, h2.levels[1].1);
        assert_eq!(h1.assigns[0], h2.assigns[0]);
    }

    #[test]
    fn translate_identity_initialized_mlp_is_identity() {
        let mut params = CoderParams::init(3, 3, &[2], &mut rng(7));
        let mut t = ParamTree::new();
        t.insert("0.w", Array2::eye(3));
        t.insert("0.b", Array2::zeros((1, 3)));
        params.translator = t;
        let x = arr2(&[[0.5, 1.5, -0.25], [2.0, 0.0, 1.0]]);
        let out = translate(&x, &params).unwrap();
        assert!((&out - &x).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn translate_is_row_wise() {
        let params = CoderParams::init(4, 3, &[2], &mut rng(8));
        let x = init_linear(5, 4, &mut rng(9));
        let out = translate(&x, &params).unwrap();
        let mut xp = x.clone();
        xp.row_mut(0).assign(&x.row(4));
        xp.row_mut(4).assign(&x.row(0));
        let outp = translate(&xp, &params).unwrap();
        let d0 = &outp.row(0) - &out.row(4);
        let d4 = &outp.row(4) - &out.row(0);
        assert!(d0.iter().all(|v| v.abs() < 1e-12));
        assert!(d4.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn translate_rejects_width_mismatch() {
        let params = CoderParams::init(4, 3, &[2], &mut rng(10));
        let x = Array2::zeros((2, 5));
        let err = translate(&x, &params).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn decode_identity_assignments_copy_coarsest() {
        // Square identity assignments only arise in hand-built hierarchies.
        let x_hat = arr2(&[[1.0, 2.0], [3.0, 4.0]]);
        let hier = Hierarchy {
            levels: vec![
                (Array2::zeros((2, 2)), Array2::zeros((2, 2))),
                (Array2::zeros((2, 2)), Array2::zeros((2, 2))),
            ],
            assigns: vec![Array2::eye(2)],
        };
        let params = CoderParams::init(2, 2, &[1], &mut rng(11));
        let out = decode(&x_hat, &hier, &params).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0], x_hat);
        assert_eq!(out[1], x_hat);
    }

    #[test]
    fn decode_single_supernode_scales_by_assignment_weight() {
        let n = 4;
        let coarse = arr2(&[[2.0, -1.0]]);
        let assigns = Array2::ones((n, 1));
        let hier = Hierarchy {
            levels: vec![
                (Array2::zeros((n, n)), Array2::zeros((n, 2))),
                (Array2::zeros((1, 1)), Array2::zeros((1, 2))),
            ],
            assigns: vec![assigns.clone()],
        };
        let params = CoderParams::init(2, 2, &[1], &mut rng(12));
        let out = decode(&coarse, &hier, &params).unwrap();
        for i in 0..n {
            for c in 0..2 {
                assert!((out[0][[i, c]] - assigns[[i, 0]] * coarse[[0, c]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn decode_levels_match_hierarchy_shapes() {
        let g = generate_er(30, 0.2, 4, 15).unwrap();
        let params = CoderParams::init(4, 4, &[10, 3], &mut rng(13));
        let hier = build_target_hierarchy(&g, &params, &[10, 3]).unwrap();
        let x_hat = init_linear(3, 4, &mut rng(14));
        let out = decode(&x_hat, &hier, &params).unwrap();
        for (r, (a, _)) in out.iter().zip(hier.levels.iter()) {
            assert_eq!(r.nrows(), a.nrows());
            assert_eq!(r.ncols(), 4);
        }
    }

    #[test]
    fn reconstruction_loss_zero_for_perfect_match() {
        let g = generate_er(12, 0.3, 3, 17).unwrap();
        let params = CoderParams::init(3, 3, &[5], &mut rng(15));
        let hier = build_target_hierarchy(&g, &params, &[5]).unwrap();
        let exact: Vec<DenseMatrix> = hier.levels.iter().map(|(_, x)| x.clone()).collect();
        let loss = reconstruction_loss(&exact, &hier).unwrap();
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn reconstruction_loss_constant_offset_is_squared() {
        let g = generate_er(12, 0.3, 3, 19).unwrap();
        let params = CoderParams::init(3, 3, &[5], &mut rng(16));
        let hier = build_target_hierarchy(&g, &params, &[5]).unwrap();
        let c = 0.37;
        let shifted: Vec<DenseMatrix> = hier.levels.iter().map(|(_, x)| x + c).collect();
        let loss = reconstruction_loss(&shifted, &hier).unwrap();
        assert!((loss - c * c).abs() < 1e-10);
    }

    #[test]
    fn reconstruction_loss_matches_direct_summation() {
        let g = generate_er(5, 0.5, 2, 23).unwrap();
        let params = CoderParams::init(2, 2, &[2], &mut rng(17));
        let hier = build_target_hierarchy(&g, &params, &[2]).unwrap();
        let recon: Vec<DenseMatrix> =
            hier.levels.iter().map(|(_, x)| x + 0.5 * x.mapv(f64::sin)).collect();
        let loss = reconstruction_loss(&recon, &hier).unwrap();
        let mut expected = 0.0;
        for (r, (_, x)) in recon.iter().zip(hier.levels.iter()) {
            let mut s = 0.0;
            for (a, b) in r.iter().zip(x.iter()) {
                s += (a - b) * (a - b);
            }
            expected += s / r.len() as f64;
        }
        expected /= recon.len() as f64;
        assert!((loss - expected).abs() < 1e-12);
    }

    #[test]
    fn end_to_end_coder_gradient_matches_finite_differences() {
        // encode -> translate -> decode -> reconstruction on a small pair.
        let params = SbmParams {
            block_sizes_source: vec![5, 5],
            block_sizes_target: vec![6, 6],
            p_in: 0.7,
            p_out: 0.1,
            feature_noise: 0.3,
            feature_dim: 3,
        };
        let (src, tgt) = generate_sbm_pair(&params, 31).unwrap();
        let level_sizes = vec![4, 2];
        let coder = CoderParams::init(3, 3, &level_sizes, &mut rng(18));
        let mut master = ParamTree::new();
        coder.flatten_into(&mut master, "coder");

        let src_a = src.dense_adjacency();
        let src_a_norm = normalize_dense(&src_a, true);
        let src_x = src.features().clone();
        let tgt_a = tgt.dense_adjacency();
        let tgt_a_norm = normalize_dense(&tgt_a, true);
        let tgt_x = tgt.features().clone();

        let err = grad_check(
            |t, bound| {
                let sa = t.constant(src_a.clone());
                let san = t.constant(src_a_norm.clone());
                let sx = t.constant(src_x.clone());
                let ta = t.constant(tgt_a.clone());
                let tan = t.constant(tgt_a_norm.clone());
                let tx = t.constant(tgt_x.clone());
                let src_h =
                    encode_on_tape(t, bound, "coder.pool", sa, san, sx, &level_sizes).unwrap();
                let tgt_h =
                    encode_on_tape(t, bound, "coder.unpool", ta, tan, tx, &level_sizes).unwrap();
                let coarse = *src_h.features.last().unwrap();
                let translated = translate_on_tape(t, bound, "coder.trans", coarse).unwrap();
                let recon = decode_on_tape(t, translated, &tgt_h);
                reconstruction_loss_on_tape(t, &recon, &tgt_h.features)
            },
            &master,
            1e-5,
        )
        .unwrap();
        assert!(err <= 1e-4, "end-to-end coder gradient error {err}");
    }
}
