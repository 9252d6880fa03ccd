use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{bind_params, DenseMatrix, ParamTree, SparseAdjacency};
use crate::tape::{Tape, Var};

/// Large negative fill for attention scores outside the edge mask; deep
/// enough that the softmax underflows those entries to exactly zero.
const ATTENTION_MASK_FILL: f64 = -1e9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nonlinearity {
    Identity,
    Relu,
    LeakyRelu { slope: f64 },
}

impl Nonlinearity {
    pub fn apply(&self, t: &mut Tape, x: Var) -> Var {
        match self {
            Nonlinearity::Identity => x,
            Nonlinearity::Relu => t.leaky_relu(x, 0.0),
            Nonlinearity::LeakyRelu { slope } => t.leaky_relu(x, *slope),
        }
    }
}

impl Default for Nonlinearity {
    fn default() -> Self {
        Nonlinearity::LeakyRelu { slope: 0.2 }
    }
}

/// Value-level D^(-1/2)(A+I)D^(-1/2) over a dense adjacency.
pub fn normalize_dense(a: &Array2<f64>, add_self_loops: bool) -> Array2<f64> {
    let n = a.nrows();
    let mut out = a.clone();
    if add_self_loops {
        for i in 0..n {
            out[[i, i]] += 1.0;
        }
    }
    let deg: Vec<f64> = out.rows().into_iter().map(|r| r.sum()).collect();
    let inv: Vec<f64> = deg.iter().map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 }).collect();
    for i in 0..n {
        for j in 0..n {
            out[[i, j]] *= inv[i] * inv[j];
        }
    }
    out
}

/// Differentiable D^(-1/2)(A+I)D^(-1/2) for coarse-level adjacencies whose
/// entries depend on upstream parameters. Self-loops keep every row sum
/// at least 1, so the inverse square root stays in its smooth domain.
pub fn normalize_dense_on_tape(t: &mut Tape, a: Var) -> Var {
    let n = t.value(a).nrows();
    let eye = t.constant(Array2::eye(n));
    let a_hat = t.add(a, eye);
    let deg = t.sum_cols(a_hat); // (n,1)
    let inv_sqrt = t.pow_const(deg, -0.5);
    let ones_row = t.constant(Array2::ones((1, n)));
    let row_scale = t.matmul(inv_sqrt, ones_row); // (n,n): inv_sqrt_i everywhere in row i
    let col_scale = t.transpose(row_scale);
    let scaled = t.mul(a_hat, row_scale);
    t.mul(scaled, col_scale)
}

/// One graph-convolution propagation on the tape:
/// `nonlin(A_norm (X W) + b)`.
pub fn gcn_forward(
    t: &mut Tape,
    a_norm: Var,
    x: Var,
    w: Var,
    b: Option<Var>,
    nonlin: Nonlinearity,
) -> Var {
    let xw = t.matmul(x, w);
    let mut h = t.matmul(a_norm, xw);
    if let Some(b) = b {
        h = t.add_row(h, b);
    }
    nonlin.apply(t, h)
}

/// One graph-convolution layer over a pre-normalized sparse adjacency.
/// Expects parameters `w` and optionally `b`.
pub fn gcn_layer(
    a_norm: &SparseAdjacency,
    x: &DenseMatrix,
    params: &ParamTree,
    nonlin: Nonlinearity,
) -> Result<DenseMatrix> {
    let w = params.get("w")?;
    if x.ncols() != w.nrows() {
        return Err(Error::Shape(format!(
            "gcn: feature width {} does not match weight rows {}",
            x.ncols(),
            w.nrows()
        )));
    }
    if x.nrows() != a_norm.n() {
        return Err(Error::Shape(format!(
            "gcn: adjacency is {0}x{0} but features have {1} rows",
            a_norm.n(),
            x.nrows()
        )));
    }
    let mut t = Tape::new();
    let bound = bind_params(&mut t, params);
    let a = t.constant(a_norm.to_dense());
    let xv = t.constant(x.clone());
    let b = bound.var_opt("b");
    let out = gcn_forward(&mut t, a, xv, bound.var("w")?, b, nonlin);
    Ok(t.value(out).clone())
}

/// Bound attention-layer parameters: a shared projection plus the two
/// halves of the scoring vector.
pub struct GatParams {
    pub w: Var,
    pub a_left: Var,
    pub a_right: Var,
    pub b: Option<Var>,
}

impl GatParams {
    pub fn from_bound(bound: &crate::nn::BoundParams, prefix: &str) -> Result<Self> {
        let key = |s: &str| if prefix.is_empty() { s.to_string() } else { format!("{prefix}.{s}") };
        Ok(GatParams {
            w: bound.var(&key("w"))?,
            a_left: bound.var(&key("a_l"))?,
            a_right: bound.var(&key("a_r"))?,
            b: bound.var_opt(&key("b")),
        })
    }
}

/// Graph-attention propagation on the tape. `mask` is the 0/1 pattern of
/// edges plus self-loops; scores of non-neighbors are filled with a large
/// negative constant before the row softmax, so each node's attention is a
/// simplex over its neighborhood (isolated nodes attend to themselves).
pub fn gat_forward(
    t: &mut Tape,
    mask: &Array2<f64>,
    x: Var,
    params: &GatParams,
    nonlin: Nonlinearity,
) -> Var {
    let att = gat_attention_on_tape(t, mask, x, params);
    let h = t.matmul(x, params.w);
    let mut out = t.matmul(att, h);
    if let Some(b) = params.b {
        out = t.add_row(out, b);
    }
    nonlin.apply(t, out)
}

fn gat_attention_on_tape(t: &mut Tape, mask: &Array2<f64>, x: Var, params: &GatParams) -> Var {
    let n = t.value(x).nrows();
    assert_eq!(mask.dim(), (n, n), "gat: mask shape mismatch");
    let h = t.matmul(x, params.w);
    let left = t.matmul(h, params.a_left); // (n,1)
    let right = t.matmul(h, params.a_right); // (n,1)
    let ones_row = t.constant(Array2::ones((1, n)));
    let left_b = t.matmul(left, ones_row);
    let right_b0 = t.matmul(right, ones_row);
    let right_b = t.transpose(right_b0);
    let scores = t.add(left_b, right_b);
    let scores = t.leaky_relu(scores, 0.2);
    let mask_var = t.constant(mask.clone());
    let fill = t.constant(mask.mapv(|m| (1.0 - m) * ATTENTION_MASK_FILL));
    let masked = t.mul(scores, mask_var);
    let masked = t.add(masked, fill);
    t.softmax_rows(masked)
}

fn gat_mask(a: &SparseAdjacency) -> Array2<f64> {
    let mut mask = Array2::zeros((a.n(), a.n()));
    for (r, c, v) in a.entries() {
        if v > 0.0 {
            mask[[r, c]] = 1.0;
        }
    }
    for i in 0..a.n() {
        mask[[i, i]] = 1.0;
    }
    mask
}

/// Graph-attention layer over the raw adjacency (self-loops are implied).
/// Expects parameters `w`, `a_l`, `a_r`, and optionally `b`.
pub fn gat_layer(
    a: &SparseAdjacency,
    x: &DenseMatrix,
    params: &ParamTree,
    nonlin: Nonlinearity,
) -> Result<DenseMatrix> {
    let w = params.get("w")?;
    if x.ncols() != w.nrows() {
        return Err(Error::Shape(format!(
            "gat: feature width {} does not match weight rows {}",
            x.ncols(),
            w.nrows()
        )));
    }
    if x.nrows() != a.n() {
        return Err(Error::Shape(format!(
            "gat: adjacency is {0}x{0} but features have {1} rows",
            a.n(),
            x.nrows()
        )));
    }
    let mut t = Tape::new();
    let bound = bind_params(&mut t, params);
    let gp = GatParams::from_bound(&bound, "")?;
    let xv = t.constant(x.clone());
    let out = gat_forward(&mut t, &gat_mask(a), xv, &gp, nonlin);
    Ok(t.value(out).clone())
}

/// Attention coefficients of a GAT layer (row i = node i's weights over
/// its neighborhood including the self-loop).
pub fn gat_attention(a: &SparseAdjacency, x: &DenseMatrix, params: &ParamTree) -> Result<DenseMatrix> {
    let mut t = Tape::new();
    let bound = bind_params(&mut t, params);
    let gp = GatParams::from_bound(&bound, "")?;
    let xv = t.constant(x.clone());
    let att = gat_attention_on_tape(&mut t, &gat_mask(a), xv, &gp);
    Ok(t.value(att).clone())
}

/// Multilayer perceptron on the tape: hidden layers use `nonlin`, the last
/// layer is linear. `layers` holds (weight, optional bias) pairs.
pub fn mlp_forward(
    t: &mut Tape,
    x: Var,
    layers: &[(Var, Option<Var>)],
    nonlin: Nonlinearity,
) -> Var {
    let mut h = x;
    for (i, &(w, b)) in layers.iter().enumerate() {
        h = t.matmul(h, w);
        if let Some(b) = b {
            h = t.add_row(h, b);
        }
        if i + 1 < layers.len() {
            h = nonlin.apply(t, h);
        }
    }
    h
}

/// Row-wise MLP. Layers are named `0.w`, `0.b`, `1.w`, ... in application
/// order; a single layer `0.w`/`0.b` is a plain linear map.
pub fn mlp(x: &DenseMatrix, params: &ParamTree, nonlin: Nonlinearity) -> Result<DenseMatrix> {
    let mut t = Tape::new();
    let bound = bind_params(&mut t, params);
    let layers = mlp_layer_vars(params, &bound)?;
    if layers.is_empty() {
        return Err(Error::Param("mlp: no layers found (expected 0.w, 1.w, ...)".into()));
    }
    let mut width = x.ncols();
    for (i, &(w, _)) in layers.iter().enumerate() {
        let wv = t.value(w);
        if wv.nrows() != width {
            return Err(Error::Shape(format!(
                "mlp: layer {i} expects input width {}, got {width}",
                wv.nrows()
            )));
        }
        width = wv.ncols();
    }
    let xv = t.constant(x.clone());
    let out = mlp_forward(&mut t, xv, &layers, nonlin);
    Ok(t.value(out).clone())
}

/// Collects `i.w`/`i.b` pairs from a bound tree in layer order.
pub fn mlp_layer_vars(params: &ParamTree, bound: &crate::nn::BoundParams) -> Result<Vec<(Var, Option<Var>)>> {
    let mut layers = Vec::new();
    for i in 0.. {
        let wname = format!("{i}.w");
        if !params.contains(&wname) {
            break;
        }
        let w = bound.var(&wname)?;
        let b = bound.var_opt(&format!("{i}.b"));
        layers.push((w, b));
    }
    Ok(layers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{grad_check, init_linear, normalize_adjacency};
    use ndarray::arr2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn chain_adjacency(n: usize) -> SparseAdjacency {
        let mut rows = Vec::new();
        let mut cols = Vec::new();
        for i in 0..n - 1 {
            rows.push(i);
            cols.push(i + 1);
            rows.push(i + 1);
            cols.push(i);
        }
        let vals = vec![1.0; rows.len()];
        SparseAdjacency::new(n, rows, cols, vals, true).unwrap()
    }

    #[test]
    fn gcn_identity_propagation() {
        let eye = SparseAdjacency::new(3, vec![0, 1, 2], vec![0, 1, 2], vec![1.0; 3], true).unwrap();
        let x = arr2(&[[1.0, -2.0], [0.5, 0.25], [3.0, 4.0]]);
        let mut p = ParamTree::new();
        p.insert("w", Array2::eye(2));
        let out = gcn_layer(&eye, &x, &p, Nonlinearity::Identity).unwrap();
        assert!((&out - &x).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn gcn_zero_input_gives_zero_for_rectifiers() {
        let a = normalize_adjacency(&chain_adjacency(4), true).unwrap();
        let x = Array2::zeros((4, 3));
        let mut p = ParamTree::new();
        p.insert("w", arr2(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]));
        let out = gcn_layer(&a, &x, &p, Nonlinearity::Relu).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gcn_shape_error_names_dimension() {
        let a = chain_adjacency(3);
        let x = Array2::zeros((3, 5));
        let mut p = ParamTree::new();
        p.insert("w", Array2::zeros((4, 2)));
        let err = gcn_layer(&a, &x, &p, Nonlinearity::Identity).unwrap_err();
        assert!(err.to_string().contains('5') && err.to_string().contains('4'), "{err}");
    }

    #[test]
    fn gcn_gradient_matches_finite_differences() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let a = normalize_adjacency(&chain_adjacency(6), true).unwrap();
        let a_dense = a.to_dense();
        let x = init_linear(6, 4, &mut rng);
        let mut p = ParamTree::new();
        p.insert("w", init_linear(4, 3, &mut rng));
        p.insert("b", init_linear(1, 3, &mut rng));
        let err = grad_check(
            |t, bound| {
                let av = t.constant(a_dense.clone());
                let xv = t.constant(x.clone());
                let b = bound.var_opt("b");
                let h = gcn_forward(t, av, xv, bound.var("w").unwrap(), b, Nonlinearity::LeakyRelu { slope: 0.2 });
                let sq = t.mul(h, h);
                t.sum_all(sq)
            },
            &p,
            1e-5,
        )
        .unwrap();
        assert!(err <= 1e-4, "gcn gradient error {err}");
    }

    fn gat_params(d: usize, h: usize, rng: &mut ChaCha20Rng) -> ParamTree {
        let mut p = ParamTree::new();
        p.insert("w", init_linear(d, h, rng));
        p.insert("a_l", init_linear(h, 1, rng));
        p.insert("a_r", init_linear(h, 1, rng));
        p
    }

    #[test]
    fn gat_singleton_attends_to_itself() {
        let a = SparseAdjacency::new(1, vec![], vec![], vec![], true).unwrap();
        let x = arr2(&[[0.7, -0.3]]);
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let p = gat_params(2, 3, &mut rng);
        let att = gat_attention(&a, &x, &p).unwrap();
        assert!((att[[0, 0]] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gat_attention_rows_are_simplex() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        for seed in 0..5u64 {
            let g = crate::graph::generate_er(12, 0.3, 4, seed).unwrap();
            let a = SparseAdjacency::from_graph(&g);
            let x = init_linear(12, 4, &mut rng);
            let p = gat_params(4, 3, &mut rng);
            let att = gat_attention(&a, &x, &p).unwrap();
            for (i, row) in att.rows().into_iter().enumerate() {
                let sum: f64 = row.sum();
                assert!((sum - 1.0).abs() < 1e-6, "row {i} sums to {sum}");
                assert!(row.iter().all(|&v| v >= 0.0));
                // Mass only on neighbors and the self-loop.
                for j in 0..12 {
                    if i != j && !g.has_edge(i, j) {
                        assert!(att[[i, j]] == 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn gat_gradient_matches_finite_differences() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let g = crate::graph::generate_er(7, 0.4, 3, 11).unwrap();
        let a = SparseAdjacency::from_graph(&g);
        let mask = super::gat_mask(&a);
        let x = init_linear(7, 3, &mut rng);
        let p = gat_params(3, 4, &mut rng);
        let err = grad_check(
            |t, bound| {
                let gp = GatParams::from_bound(bound, "").unwrap();
                let xv = t.constant(x.clone());
                let out = gat_forward(t, &mask, xv, &gp, Nonlinearity::LeakyRelu { slope: 0.2 });
                let sq = t.mul(out, out);
                t.sum_all(sq)
            },
            &p,
            1e-5,
        )
        .unwrap();
        assert!(err <= 1e-4, "gat gradient error {err}");
    }

    #[test]
    fn mlp_single_identity_layer_is_identity() {
        let x = arr2(&[[1.0, 2.0], [3.0, 4.0]]);
        let mut p = ParamTree::new();
        p.insert("0.w", Array2::eye(2));
        p.insert("0.b", Array2::zeros((1, 2)));
        let out = mlp(&x, &p, Nonlinearity::Relu).unwrap();
        assert!((&out - &x).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn mlp_is_row_wise() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let x = init_linear(5, 3, &mut rng);
        let mut p = ParamTree::new();
        p.insert("0.w", init_linear(3, 4, &mut rng));
        p.insert("0.b", init_linear(1, 4, &mut rng));
        p.insert("1.w", init_linear(4, 2, &mut rng));
        p.insert("1.b", init_linear(1, 2, &mut rng));
        let out = mlp(&x, &p, Nonlinearity::Relu).unwrap();
        // Permute rows of the input; output rows permute identically.
        let perm = [3usize, 0, 4, 1, 2];
        let mut xp = x.clone();
        for (dst, &src) in perm.iter().enumerate() {
            xp.row_mut(dst).assign(&x.row(src));
        }
        let outp = mlp(&xp, &p, Nonlinearity::Relu).unwrap();
        for (dst, &src) in perm.iter().enumerate() {
            let diff = &outp.row(dst) - &out.row(src);
            assert!(diff.iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn mlp_gradient_matches_finite_differences() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let x = init_linear(4, 3, &mut rng);
        let mut p = ParamTree::new();
        p.insert("0.w", init_linear(3, 5, &mut rng));
        p.insert("0.b", init_linear(1, 5, &mut rng));
        p.insert("1.w", init_linear(5, 2, &mut rng));
        let err = grad_check(
            |t, bound| {
                let layers = mlp_layer_vars(&p, bound).unwrap();
                let xv = t.constant(x.clone());
                let out = mlp_forward(t, xv, &layers, Nonlinearity::LeakyRelu { slope: 0.2 });
                let sq = t.mul(out, out);
                t.sum_all(sq)
            },
            &p,
            1e-5,
        )
        .unwrap();
        assert!(err <= 1e-4, "mlp gradient error {err}");
    }

    #[test]
    fn layers_are_permutation_equivariant() {
        let mut rng = ChaCha20Rng::seed_from_u64(21);
        let g = crate::graph::generate_er(8, 0.35, 3, 17).unwrap();
        let a = SparseAdjacency::from_graph(&g);
        let x = init_linear(8, 3, &mut rng);
        let mut p = ParamTree::new();
        p.insert("w", init_linear(3, 4, &mut rng));
        let a_norm = normalize_adjacency(&a, true).unwrap();
        let out = gcn_layer(&a_norm, &x, &p, Nonlinearity::Relu).unwrap();

        // Apply a node permutation to (A, X): the output permutes identically.
        let perm = [5usize, 2, 7, 0, 6, 1, 4, 3];
        let mut inv = [0usize; 8];
        for (i, &pi) in perm.iter().enumerate() {
            inv[pi] = i;
        }
        let edges_p: Vec<(usize, usize)> =
            g.edges().iter().map(|&(u, v)| (inv[u], inv[v])).collect();
        let gp = crate::graph::Graph::new(
            8,
            edges_p,
            {
                let mut xp = x.clone();
                for (new, &old) in inv.iter().enumerate() {
                    // node i moves to position inv[i]
                    let _ = (new, old);
                }
                for i in 0..8 {
                    xp.row_mut(inv[i]).assign(&x.row(i));
                }
                xp
            },
            vec![-1; 8],
            0,
            "p",
        )
        .unwrap();
        let ap = normalize_adjacency(&SparseAdjacency::from_graph(&gp), true).unwrap();
        let outp = gcn_layer(&ap, gp.features(), &p, Nonlinearity::Relu).unwrap();
        for i in 0..8 {
            let diff = &outp.row(inv[i]) - &out.row(i);
            assert!(diff.iter().all(|v| v.abs() < 1e-9));
        }
    }
}
