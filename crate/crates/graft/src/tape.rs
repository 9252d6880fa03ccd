//! Reverse-mode automatic differentiation over dense `f64` matrices.
//!
//! A [`Tape`] records operations as they are evaluated; [`Tape::backward`]
//! replays them in reverse to accumulate gradients. Scalars are 1x1
//! matrices. Nodes created from constants do not receive gradients, and
//! subgraphs that cannot reach a parameter are skipped during the backward
//! pass.

use std::rc::Rc;

use ndarray::{Array2, Axis};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    /// (n,k) + (1,k) with the row broadcast over all rows.
    AddRow(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    AddConst(usize),
    LeakyRelu(usize, f64),
    Sigmoid(usize),
    SoftmaxRows(usize),
    Transpose(usize),
    SumAll(usize),
    SumCols(usize),
    GatherRows(usize, Vec<usize>),
    ConcatCols(usize, usize),
    PowConst(usize, f64),
    Ln(usize),
    Clamp(usize, f64, f64),
}

struct Node {
    value: Rc<Array2<f64>>,
    op: Op,
    needs_grad: bool,
}

/// Gradients produced by one backward pass, indexed by [`Var`].
pub struct Grads {
    inner: Vec<Option<Array2<f64>>>,
}

impl Grads {
    pub fn get(&self, v: Var) -> Option<&Array2<f64>> {
        self.inner[v.0].as_ref()
    }
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    fn push(&mut self, value: Array2<f64>, op: Op, needs_grad: bool) -> Var {
        self.push_rc(Rc::new(value), op, needs_grad)
    }

    fn push_rc(&mut self, value: Rc<Array2<f64>>, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Leaf that accumulates gradient (a parameter).
    pub fn param(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Leaf that never receives gradient (data, masks, weights).
    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Constant leaf backed by shared storage; the tape keeps only the
    /// handle, so large graph matrices can be reused across episodes.
    pub fn constant_shared(&mut self, value: Rc<Array2<f64>>) -> Var {
        self.push_rc(value, Op::Leaf, false)
    }

    /// Shared handle to a node's value (cheap; does not copy the matrix).
    pub fn value_rc(&self, v: Var) -> Rc<Array2<f64>> {
        Rc::clone(&self.nodes[v.0].value)
    }

    /// Whether gradients will flow into this node during backward.
    pub fn needs_grad(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        let val = self.value(v);
        assert_eq!(val.dim(), (1, 1), "scalar() on a non-scalar node");
        val[[0, 0]]
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(
            av.ncols(),
            bv.nrows(),
            "matmul: inner dimensions {} and {} differ",
            av.ncols(),
            bv.nrows()
        );
        let value = av.dot(bv);
        let ng = self.needs(a) || self.needs(b);
        self.push(value, Op::MatMul(a.0, b.0), ng)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.value(a).dim(), self.value(b).dim(), "add: shape mismatch");
        let value = self.value(a) + self.value(b);
        let ng = self.needs(a) || self.needs(b);
        self.push(value, Op::Add(a.0, b.0), ng)
    }

    /// Adds a 1-row matrix to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let rv = self.value(row);
        assert_eq!(rv.nrows(), 1, "add_row: second operand must have one row");
        assert_eq!(self.value(a).ncols(), rv.ncols(), "add_row: column mismatch");
        let value = self.value(a) + &rv.row(0);
        let ng = self.needs(a) || self.needs(row);
        self.push(value, Op::AddRow(a.0, row.0), ng)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.value(a).dim(), self.value(b).dim(), "sub: shape mismatch");
        let value = self.value(a) - self.value(b);
        let ng = self.needs(a) || self.needs(b);
        self.push(value, Op::Sub(a.0, b.0), ng)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.value(a).dim(), self.value(b).dim(), "mul: shape mismatch");
        let value = self.value(a) * self.value(b);
        let ng = self.needs(a) || self.needs(b);
        self.push(value, Op::Mul(a.0, b.0), ng)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a) * c;
        let ng = self.needs(a);
        self.push(value, Op::Scale(a.0, c), ng)
    }

    pub fn add_const(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a) + c;
        let ng = self.needs(a);
        self.push(value, Op::AddConst(a.0), ng)
    }

    /// max(x, slope * x); slope 0 is the plain rectifier.
    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let value = self.value(a).mapv(|x| if x > 0.0 { x } else { slope * x });
        let ng = self.needs(a);
        self.push(value, Op::LeakyRelu(a.0, slope), ng)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(|x| 1.0 / (1.0 + (-x).exp()));
        let ng = self.needs(a);
        self.push(value, Op::Sigmoid(a.0), ng)
    }

    /// Row-wise softmax, numerically stabilized by the row maximum.
    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let mut value = av.clone();
        for mut row in value.rows_mut() {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            row.mapv_inplace(|x| (x - max).exp());
            let sum: f64 = row.sum();
            row.mapv_inplace(|x| x / sum);
        }
        let ng = self.needs(a);
        self.push(value, Op::SoftmaxRows(a.0), ng)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).t().to_owned();
        let ng = self.needs(a);
        self.push(value, Op::Transpose(a.0), ng)
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let value = Array2::from_elem((1, 1), self.value(a).sum());
        let ng = self.needs(a);
        self.push(value, Op::SumAll(a.0), ng)
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let n = self.value(a).len() as f64;
        let s = self.sum_all(a);
        self.scale(s, 1.0 / n)
    }

    /// Sums each row, producing an (n,1) column.
    pub fn sum_cols(&mut self, a: Var) -> Var {
        let value = self.value(a).sum_axis(Axis(1)).insert_axis(Axis(1));
        let ng = self.needs(a);
        self.push(value, Op::SumCols(a.0), ng)
    }

    /// Selects rows by index; duplicates are allowed and their gradients
    /// accumulate.
    pub fn gather_rows(&mut self, a: Var, idx: &[usize]) -> Var {
        let av = self.value(a);
        let mut value = Array2::zeros((idx.len(), av.ncols()));
        for (k, &i) in idx.iter().enumerate() {
            value.row_mut(k).assign(&av.row(i));
        }
        let ng = self.needs(a);
        self.push(value, Op::GatherRows(a.0, idx.to_vec()), ng)
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.nrows(), bv.nrows(), "concat_cols: row mismatch");
        let mut value = Array2::zeros((av.nrows(), av.ncols() + bv.ncols()));
        value.slice_mut(ndarray::s![.., ..av.ncols()]).assign(av);
        value.slice_mut(ndarray::s![.., av.ncols()..]).assign(bv);
        let ng = self.needs(a) || self.needs(b);
        self.push(value, Op::ConcatCols(a.0, b.0), ng)
    }

    /// Elementwise x^c. Callers must keep x in the op's domain (x > 0 for
    /// fractional c).
    pub fn pow_const(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).mapv(|x| x.powf(c));
        let ng = self.needs(a);
        self.push(value, Op::PowConst(a.0, c), ng)
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(f64::ln);
        let ng = self.needs(a);
        self.push(value, Op::Ln(a.0), ng)
    }

    /// Clamps values to [lo, hi]; gradient passes through strictly inside
    /// the interval and is zero outside.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let value = self.value(a).mapv(|x| x.clamp(lo, hi));
        let ng = self.needs(a);
        self.push(value, Op::Clamp(a.0, lo, hi), ng)
    }

    /// Accumulates d(loss)/d(node) for every node reachable from `loss`.
    /// `loss` must be scalar (1x1).
    pub fn backward(&mut self, loss: Var) -> Grads {
        assert_eq!(self.value(loss).dim(), (1, 1), "backward: loss must be scalar");
        let mut grads: Vec<Option<Array2<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Array2::from_elem((1, 1), 1.0));

        for i in (0..=loss.0).rev() {
            if grads[i].is_none() || !self.nodes[i].needs_grad {
                continue;
            }
            let g = grads[i].take().unwrap();
            match &self.nodes[i].op {
                Op::Leaf => {
                    grads[i] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    let (a, b) = (*a, *b);
                    if self.nodes[a].needs_grad {
                        let da = g.dot(&self.nodes[b].value.t());
                        accumulate(&mut grads[a], da);
                    }
                    if self.nodes[b].needs_grad {
                        let db = self.nodes[a].value.t().dot(&g);
                        accumulate(&mut grads[b], db);
                    }
                }
                Op::Add(a, b) => {
                    let (a, b) = (*a, *b);
                    if self.nodes[a].needs_grad {
                        accumulate(&mut grads[a], g.clone());
                    }
                    if self.nodes[b].needs_grad {
                        accumulate(&mut grads[b], g.clone());
                    }
                }
                Op::AddRow(a, r) => {
                    let (a, r) = (*a, *r);
                    if self.nodes[a].needs_grad {
                        accumulate(&mut grads[a], g.clone());
                    }
                    if self.nodes[r].needs_grad {
                        let dr = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                        accumulate(&mut grads[r], dr);
                    }
                }
                Op::Sub(a, b) => {
                    let (a, b) = (*a, *b);
                    if self.nodes[a].needs_grad {
                        accumulate(&mut grads[a], g.clone());
                    }
                    if self.nodes[b].needs_grad {
                        accumulate(&mut grads[b], -&g);
                    }
                }
                Op::Mul(a, b) => {
                    let (a, b) = (*a, *b);
                    if self.nodes[a].needs_grad {
                        let da = &g * &*self.nodes[b].value;
                        accumulate(&mut grads[a], da);
                    }
                    if self.nodes[b].needs_grad {
                        let db = &g * &*self.nodes[a].value;
                        accumulate(&mut grads[b], db);
                    }
                }
                Op::Scale(a, c) => {
                    let (a, c) = (*a, *c);
                    if self.nodes[a].needs_grad {
                        accumulate(&mut grads[a], &g * c);
                    }
                }
                Op::AddConst(a) => {
                    let a = *a;
                    if self.nodes[a].needs_grad {
                        accumulate(&mut grads[a], g.clone());
                    }
                }
                Op::LeakyRelu(a, slope) => {
                    let (a, slope) = (*a, *slope);
                    if self.nodes[a].needs_grad {
                        let mask = self.nodes[a].value.mapv(|x| if x > 0.0 { 1.0 } else { slope });
                        accumulate(&mut grads[a], &g * &mask);
                    }
                }
                Op::Sigmoid(a) => {
                    let a = *a;
                    if self.nodes[a].needs_grad {
                        let y = &*self.nodes[i].value;
                        let dy = y * &(1.0 - y.clone());
                        accumulate(&mut grads[a], &g * &dy);
                    }
                }
                Op::SoftmaxRows(a) => {
                    let a = *a;
                    if self.nodes[a].needs_grad {
                        let y = &*self.nodes[i].value;
                        let mut da = &g * y;
                        // da_row = y ⊙ (g − <g, y>)
                        for (mut row, (grow, yrow)) in
                            da.rows_mut().into_iter().zip(g.rows().into_iter().zip(y.rows()))
                        {
                            let dot: f64 = grow.iter().zip(yrow.iter()).map(|(a, b)| a * b).sum();
                            for (r, yv) in row.iter_mut().zip(yrow.iter()) {
                                *r -= dot * yv;
                            }
                        }
                        accumulate(&mut grads[a], da);
                    }
                }
                Op::Transpose(a) => {
                    let a = *a;
                    if self.nodes[a].needs_grad {
                        accumulate(&mut grads[a], g.t().to_owned());
                    }
                }
                Op::SumAll(a) => {
                    let a = *a;
                    if self.nodes[a].needs_grad {
                        let da = Array2::from_elem(self.nodes[a].value.dim(), g[[0, 0]]);
                        accumulate(&mut grads[a], da);
                    }
                }
                Op::SumCols(a) => {
                    let a = *a;
                    if self.nodes[a].needs_grad {
                        let dim = self.nodes[a].value.dim();
                        let mut da = Array2::zeros(dim);
                        for (mut row, gv) in da.rows_mut().into_iter().zip(g.column(0).iter()) {
                            row.fill(*gv);
                        }
                        accumulate(&mut grads[a], da);
                    }
                }
                Op::GatherRows(a, idx) => {
                    let a = *a;
                    if self.nodes[a].needs_grad {
                        let mut da = Array2::zeros(self.nodes[a].value.dim());
                        for (k, &src) in idx.iter().enumerate() {
                            let mut row = da.row_mut(src);
                            row += &g.row(k);
                        }
                        accumulate(&mut grads[a], da);
                    }
                }
                Op::ConcatCols(a, b) => {
                    let (a, b) = (*a, *b);
                    let ca = self.nodes[a].value.ncols();
                    if self.nodes[a].needs_grad {
                        accumulate(&mut grads[a], g.slice(ndarray::s![.., ..ca]).to_owned());
                    }
                    if self.nodes[b].needs_grad {
                        accumulate(&mut grads[b], g.slice(ndarray::s![.., ca..]).to_owned());
                    }
                }
                Op::PowConst(a, c) => {
                    let (a, c) = (*a, *c);
                    if self.nodes[a].needs_grad {
                        let dx = self.nodes[a].value.mapv(|x| c * x.powf(c - 1.0));
                        accumulate(&mut grads[a], &g * &dx);
                    }
                }
                Op::Ln(a) => {
                    let a = *a;
                    if self.nodes[a].needs_grad {
                        let dx = self.nodes[a].value.mapv(|x| 1.0 / x);
                        accumulate(&mut grads[a], &g * &dx);
                    }
                }
                Op::Clamp(a, lo, hi) => {
                    let (a, lo, hi) = (*a, *lo, *hi);
                    if self.nodes[a].needs_grad {
                        let mask =
                            self.nodes[a].value.mapv(|x| if x > lo && x < hi { 1.0 } else { 0.0 });
                        accumulate(&mut grads[a], &g * &mask);
                    }
                }
            }
        }
        Grads { inner: grads }
    }
}

fn accumulate(slot: &mut Option<Array2<f64>>, g: Array2<f64>) {
    match slot {
        Some(acc) => *acc += &g,
        None => *slot = Some(g),
    }
}
