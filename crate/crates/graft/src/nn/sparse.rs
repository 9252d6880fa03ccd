use ndarray::Array2;

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Adjacency stored as index pairs plus values. Symmetric entries are
/// stored explicitly (both orientations).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseAdjacency {
    n: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    symmetric: bool,
}

impl SparseAdjacency {
    pub fn new(
        n: usize,
        rows: Vec<usize>,
        cols: Vec<usize>,
        vals: Vec<f64>,
        symmetric: bool,
    ) -> Result<Self> {
        if rows.len() != cols.len() || rows.len() != vals.len() {
            return Err(Error::Shape("index and value lengths differ".into()));
        }
        if rows.iter().chain(cols.iter()).any(|&i| i >= n) {
            return Err(Error::Shape(format!("adjacency index out of range for n={n}")));
        }
        if vals.iter().any(|&v| v < 0.0) {
            return Err(Error::Param("adjacency values must be non-negative".into()));
        }
        Ok(SparseAdjacency { n, rows, cols, vals, symmetric })
    }

    /// Unweighted symmetric adjacency of a graph (value 1.0 both ways).
    pub fn from_graph(g: &Graph) -> Self {
        let m = g.num_edges();
        let mut rows = Vec::with_capacity(2 * m);
        let mut cols = Vec::with_capacity(2 * m);
        for &(a, b) in g.edges() {
            rows.push(a);
            cols.push(b);
            rows.push(b);
            cols.push(a);
        }
        let vals = vec![1.0; 2 * m];
        SparseAdjacency { n: g.num_nodes(), rows, cols, vals, symmetric: true }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn is_symmetric_flagged(&self) -> bool {
        self.symmetric
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.rows
            .iter()
            .zip(self.cols.iter())
            .zip(self.vals.iter())
            .map(|((&r, &c), &v)| (r, c, v))
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.n, self.n));
        for (r, c, v) in self.entries() {
            a[[r, c]] += v;
        }
        a
    }

    /// Sparse-dense product `A * x`.
    pub fn matmul_dense(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.nrows() != self.n {
            return Err(Error::Shape(format!(
                "adjacency is {0}x{0} but the matrix has {1} rows",
                self.n,
                x.nrows()
            )));
        }
        let mut out = Array2::zeros((self.n, x.ncols()));
        for (r, c, v) in self.entries() {
            let src = x.row(c).to_owned() * v;
            let mut dst = out.row_mut(r);
            dst += &src;
        }
        Ok(out)
    }
}

/// Symmetric renormalization D^(-1/2) (A + I) D^(-1/2). Without self-loops
/// the identity term is omitted and isolated nodes keep an all-zero row.
pub fn normalize_adjacency(a: &SparseAdjacency, add_self_loops: bool) -> Result<SparseAdjacency> {
    let n = a.n;
    let mut rows = a.rows.clone();
    let mut cols = a.cols.clone();
    let mut vals = a.vals.clone();
    if add_self_loops {
        for i in 0..n {
            rows.push(i);
            cols.push(i);
            vals.push(1.0);
        }
    }
    let mut degree = vec![0.0f64; n];
    for (&r, &v) in rows.iter().zip(vals.iter()) {
        degree[r] += v;
    }
    let inv_sqrt: Vec<f64> =
        degree.iter().map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 }).collect();
    for ((r, c), v) in rows.iter().zip(cols.iter()).zip(vals.iter_mut()) {
        *v *= inv_sqrt[*r] * inv_sqrt[*c];
    }
    SparseAdjacency::new(n, rows, cols, vals, a.symmetric)
}
