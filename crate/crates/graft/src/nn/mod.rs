//! Differentiable building blocks: parameter trees, adjacency handling,
//! graph convolution and attention layers, MLPs, and gradient checking.

mod gradcheck;
mod layers;
mod params;
mod sparse;

pub use gradcheck::grad_check;
pub use layers::{
    gat_attention, gat_forward, gat_layer, gcn_forward, gcn_layer, mlp, mlp_forward,
    normalize_dense, normalize_dense_on_tape, GatParams, Nonlinearity,
};
pub use params::{bind_params, BoundParams, ParamTree};
pub use sparse::{normalize_adjacency, SparseAdjacency};

/// Dense real matrix used for features and coarse-level adjacencies.
pub type DenseMatrix = ndarray::Array2<f64>;

use rand::Rng;
use rand_chacha::ChaCha20Rng;

/// Uniform fan-in initialization: entries drawn from
/// U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
pub fn init_linear(rows: usize, cols: usize, rng: &mut ChaCha20Rng) -> DenseMatrix {
    let bound = 1.0 / (rows as f64).sqrt();
    let mut m = DenseMatrix::zeros((rows, cols));
    for v in m.iter_mut() {
        *v = rng.gen_range(-bound..bound);
    }
    m
}
