//! Domain-discrepancy estimation and the re-weighted bound check.
//!
//! The discrepancy between two embedding sets is proxied by how well a
//! held-out linear classifier separates them: `2 * (1 - 2 * err)` clamped
//! to [0, 2]. Indistinguishable domains score near 0, perfectly separable
//! ones near 2. The bound check verifies that a weight-averaged
//! discrepancy never exceeds the worst per-group discrepancy.

use ndarray::Array2;
use rand::{seq::SliceRandom, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Estimated domain discrepancy between two embedding samples, in [0, 2].
pub fn proxy_discrepancy(x_a: &Array2<f64>, x_b: &Array2<f64>, seed: u64) -> Result<f64> {
    if x_a.nrows() < 2 || x_b.nrows() < 2 {
        return Err(Error::Param("each domain needs at least two samples".into()));
    }
    if x_a.ncols() != x_b.ncols() {
        return Err(Error::Shape(format!(
            "embedding widths differ: {} vs {}",
            x_a.ncols(),
            x_b.ncols()
        )));
    }
    let d = x_a.ncols();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);

    // Split each domain in half: train on one half, test on the other.
    let split = |x: &Array2<f64>, rng: &mut ChaCha20Rng| {
        let mut ids: Vec<usize> = (0..x.nrows()).collect();
        ids.shuffle(rng);
        let half = x.nrows() / 2;
        (ids[..half].to_vec(), ids[half..].to_vec())
    };
    let (a_train, a_test) = split(x_a, &mut rng);
    let (b_train, b_test) = split(x_b, &mut rng);

    // Standardize by the training pool statistics.
    let mut mean = vec![0.0f64; d];
    let mut count = 0usize;
    for (&i, x) in a_train.iter().map(|i| (i, x_a)).chain(b_train.iter().map(|i| (i, x_b))) {
        for c in 0..d {
            mean[c] += x[[i, c]];
        }
        count += 1;
    }
    for m in mean.iter_mut() {
        *m /= count as f64;
    }
    let mut var = vec![0.0f64; d];
    for (&i, x) in a_train.iter().map(|i| (i, x_a)).chain(b_train.iter().map(|i| (i, x_b))) {
        for c in 0..d {
            let v = x[[i, c]] - mean[c];
            var[c] += v * v;
        }
    }
    let std: Vec<f64> =
        var.iter().map(|&v| (v / count as f64).sqrt().max(1e-9)).collect();

    let featurize = |x: &Array2<f64>, i: usize| -> Vec<f64> {
        (0..d).map(|c| (x[[i, c]] - mean[c]) / std[c]).collect()
    };

    // Logistic regression by full-batch gradient descent.
    let mut w = vec![0.0f64; d + 1];
    let train: Vec<(Vec<f64>, f64)> = a_train
        .iter()
        .map(|&i| (featurize(x_a, i), 0.0))
        .chain(b_train.iter().map(|&i| (featurize(x_b, i), 1.0)))
        .collect();
    let lr = 0.5;
    for _ in 0..400 {
        let mut grad = vec![0.0f64; d + 1];
        for (f, y) in &train {
            let z: f64 = w[d] + f.iter().zip(&w[..d]).map(|(a, b)| a * b).sum::<f64>();
            let p = 1.0 / (1.0 + (-z).exp());
            let e = p - y;
            for c in 0..d {
                grad[c] += e * f[c];
            }
            grad[d] += e;
        }
        for (wc, gc) in w.iter_mut().zip(grad.iter()) {
            *wc -= lr * gc / train.len() as f64;
        }
    }

    let mut errors = 0usize;
    let mut total = 0usize;
    for (ids, x, y) in [(&a_test, x_a, 0.0f64), (&b_test, x_b, 1.0f64)] {
        for &i in ids.iter() {
            let f = featurize(x, i);
            let z: f64 = w[d] + f.iter().zip(&w[..d]).map(|(a, b)| a * b).sum::<f64>();
            let pred = if z > 0.0 { 1.0 } else { 0.0 };
            if pred != y {
                errors += 1;
            }
            total += 1;
        }
    }
    let err = errors as f64 / total as f64;
    Ok((2.0 * (1.0 - 2.0 * err)).clamp(0.0, 2.0))
}

/// Per-signal-group discrepancies combined under normalized weights,
/// against the worst single group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub discrepancies: Vec<f64>,
    pub normalized_weights: Vec<f64>,
    pub weighted_term: f64,
    pub worst_term: f64,
}

/// Normalizes the group weights onto the simplex and checks that the
/// weighted discrepancy never exceeds the maximum one.
pub fn bound_check(weights: &[f64], discrepancies: &[f64]) -> Result<BoundReport> {
    if weights.len() != discrepancies.len() {
        return Err(Error::Shape(format!(
            "{} weights for {} discrepancy groups",
            weights.len(),
            discrepancies.len()
        )));
    }
    if weights.is_empty() {
        return Err(Error::Param("no discrepancy groups".into()));
    }
    if weights.iter().any(|&w| w < 0.0) {
        return Err(Error::Param("weights must be non-negative".into()));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::Param("weights must not all be zero".into()));
    }
    let normalized: Vec<f64> = weights.iter().map(|&w| w / total).collect();
    let weighted_term: f64 =
        normalized.iter().zip(discrepancies.iter()).map(|(w, d)| w * d).sum();
    let worst_term = discrepancies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(BoundReport {
        discrepancies: discrepancies.to_vec(),
        normalized_weights: normalized,
        weighted_term,
        worst_term,
    })
}
