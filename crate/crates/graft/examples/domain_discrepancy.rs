//! Proxy domain discrepancy between embedding sets, and the re-weighted
//! generalization-bound check: a weighted average of per-group
//! discrepancies never exceeds the worst group.
//!
//! ```sh
//! cargo run --example domain_discrepancy
//! ```

use graft::eval::{bound_check, proxy_discrepancy};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

fn cloud(n: usize, d: usize, shift: f64, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut x = Array2::zeros((n, d));
    for v in x.iter_mut() {
        let e: f64 = StandardNormal.sample(&mut rng);
        *v = e + shift;
    }
    x
}

fn main() -> graft::Result<()> {
    let base = cloud(300, 6, 0.0, 1);
    for shift in [0.0, 0.5, 1.0, 2.0, 6.0] {
        let other = cloud(300, 6, shift, 2);
        let d = proxy_discrepancy(&base, &other, 0)?;
        println!("mean shift {shift:>3}: estimated discrepancy {d:.3}");
    }

    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let discrepancies: Vec<f64> = (0..6).map(|_| rng.gen_range(0.0..2.0)).collect();
    let weights: Vec<f64> = (0..6).map(|_| rng.gen_range(0.0..1.0)).collect();
    let report = bound_check(&weights, &discrepancies)?;
    println!(
        "\nbound check over 6 signal groups: weighted {:.3} <= worst {:.3}",
        report.weighted_term, report.worst_term
    );
    Ok(())
}
