//! Layer primitives and finite-difference gradient verification.
//!
//! ```sh
//! cargo run --example gradient_check
//! ```

use graft::graph::generate_er;
use graft::nn::{
    gat_forward, gcn_forward, grad_check, init_linear, normalize_adjacency, normalize_dense,
    GatParams, Nonlinearity, ParamTree, SparseAdjacency,
};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn main() -> graft::Result<()> {
    let g = generate_er(10, 0.3, 4, 5)?;
    let adj = SparseAdjacency::from_graph(&g);
    let a_norm = normalize_adjacency(&adj, true)?.to_dense();
    let x = g.features().clone();
    let mut rng = ChaCha20Rng::seed_from_u64(2);

    let mut p = ParamTree::new();
    p.insert("w", init_linear(4, 3, &mut rng));
    p.insert("b", init_linear(1, 3, &mut rng));
    let err = grad_check(
        |t, bound| {
            let a = t.constant(a_norm.clone());
            let xv = t.constant(x.clone());
            let h = gcn_forward(
                t,
                a,
                xv,
                bound.var("w").unwrap(),
                bound.var_opt("b"),
                Nonlinearity::LeakyRelu { slope: 0.2 },
            );
            let sq = t.mul(h, h);
            t.sum_all(sq)
        },
        &p,
        1e-5,
    )?;
    println!("gcn layer: max relative gradient error {err:.3e}");

    let mut p = ParamTree::new();
    p.insert("w", init_linear(4, 5, &mut rng));
    p.insert("a_l", init_linear(5, 1, &mut rng));
    p.insert("a_r", init_linear(5, 1, &mut rng));
    let mask = {
        let mut m = normalize_dense(&g.dense_adjacency(), true);
        m.mapv_inplace(|v| if v > 0.0 { 1.0 } else { 0.0 });
        m
    };
    let err = grad_check(
        |t, bound| {
            let gp = GatParams::from_bound(bound, "").unwrap();
            let xv = t.constant(x.clone());
            let h = gat_forward(t, &mask, xv, &gp, Nonlinearity::LeakyRelu { slope: 0.2 });
            let sq = t.mul(h, h);
            t.sum_all(sq)
        },
        &p,
        1e-5,
    )?;
    println!("gat layer: max relative gradient error {err:.3e}");
    Ok(())
}
