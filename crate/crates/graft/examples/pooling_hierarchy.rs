//! Multi-scale pooling: soft assignments, coarse graphs, and the
//! translate/decode path between two graphs.
//!
//! ```sh
//! cargo run --example pooling_hierarchy
//! ```

use graft::coder::{build_target_hierarchy, decode, encode, reconstruction_loss, translate, CoderParams};
use graft::graph::{generate_sbm_pair, SbmParams};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn main() -> graft::Result<()> {
    let params = SbmParams {
        block_sizes_source: vec![30, 30],
        block_sizes_target: vec![25, 25],
        p_in: 0.2,
        p_out: 0.03,
        feature_noise: 0.4,
        feature_dim: 6,
    };
    let (source, target) = generate_sbm_pair(&params, 11)?;
    let level_sizes = vec![12, 4];
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let coder = CoderParams::init(6, 6, &level_sizes, &mut rng);

    let src_h = encode(&source, &coder, &level_sizes)?;
    src_h.validate()?;
    println!("source hierarchy levels: {:?}", src_h.level_sizes());
    for (l, p) in src_h.assigns.iter().enumerate() {
        let worst = p
            .rows()
            .into_iter()
            .map(|r| (r.sum() - 1.0).abs())
            .fold(0.0f64, f64::max);
        println!("  assigns[{l}]: {:?}, max |row sum - 1| = {worst:.2e}", p.dim());
    }
    let (fine_a, _) = &src_h.levels[0];
    let (coarse_a, _) = &src_h.levels[1];
    println!(
        "adjacency mass conserved: {:.6} -> {:.6}",
        fine_a.sum(),
        coarse_a.sum()
    );

    let tgt_h = build_target_hierarchy(&target, &coder, &level_sizes)?;
    let translated = translate(&src_h.levels.last().unwrap().1, &coder)?;
    let recon = decode(&translated, &tgt_h, &coder)?;
    let loss = reconstruction_loss(&recon, &tgt_h)?;
    println!(
        "decoded {} levels back to {} target nodes; initial reconstruction mse {loss:.4}",
        recon.len(),
        recon[0].nrows()
    );
    Ok(())
}
