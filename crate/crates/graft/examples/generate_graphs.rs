//! Synthetic graph generation and the on-disk bundle format.
//!
//! ```sh
//! cargo run --example generate_graphs
//! ```

use graft::graph::{generate_er, generate_sbm_pair, load_graph_bundle, save_graph_bundle, SbmParams};

fn main() -> graft::Result<()> {
    let er = generate_er(200, 0.05, 8, 7)?;
    let pairs = 200.0 * 199.0 / 2.0;
    println!(
        "ER(n=200, p=0.05): {} edges (expected {:.0})",
        er.num_edges(),
        0.05 * pairs
    );

    let params = SbmParams {
        block_sizes_source: vec![60, 60, 60],
        block_sizes_target: vec![60, 60, 60],
        p_in: 0.15,
        p_out: 0.02,
        feature_noise: 0.5,
        feature_dim: 8,
    };
    let (source, target) = generate_sbm_pair(&params, 7)?;
    println!(
        "SBM pair: source {} nodes / {} edges, target {} nodes / {} edges, {} classes",
        source.num_nodes(),
        source.num_edges(),
        target.num_nodes(),
        target.num_edges(),
        source.num_classes()
    );

    let dir = std::env::temp_dir().join("graft-example-bundle");
    save_graph_bundle(&source, &dir)?;
    let back = load_graph_bundle(&dir)?;
    println!(
        "bundle round trip at {}: {}",
        dir.display(),
        if back == source { "identical" } else { "MISMATCH" }
    );
    Ok(())
}
