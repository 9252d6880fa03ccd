//! Wall-time growth against target size (a desk-scale probe; the full
//! sweep lives in the acceptance suite).
//!
//! ```sh
//! cargo run --release --example scalability
//! ```

use graft::eval::{scalability_run, ScalabilityConfig};
use graft::graph::generate_er;

fn main() -> graft::Result<()> {
    let source = generate_er(200, 0.05, 8, 1)?;
    let cfg = ScalabilityConfig {
        target_sizes: vec![250, 500, 1000],
        edge_density: 10.0,
        levels_list: vec![2, 3],
        episodes: 20,
        feature_dim: 8,
        seed: 1,
    };
    let table = scalability_run(&source, &cfg)?;
    println!("{:>3} {:>6} {:>10}", "L", "nodes", "seconds");
    for c in &table.cells {
        match c.seconds {
            Some(s) => println!("{:>3} {:>6} {:>10.3}", c.levels, c.num_nodes, s),
            None => println!("{:>3} {:>6} {:>10}", c.levels, c.num_nodes, "failed"),
        }
    }
    for (l, slope) in &table.slopes {
        match slope {
            Some(s) => println!("L={l}: fitted log-log slope {s:.3}"),
            None => println!("L={l}: slope not applicable"),
        }
    }
    Ok(())
}
