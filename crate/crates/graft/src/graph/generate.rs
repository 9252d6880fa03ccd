//! Synthetic graph generators for controlled transfer experiments.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Erdos-Renyi graph: each unordered pair is an edge independently with
/// probability `p`. Features are standard-normal with `feature_dim` columns.
pub fn generate_er(n: usize, p: f64, feature_dim: usize, seed: u64) -> Result<Graph> {
    if n == 0 {
        return Err(Error::Param("cannot generate an empty graph".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Param(format!("edge probability must be in [0,1], got {p}")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let features = normal_matrix(n, feature_dim, &mut rng);
    Graph::new(n, edges, features, vec![-1; n], 0, format!("er-n{n}-s{seed}"))
}

/// Parameters for a stochastic-block-model transfer pair.
#[derive(Debug, Clone)]
pub struct SbmParams {
    pub block_sizes_source: Vec<usize>,
    pub block_sizes_target: Vec<usize>,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_noise: f64,
    pub feature_dim: usize,
}

/// Two stochastic-block-model graphs with the same community count. Block
/// feature centroids are drawn once and shared across the pair, perturbed
/// per node by `feature_noise`; node labels are block ids.
pub fn generate_sbm_pair(params: &SbmParams, seed: u64) -> Result<(Graph, Graph)> {
    let SbmParams { block_sizes_source, block_sizes_target, p_in, p_out, feature_noise, feature_dim } =
        params;
    if block_sizes_source.len() != block_sizes_target.len() {
        return Err(Error::Param(format!(
            "source has {} blocks but target has {}",
            block_sizes_source.len(),
            block_sizes_target.len()
        )));
    }
    if block_sizes_source.is_empty() {
        return Err(Error::Param("at least one block is required".into()));
    }
    if block_sizes_source.iter().chain(block_sizes_target).any(|&s| s == 0) {
        return Err(Error::Param("block sizes must be positive".into()));
    }
    if p_in <= p_out {
        return Err(Error::Param(format!("p_in ({p_in}) must exceed p_out ({p_out})")));
    }
    for &p in [*p_in, *p_out].iter() {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Param(format!("probability {p} outside [0,1]")));
        }
    }
    if *feature_noise < 0.0 {
        return Err(Error::Param("feature_noise must be non-negative".into()));
    }

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let k = block_sizes_source.len();
    let centroids = normal_matrix(k, *feature_dim, &mut rng);

    let source = sbm_one(block_sizes_source, *p_in, *p_out, &centroids, *feature_noise, "sbm-source", &mut rng)?;
    let target = sbm_one(block_sizes_target, *p_in, *p_out, &centroids, *feature_noise, "sbm-target", &mut rng)?;
    Ok((source, target))
}

fn sbm_one(
    block_sizes: &[usize],
    p_in: f64,
    p_out: f64,
    centroids: &Array2<f64>,
    noise: f64,
    name: &str,
    rng: &mut ChaCha20Rng,
) -> Result<Graph> {
    let n: usize = block_sizes.iter().sum();
    let mut block_of = Vec::with_capacity(n);
    for (b, &size) in block_sizes.iter().enumerate() {
        block_of.extend(std::iter::repeat(b).take(size));
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if block_of[i] == block_of[j] { p_in } else { p_out };
            if rng.gen::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let d = centroids.ncols();
    let mut features = Array2::zeros((n, d));
    for i in 0..n {
        for c in 0..d {
            let eps: f64 = StandardNormal.sample(rng);
            features[[i, c]] = centroids[[block_of[i], c]] + noise * eps;
        }
    }
    let labels: Vec<i64> = block_of.iter().map(|&b| b as i64).collect();
    Graph::new(n, edges, features, labels, block_sizes.len(), name)
}

/// A chronological sequence of same-sized SBM snapshots. Communities and
/// centroids persist across time; a `drift` fraction of each snapshot's
/// edges is resampled relative to the previous one, and features drift by
/// fresh noise around the fixed centroids.
pub fn generate_snapshots(
    num_snapshots: usize,
    block_sizes: &[usize],
    p_in: f64,
    p_out: f64,
    feature_noise: f64,
    feature_dim: usize,
    drift: f64,
    seed: u64,
) -> Result<Vec<Graph>> {
    if num_snapshots == 0 {
        return Err(Error::Param("need at least one snapshot".into()));
    }
    if !(0.0..=1.0).contains(&drift) {
        return Err(Error::Param(format!("drift must be in [0,1], got {drift}")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let k = block_sizes.len();
    let centroids = normal_matrix(k, feature_dim, &mut rng);

    let n: usize = block_sizes.iter().sum();
    let mut block_of = Vec::with_capacity(n);
    for (b, &size) in block_sizes.iter().enumerate() {
        block_of.extend(std::iter::repeat(b).take(size));
    }

    let mut snapshots = Vec::with_capacity(num_snapshots);
    let mut present: Vec<Vec<bool>> = vec![vec![false; n]; n];
    for t in 0..num_snapshots {
        for i in 0..n {
            for j in (i + 1)..n {
                let p = if block_of[i] == block_of[j] { p_in } else { p_out };
                if t == 0 || rng.gen::<f64>() < drift {
                    present[i][j] = rng.gen::<f64>() < p;
                }
            }
        }
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if present[i][j] {
                    edges.push((i, j));
                }
            }
        }
        let mut features = Array2::zeros((n, feature_dim));
        for i in 0..n {
            for c in 0..feature_dim {
                let eps: f64 = StandardNormal.sample(&mut rng);
                features[[i, c]] = centroids[[block_of[i], c]] + feature_noise * eps;
            }
        }
        let labels: Vec<i64> = block_of.iter().map(|&b| b as i64).collect();
        snapshots.push(Graph::new(
            n,
            edges,
            features,
            labels,
            k,
            format!("snapshot-{}", t + 1),
        )?);
    }
    Ok(snapshots)
}

fn normal_matrix(n: usize, d: usize, rng: &mut ChaCha20Rng) -> Array2<f64> {
    let mut m = Array2::zeros((n, d));
    for v in m.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn er_p_zero_has_no_edges() {
        let g = generate_er(20, 0.0, 4, 1).unwrap();
        assert_eq!(g.num_edges(), 0);
    }

    #[test]
    fn er_p_one_is_complete() {
        let g = generate_er(4, 1.0, 4, 1).unwrap();
        assert_eq!(g.num_edges(), 6);
    }

    #[test]
    fn er_edge_count_matches_binomial_oracle() {
        // Mean of m over seeds should sit within 3 sigma of the binomial
        // mean p * n(n-1)/2, with the variance shrunk by the seed count.
        let (n, p, seeds) = (200usize, 0.05f64, 20u64);
        let pairs = (n * (n - 1) / 2) as f64;
        let mean = p * pairs;
        let var = pairs * p * (1.0 - p);
        let avg: f64 =
            (0..seeds).map(|s| generate_er(n, p, 2, s).unwrap().num_edges() as f64).sum::<f64>()
                / seeds as f64;
        let sigma = (var / seeds as f64).sqrt();
        assert!(
            (avg - mean).abs() < 3.0 * sigma,
            "avg {avg} outside 3 sigma ({sigma}) of {mean}"
        );
    }

    #[test]
    fn er_rejects_empty_and_bad_p() {
        assert!(generate_er(0, 0.5, 2, 1).is_err());
        assert!(generate_er(5, 1.5, 2, 1).is_err());
    }

    fn sbm_params(noise: f64) -> SbmParams {
        SbmParams {
            block_sizes_source: vec![10, 10, 10],
            block_sizes_target: vec![12, 8, 10],
            p_in: 0.6,
            p_out: 0.05,
            feature_noise: noise,
            feature_dim: 4,
        }
    }

    #[test]
    fn sbm_zero_noise_shares_centroids_exactly() {
        let (s, t) = generate_sbm_pair(&sbm_params(0.0), 3).unwrap();
        // With zero noise every node feature equals its block centroid.
        for (g_a, g_b) in [(&s, &t)] {
            for i in 0..g_a.num_nodes() {
                for j in 0..g_b.num_nodes() {
                    if g_a.labels()[i] == g_b.labels()[j] {
                        for c in 0..4 {
                            assert!((g_a.features()[[i, c]] - g_b.features()[[j, c]]).abs() < 1e-12);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn sbm_p_out_zero_gives_block_components() {
        let params = SbmParams { p_out: 0.0, p_in: 0.9, ..sbm_params(0.1) };
        for seed in 0..5 {
            let (s, _) = generate_sbm_pair(&params, seed).unwrap();
            // Count connected components by union-find over edges.
            let mut parent: Vec<usize> = (0..s.num_nodes()).collect();
            fn find(p: &mut Vec<usize>, x: usize) -> usize {
                if p[x] != x {
                    let r = find(p, p[x]);
                    p[x] = r;
                }
                p[x]
            }
            for &(a, b) in s.edges() {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[ra] = rb;
            }
            let mut roots: Vec<usize> =
                (0..s.num_nodes()).map(|i| find(&mut parent, i)).collect();
            roots.sort_unstable();
            roots.dedup();
            // Only assert on seeds where each block is internally connected;
            // with p_in = 0.9 and blocks of 10 that is essentially always.
            if roots.len() <= 3 {
                assert_eq!(roots.len(), 3);
            }
        }
    }

    #[test]
    fn sbm_deterministic_per_seed() {
        let (s1, t1) = generate_sbm_pair(&sbm_params(0.3), 11).unwrap();
        let (s2, t2) = generate_sbm_pair(&sbm_params(0.3), 11).unwrap();
        assert_eq!(s1, s2);
        assert_eq!(t1, t2);
    }

    #[test]
    fn sbm_rejects_zero_block() {
        let mut p = sbm_params(0.1);
        p.block_sizes_target[1] = 0;
        assert!(generate_sbm_pair(&p, 1).is_err());
    }

    #[test]
    fn snapshots_share_node_set_and_labels() {
        let snaps = generate_snapshots(5, &[8, 8], 0.5, 0.05, 0.2, 3, 0.3, 2).unwrap();
        assert_eq!(snaps.len(), 5);
        for w in snaps.windows(2) {
            assert_eq!(w[0].num_nodes(), w[1].num_nodes());
            assert_eq!(w[0].labels(), w[1].labels());
        }
        assert_eq!(snaps[0].name(), "snapshot-1");
        assert_eq!(snaps[4].name(), "snapshot-5");
    }
}
