//! Wall-time scaling of pre-training against growing synthetic targets.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{generate_er, Graph};
use crate::signals::{BackboneKind, StudentSpec};
use crate::trainer::{pretrain, TrainConfig};

/// Scalability harness parameters. Target graphs are Erdos-Renyi with
/// `p = edge_density / n`, so the expected degree stays constant while `n`
/// grows; level sizes and batch sizes are fixed across sizes so the
/// per-episode cost is dominated by the level-0 dense operations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalabilityConfig {
    pub target_sizes: Vec<usize>,
    /// `p * n`, the expected average degree of the ER targets.
    pub edge_density: f64,
    /// Numbers of granularity levels to measure.
    pub levels_list: Vec<usize>,
    pub episodes: usize,
    pub feature_dim: usize,
    pub seed: u64,
}

impl Default for ScalabilityConfig {
    fn default() -> Self {
        ScalabilityConfig {
            target_sizes: vec![500, 1000, 2000, 4000],
            edge_density: 10.0,
            levels_list: vec![3],
            episodes: 100,
            feature_dim: 8,
            seed: 0,
        }
    }
}

/// One (levels, size) measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalabilityCell {
    pub levels: usize,
    pub num_nodes: usize,
    pub seconds: Option<f64>,
    pub error: Option<String>,
}

/// All cells plus the fitted log-log growth exponent per level count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalabilityTable {
    pub cells: Vec<ScalabilityCell>,
    /// (levels, slope); slope is absent with fewer than two finished cells.
    pub slopes: Vec<(usize, Option<f64>)>,
}

/// Fixed desk-scale level sizes for `l` coarsening steps.
pub fn scal_level_sizes(l: usize) -> Vec<usize> {
    (0..l).map(|i| 32usize >> i).map(|s| s.max(2)).collect()
}

fn scal_train_config(levels: usize, episodes: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        level_sizes: scal_level_sizes(levels),
        episodes_max: episodes,
        batch_attr: 32,
        batch_edge: 32,
        student: StudentSpec { kind: BackboneKind::Gcn, widths: vec![8, 8] },
        seed,
        patience: 0,
        ..TrainConfig::default()
    }
}

/// Trains `episodes` episodes against ER targets of each size and fits the
/// least-squares slope of `ln(seconds)` vs `ln(n)` per level count. A
/// failed cell is recorded and skipped by the fit rather than aborting the
/// run.
pub fn scalability_run(source: &Graph, cfg: &ScalabilityConfig) -> Result<ScalabilityTable> {
    if cfg.target_sizes.is_empty() {
        return Err(Error::Param("target_sizes must be non-empty".into()));
    }
    if cfg.target_sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Param("target_sizes must be strictly ascending".into()));
    }
    if cfg.edge_density <= 0.0 {
        return Err(Error::Param("edge_density must be positive".into()));
    }
    let mut cells = Vec::new();
    let mut slopes = Vec::new();
    for &levels in &cfg.levels_list {
        let mut points = Vec::new();
        for &n in &cfg.target_sizes {
            let p = (cfg.edge_density / n as f64).min(1.0);
            let cell = (|| -> Result<f64> {
                let target = generate_er(n, p, cfg.feature_dim, cfg.seed ^ (n as u64))?;
                let tcfg = scal_train_config(levels, cfg.episodes, cfg.seed);
                let start = Instant::now();
                pretrain(&[source.clone()], &target, &tcfg)?;
                Ok(start.elapsed().as_secs_f64())
            })();
            match cell {
                Ok(seconds) => {
                    points.push((n as f64, seconds));
                    cells.push(ScalabilityCell {
                        levels,
                        num_nodes: n,
                        seconds: Some(seconds),
                        error: None,
                    });
                }
                Err(e) => {
                    log::warn!("scalability cell (L={levels}, n={n}) failed: {e}");
                    cells.push(ScalabilityCell {
                        levels,
                        num_nodes: n,
                        seconds: None,
                        error: Some(e.to_string()),
                    });
                }
            }
        }
        slopes.push((levels, loglog_slope(&points)));
    }
    Ok(ScalabilityTable { cells, slopes })
}

/// Least-squares slope of ln(y) against ln(x).
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let cov: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let var: f64 = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Some(cov / var)
}
