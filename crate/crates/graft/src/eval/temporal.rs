//! Temporal snapshot pairing and the reconstruction case study.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::trainer::TrainConfig;

/// Chronological (source, target) snapshot pairs with the last pair held
/// out for testing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalPairs {
    /// Indices into the snapshot list: consecutive (i, i+1) pairs used for
    /// training, chronological order.
    pub training: Vec<(usize, usize)>,
    /// The held-out final pair.
    pub heldout: (usize, usize),
    /// Names of the paired snapshots, `(source, target)` per pair.
    pub names: Vec<(String, String)>,
    /// True when only one pair exists, leaving the training set empty.
    pub training_empty: bool,
}

/// Forms consecutive snapshot pairs in chronological order, reserving the
/// last pair for testing.
pub fn temporal_pairs(snapshots: &[Graph]) -> Result<TemporalPairs> {
    if snapshots.len() < 2 {
        return Err(Error::Param(format!(
            "need at least 2 snapshots, got {}",
            snapshots.len()
        )));
    }
    let pairs: Vec<(usize, usize)> = (0..snapshots.len() - 1).map(|i| (i, i + 1)).collect();
    let heldout = *pairs.last().unwrap();
    let training: Vec<(usize, usize)> = pairs[..pairs.len() - 1].to_vec();
    let names = pairs
        .iter()
        .map(|&(a, b)| (snapshots[a].name().to_string(), snapshots[b].name().to_string()))
        .collect();
    let training_empty = training.is_empty();
    if training_empty {
        log::warn!("only one snapshot pair; the training set is empty");
    }
    Ok(TemporalPairs { training, heldout, names, training_empty })
}

/// Artifacts of a reconstruction-mode run.
#[derive(Debug, Clone)]
pub struct TemporalArtifacts {
    pub pairs: TemporalPairs,
    /// Generated embedding of the final snapshot (level 0).
    pub generated: Array2<f64>,
    /// 2-D projection of the generated embedding.
    pub generated_2d: Array2<f64>,
    /// 2-D projection of the ground-truth final-snapshot features.
    pub truth_2d: Array2<f64>,
    pub labels: Vec<i64>,
}

/// Trains on the chronological training pairs (carrying the learned
/// parameters across pairs), then reconstructs the held-out final snapshot
/// from its predecessor and projects both the generated embedding and the
/// ground truth to 2-D. When `out_dir` is given, the projections are also
/// written as CSV plus SVG scatter plots.
pub fn run_temporal(
    snapshots: &[Graph],
    cfg: &TrainConfig,
    out_dir: Option<&Path>,
) -> Result<TemporalArtifacts> {
    let pairs = temporal_pairs(snapshots)?;
    let mut carried: Option<crate::nn::ParamTree> = None;
    for &(a, b) in &pairs.training {
        let mut tcfg = cfg.clone();
        tcfg.seed = cfg.seed ^ (a as u64).wrapping_mul(0x9e37_79b9);
        let source = snapshots[a].clone();
        let target = snapshots[b].clone();
        let mut state = crate::trainer::init_state(&[source.clone()], &target, &tcfg)?;
        if let Some(prev) = carried.take() {
            state.params = prev;
        }
        let graphs = crate::trainer::GraphConsts::new(&[source], &target);
        let (state, _) = crate::trainer::resume_pretrain(state, &graphs, &tcfg, None)?;
        carried = Some(state.params);
    }

    // Reconstruct the held-out snapshot from its predecessor. With an
    // empty training set this runs one fresh pre-training on the held-out
    // pair itself (flagged above).
    let (a, b) = pairs.heldout;
    let source = snapshots[a].clone();
    let target = snapshots[b].clone();
    let mut tcfg = cfg.clone();
    tcfg.seed = cfg.seed ^ 0x5bd1_e995;
    let mut state = crate::trainer::init_state(&[source.clone()], &target, &tcfg)?;
    if let Some(prev) = carried {
        state.params = prev;
    }
    let generated =
        crate::eval::finetune::reconstruct_target(&state, &[source], &target, &tcfg)?;
    let generated_2d = crate::eval::report::pca_2d(&generated);
    let truth_2d = crate::eval::report::pca_2d(target.features());

    let artifacts = TemporalArtifacts {
        pairs,
        generated,
        generated_2d,
        truth_2d,
        labels: target.labels().to_vec(),
    };
    if let Some(dir) = out_dir {
        write_artifacts(&artifacts, dir)?;
    }
    Ok(artifacts)
}

fn write_artifacts(artifacts: &TemporalArtifacts, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write_proj = |name: &str, proj: &Array2<f64>| -> Result<()> {
        let mut csv = String::from("node_id,x,y,label\n");
        for i in 0..proj.nrows() {
            csv.push_str(&format!(
                "{i},{},{},{}\n",
                proj[[i, 0]],
                proj[[i, 1]],
                artifacts.labels[i]
            ));
        }
        let path = dir.join(format!("{name}.csv"));
        std::fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
        let svg = crate::eval::report::scatter_svg(proj, &artifacts.labels, name);
        let path = dir.join(format!("{name}.svg"));
        std::fs::write(&path, svg).map_err(|e| Error::io(&path, e))
    };
    write_proj("generated_projection", &artifacts.generated_2d)?;
    write_proj("truth_projection", &artifacts.truth_2d)?;
    let pairs_json = serde_json::to_string_pretty(&artifacts.pairs).expect("pairs serialize");
    let path = dir.join("pairs.json");
    std::fs::write(&path, pairs_json + "\n").map_err(|e| Error::io(&path, e))
}
