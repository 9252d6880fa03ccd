//! Bit-exact checkpointing of the training state.
//!
//! A checkpoint directory holds `manifest.json` (shapes, dtype, config
//! hash, RNG position, curriculum, history) plus raw little-endian `f64`
//! tensor files in manifest order: `params.bin` and the optimizer moments
//! `opt_m.bin`/`opt_v.bin`. Loading refuses a manifest whose config hash
//! does not match the current run configuration.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::curriculum::CurriculumState;
use crate::error::{Error, Result};
use crate::nn::ParamTree;
use crate::trainer::{AdamState, EpisodeMetrics, TrainState};

#[derive(Debug, Serialize, Deserialize)]
struct TensorInfo {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct RngInfo {
    seed: String,
    word_pos: String,
    stream: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    version: u32,
    dtype: String,
    config_hash: String,
    episode: usize,
    curriculum: CurriculumState,
    teacher_lambda: (f64, f64),
    rng: RngInfo,
    num_sources: usize,
    source_dims: Vec<usize>,
    target_dim: usize,
    tensors: Vec<TensorInfo>,
    opt_tensors: Vec<TensorInfo>,
    opt_steps: BTreeMap<String, u64>,
    history: Vec<EpisodeMetrics>,
}

fn write_tensors<'a>(
    path: &Path,
    tensors: impl Iterator<Item = &'a Array2<f64>>,
) -> Result<()> {
    let mut bytes = Vec::new();
    for t in tensors {
        for v in t.iter() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_tensors(path: &Path, infos: &[TensorInfo]) -> Result<Vec<(String, Array2<f64>)>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let expected: usize = infos.iter().map(|i| i.rows * i.cols * 8).sum();
    if bytes.len() != expected {
        return Err(Error::Integrity(format!(
            "{}: expected {expected} bytes, found {}",
            path.display(),
            bytes.len()
        )));
    }
    let mut out = Vec::with_capacity(infos.len());
    let mut offset = 0usize;
    for info in infos {
        let count = info.rows * info.cols;
        let data: Vec<f64> = bytes[offset..offset + count * 8]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        offset += count * 8;
        let arr = Array2::from_shape_vec((info.rows, info.cols), data)
            .map_err(|e| Error::Integrity(format!("{}: {e}", path.display())))?;
        out.push((info.name.clone(), arr));
    }
    Ok(out)
}

pub fn save_checkpoint(state: &TrainState, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let tensors: Vec<TensorInfo> = state
        .params
        .leaves()
        .map(|(n, t)| TensorInfo { name: n.to_string(), rows: t.nrows(), cols: t.ncols() })
        .collect();
    write_tensors(&dir.join("params.bin"), state.params.leaves().map(|(_, t)| t))?;

    let opt_tensors: Vec<TensorInfo> = state
        .opt
        .m
        .iter()
        .map(|(n, t)| TensorInfo { name: n.clone(), rows: t.nrows(), cols: t.ncols() })
        .collect();
    write_tensors(&dir.join("opt_m.bin"), state.opt.m.values())?;
    write_tensors(&dir.join("opt_v.bin"), state.opt.v.values())?;

    let seed_hex: String = state.rng.get_seed().iter().map(|b| format!("{b:02x}")).collect();
    let manifest = Manifest {
        version: 1,
        dtype: "f64".to_string(),
        config_hash: state.config_hash.clone(),
        episode: state.episode,
        curriculum: state.curriculum.clone(),
        teacher_lambda: state.teacher_lambda,
        rng: RngInfo {
            seed: seed_hex,
            word_pos: state.rng.get_word_pos().to_string(),
            stream: state.rng.get_stream(),
        },
        num_sources: state.num_sources,
        source_dims: state.source_dims.clone(),
        target_dim: state.target_dim,
        tensors,
        opt_tensors,
        opt_steps: state.opt.steps.clone(),
        history: state.history.clone(),
    };
    let path = dir.join("manifest.json");
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    fs::write(&path, json).map_err(|e| Error::io(&path, e))
}

/// Restores a [`TrainState`] bit-exactly. `expected_config_hash` must match
/// the hash recorded at save time; a mismatch is refused.
pub fn load_checkpoint(dir: impl AsRef<Path>, expected_config_hash: &str) -> Result<TrainState> {
    let dir = dir.as_ref();
    let path = dir.join("manifest.json");
    let raw = fs::read_to_string(&path)
        .map_err(|_| Error::Format(format!("missing or unreadable {}", path.display())))?;
    let manifest: Manifest = serde_json::from_str(&raw)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    if manifest.config_hash != expected_config_hash {
        return Err(Error::Config(format!(
            "checkpoint config hash {} does not match the run configuration hash {}",
            manifest.config_hash, expected_config_hash
        )));
    }
    if manifest.dtype != "f64" {
        return Err(Error::Format(format!("unsupported tensor dtype {:?}", manifest.dtype)));
    }

    let mut params = ParamTree::new();
    for (name, tensor) in read_tensors(&dir.join("params.bin"), &manifest.tensors)? {
        params.insert(name, tensor);
    }
    let mut opt = AdamState::new();
    for (name, tensor) in read_tensors(&dir.join("opt_m.bin"), &manifest.opt_tensors)? {
        opt.m.insert(name, tensor);
    }
    for (name, tensor) in read_tensors(&dir.join("opt_v.bin"), &manifest.opt_tensors)? {
        opt.v.insert(name, tensor);
    }
    opt.steps = manifest.opt_steps;

    let seed_bytes = hex_to_bytes(&manifest.rng.seed)?;
    let mut rng = ChaCha20Rng::from_seed(seed_bytes);
    rng.set_stream(manifest.rng.stream);
    let word_pos: u128 = manifest
        .rng
        .word_pos
        .parse()
        .map_err(|_| Error::Format("bad rng word_pos in manifest".into()))?;
    rng.set_word_pos(word_pos);

    Ok(TrainState {
        params,
        opt,
        curriculum: manifest.curriculum,
        teacher_lambda: manifest.teacher_lambda,
        episode: manifest.episode,
        rng,
        history: manifest.history,
        config_hash: manifest.config_hash,
        num_sources: manifest.num_sources,
        source_dims: manifest.source_dims,
        target_dim: manifest.target_dim,
    })
}

fn hex_to_bytes(hex: &str) -> Result<[u8; 32]> {
    if hex.len() != 64 {
        return Err(Error::Format("rng seed must be 32 hex bytes".into()));
    }
    let mut out = [0u8; 32];
    for (i, chunk) in hex.as_bytes().chunks_exact(2).enumerate() {
        let s = std::str::from_utf8(chunk).map_err(|_| Error::Format("bad hex".into()))?;
        out[i] = u8::from_str_radix(s, 16).map_err(|_| Error::Format("bad hex".into()))?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_sbm_pair, SbmParams};
    use crate::signals::{BackboneKind, StudentSpec};
    use crate::trainer::{init_state, pretrain, resume_pretrain, GraphConsts, TrainConfig};
    use tempfile::tempdir;

    fn pair_and_cfg(episodes: usize) -> (crate::graph::Graph, crate::graph::Graph, TrainConfig) {
        let params = SbmParams {
            block_sizes_source: vec![6, 6],
            block_sizes_target: vec![5, 5],
            p_in: 0.7,
            p_out: 0.1,
            feature_noise: 0.3,
            feature_dim: 3,
        };
        let (s, t) = generate_sbm_pair(&params, 41).unwrap();
        let cfg = TrainConfig {
            level_sizes: vec![4, 2],
            episodes_max: episodes,
            batch_attr: 4,
            batch_edge: 4,
            student: StudentSpec { kind: BackboneKind::Gcn, widths: vec![5, 3] },
            seed: 13,
            ..TrainConfig::default()
        };
        (s, t, cfg)
    }

    #[test]
    fn save_load_round_trip_is_bit_exact() {
        let (s, t, cfg) = pair_and_cfg(5);
        let (state, _) = pretrain(&[s], &t, &cfg).unwrap();
        let dir = tempdir().unwrap();
        save_checkpoint(&state, dir.path()).unwrap();
        let loaded = load_checkpoint(dir.path(), &cfg.hash()).unwrap();
        assert_eq!(state.params, loaded.params);
        assert_eq!(state.opt.m, loaded.opt.m);
        assert_eq!(state.opt.v, loaded.opt.v);
        assert_eq!(state.opt.steps, loaded.opt.steps);
        assert_eq!(state.episode, loaded.episode);
        assert_eq!(state.curriculum, loaded.curriculum);
        assert_eq!(state.rng, loaded.rng);
        assert_eq!(state.history.len(), loaded.history.len());
    }

    #[test]
    fn altered_config_hash_is_refused() {
        let (s, t, cfg) = pair_and_cfg(2);
        let (state, _) = pretrain(&[s], &t, &cfg).unwrap();
        let dir = tempdir().unwrap();
        save_checkpoint(&state, dir.path()).unwrap();
        let other = TrainConfig { learning_rate: 0.001, ..cfg };
        let err = load_checkpoint(dir.path(), &other.hash()).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn resume_equals_uninterrupted_run() {
        let (s, t, cfg_short) = pair_and_cfg(6);
        let cfg_full = TrainConfig { episodes_max: 12, ..cfg_short.clone() };

        // Uninterrupted 12 episodes. The checkpointed run trains 6 under
        // the full config, saves, reloads, and finishes the remaining 6.
        let (full, _) = pretrain(&[s.clone()], &t, &cfg_full).unwrap();

        let half_cfg = TrainConfig { episodes_max: 6, ..cfg_full.clone() };
        let state0 = init_state(&[s.clone()], &t, &cfg_full).unwrap();
        let graphs = GraphConsts::new(&[s.clone()], &t);
        let (half, _) = resume_pretrain(state0, &graphs, &half_cfg, None).unwrap();
        let dir = tempdir().unwrap();
        // Persist under the full config's hash so the resume accepts it.
        let mut half_for_save = half;
        half_for_save.config_hash = cfg_full.hash();
        save_checkpoint(&half_for_save, dir.path()).unwrap();

        let restored = load_checkpoint(dir.path(), &cfg_full.hash()).unwrap();
        let (resumed, _) = resume_pretrain(restored, &graphs, &cfg_full, None).unwrap();

        let a = full.history.last().unwrap();
        let b = resumed.history.last().unwrap();
        assert!((a.weighted_loss - b.weighted_loss).abs() < 1e-9);
        assert!((a.recon_loss - b.recon_loss).abs() < 1e-9);
        assert_eq!(full.episode, resumed.episode);
    }
}
