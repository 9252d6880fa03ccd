//! Directory bundle format for graphs.
//!
//! A bundle is a directory holding `meta.json`, `edges.csv`, `nodes.csv`,
//! and either `features.csv` or `features.bin` (float32 little-endian,
//! row-major, exactly `num_nodes * feature_dim * 4` bytes).

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    num_nodes: usize,
    feature_dim: usize,
    num_classes: usize,
    feature_file: String,
    name: String,
}

/// Reads and validates a graph bundle.
///
/// Directed duplicates such as `0,1` and `1,0` are rejected; edge rows are
/// otherwise accepted in either orientation and symmetrized, with the number
/// of flipped rows logged.
pub fn load_graph_bundle(path: impl AsRef<Path>) -> Result<Graph> {
    let dir = path.as_ref();
    let meta_path = dir.join("meta.json");
    let meta_raw = fs::read_to_string(&meta_path)
        .map_err(|_| Error::Format(format!("missing or unreadable {}", meta_path.display())))?;
    let meta: Meta = serde_json::from_str(&meta_raw)
        .map_err(|e| Error::Format(format!("bad meta.json in {}: {e}", dir.display())))?;

    let edges = read_edges(&dir.join("edges.csv"))?;
    let labels = read_nodes(&dir.join("nodes.csv"), meta.num_nodes)?;
    let features = match meta.feature_file.as_str() {
        "features.csv" => read_features_csv(&dir.join("features.csv"), meta.num_nodes, meta.feature_dim)?,
        "features.bin" => read_features_bin(&dir.join("features.bin"), meta.num_nodes, meta.feature_dim)?,
        other => {
            return Err(Error::Format(format!(
                "meta.json feature_file must be features.csv or features.bin, got {other:?}"
            )))
        }
    };

    Graph::new(meta.num_nodes, edges, features, labels, meta.num_classes, meta.name)
}

/// Writes a bundle readable by [`load_graph_bundle`]. Features are stored as
/// CSV with round-trip decimal formatting, so save-then-load is identity.
pub fn save_graph_bundle(g: &Graph, path: impl AsRef<Path>) -> Result<()> {
    let dir = path.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let meta = Meta {
        num_nodes: g.num_nodes(),
        feature_dim: g.feature_dim(),
        num_classes: g.num_classes(),
        feature_file: "features.csv".into(),
        name: g.name().to_string(),
    };
    let meta_path = dir.join("meta.json");
    let mut meta_json = serde_json::to_string_pretty(&meta).expect("meta serializes");
    meta_json.push('\n');
    fs::write(&meta_path, meta_json).map_err(|e| Error::io(&meta_path, e))?;

    let edges_path = dir.join("edges.csv");
    let mut buf = String::from("src,dst\n");
    for &(a, b) in g.edges() {
        buf.push_str(&format!("{a},{b}\n"));
    }
    fs::write(&edges_path, buf).map_err(|e| Error::io(&edges_path, e))?;

    let nodes_path = dir.join("nodes.csv");
    let mut buf = String::from("node_id,label\n");
    for (i, &l) in g.labels().iter().enumerate() {
        buf.push_str(&format!("{i},{l}\n"));
    }
    fs::write(&nodes_path, buf).map_err(|e| Error::io(&nodes_path, e))?;

    let feat_path = dir.join("features.csv");
    let mut out = Vec::new();
    for row in g.features().rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{}", line.join(",")).expect("write to Vec");
    }
    fs::write(&feat_path, out).map_err(|e| Error::io(&feat_path, e))?;
    Ok(())
}

fn read_edges(path: &Path) -> Result<Vec<(usize, usize)>> {
    let raw = fs::read_to_string(path)
        .map_err(|_| Error::Format(format!("missing or unreadable {}", path.display())))?;
    let mut lines = raw.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "src,dst" => {}
        _ => return Err(Error::Format(format!("{}: expected header \"src,dst\"", path.display()))),
    }
    let mut edges = Vec::new();
    let mut flipped = 0usize;
    for (idx, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let (a, b) = line
            .split_once(',')
            .ok_or_else(|| Error::Format(format!("{}:{lineno}: expected src,dst", path.display())))?;
        let a: usize = a.trim().parse().map_err(|_| {
            Error::Format(format!("{}:{lineno}: bad node id {a:?}", path.display()))
        })?;
        let b: usize = b.trim().parse().map_err(|_| {
            Error::Format(format!("{}:{lineno}: bad node id {b:?}", path.display()))
        })?;
        if a == b {
            return Err(Error::Integrity(format!(
                "{}:{lineno}: self-loop at node {a}",
                path.display()
            )));
        }
        if a > b {
            flipped += 1;
        }
        edges.push((a, b));
    }
    // Duplicate detection happens here so the error can carry line numbers.
    let mut seen = std::collections::HashMap::new();
    for (i, &(a, b)) in edges.iter().enumerate() {
        let key = (a.min(b), a.max(b));
        if let Some(first) = seen.insert(key, i + 2) {
            return Err(Error::Integrity(format!(
                "{}: duplicate edge ({},{}) on lines {} and {}",
                path.display(),
                key.0,
                key.1,
                first,
                i + 2
            )));
        }
    }
    if flipped > 0 {
        log::info!("{}: symmetrized {flipped} reversed edge rows", path.display());
    }
    Ok(edges)
}

fn read_nodes(path: &Path, num_nodes: usize) -> Result<Vec<i64>> {
    let raw = fs::read_to_string(path)
        .map_err(|_| Error::Format(format!("missing or unreadable {}", path.display())))?;
    let mut lines = raw.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "node_id,label" => {}
        _ => {
            return Err(Error::Format(format!(
                "{}: expected header \"node_id,label\"",
                path.display()
            )))
        }
    }
    let mut labels = vec![i64::MIN; num_nodes];
    for (idx, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let (id, label) = line.split_once(',').ok_or_else(|| {
            Error::Format(format!("{}:{lineno}: expected node_id,label", path.display()))
        })?;
        let id: usize = id.trim().parse().map_err(|_| {
            Error::Format(format!("{}:{lineno}: bad node id {id:?}", path.display()))
        })?;
        let label: i64 = label.trim().parse().map_err(|_| {
            Error::Format(format!("{}:{lineno}: bad label {label:?}", path.display()))
        })?;
        if id >= num_nodes {
            return Err(Error::Integrity(format!(
                "{}:{lineno}: node id {id} >= num_nodes {num_nodes}",
                path.display()
            )));
        }
        if labels[id] != i64::MIN {
            return Err(Error::Integrity(format!(
                "{}:{lineno}: node {id} listed twice",
                path.display()
            )));
        }
        labels[id] = label;
    }
    if let Some(missing) = labels.iter().position(|&l| l == i64::MIN) {
        return Err(Error::Integrity(format!(
            "{}: node {missing} has no row",
            path.display()
        )));
    }
    Ok(labels)
}

fn read_features_csv(path: &Path, n: usize, d: usize) -> Result<ndarray::Array2<f64>> {
    let raw = fs::read_to_string(path)
        .map_err(|_| Error::Format(format!("missing or unreadable {}", path.display())))?;
    let mut data = Vec::with_capacity(n * d);
    let mut rows = 0usize;
    for (idx, line) in raw.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        rows += 1;
        let mut cols = 0usize;
        for v in line.split(',') {
            let v: f64 = v.trim().parse().map_err(|_| {
                Error::Format(format!("{}:{}: bad value {v:?}", path.display(), idx + 1))
            })?;
            data.push(v);
            cols += 1;
        }
        if cols != d {
            return Err(Error::Integrity(format!(
                "{}:{}: expected {d} columns, found {cols}",
                path.display(),
                idx + 1
            )));
        }
    }
    if rows != n {
        return Err(Error::Integrity(format!(
            "{}: expected {n} feature rows, found {rows}",
            path.display()
        )));
    }
    ndarray::Array2::from_shape_vec((n, d), data)
        .map_err(|e| Error::Integrity(format!("{}: {e}", path.display())))
}

fn read_features_bin(path: &Path, n: usize, d: usize) -> Result<ndarray::Array2<f64>> {
    let raw =
        fs::read(path).map_err(|_| Error::Format(format!("missing or unreadable {}", path.display())))?;
    let expected = n * d * 4;
    if raw.len() != expected {
        return Err(Error::Integrity(format!(
            "{}: expected {expected} bytes ({n} x {d} float32), found {}",
            path.display(),
            raw.len()
        )));
    }
    let data: Vec<f64> = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    ndarray::Array2::from_shape_vec((n, d), data)
        .map_err(|e| Error::Integrity(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;
    use tempfile::tempdir;

    fn toy() -> Graph {
        Graph::new(
            3,
            vec![(0, 1), (1, 2)],
            arr2(&[[1.0, 2.0, 3.0, 4.0], [0.5, -0.25, 0.0, 1.0], [9.0, 8.0, 7.0, 6.0]]),
            vec![0, 1, -1],
            2,
            "toy",
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_identity() {
        let dir = tempdir().unwrap();
        let g = toy();
        save_graph_bundle(&g, dir.path()).unwrap();
        let back = load_graph_bundle(dir.path()).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn direct_read_back() {
        let dir = tempdir().unwrap();
        save_graph_bundle(&toy(), dir.path()).unwrap();
        let g = load_graph_bundle(dir.path()).unwrap();
        assert_eq!(g.num_nodes(), 3);
        assert_eq!(g.num_edges(), 2);
        assert_eq!(g.features().dim(), (3, 4));
    }

    #[test]
    fn empty_edge_graph_writes_header_only() {
        let dir = tempdir().unwrap();
        let g = Graph::new(5, vec![], ndarray::Array2::zeros((5, 2)), vec![-1; 5], 0, "e").unwrap();
        save_graph_bundle(&g, dir.path()).unwrap();
        let edges = fs::read_to_string(dir.path().join("edges.csv")).unwrap();
        assert_eq!(edges, "src,dst\n");
        assert_eq!(load_graph_bundle(dir.path()).unwrap(), g);
    }

    #[test]
    fn all_unlabeled_round_trips_sentinel() {
        let dir = tempdir().unwrap();
        let g = Graph::new(4, vec![(0, 1)], ndarray::Array2::zeros((4, 1)), vec![-1; 4], 0, "u")
            .unwrap();
        save_graph_bundle(&g, dir.path()).unwrap();
        let nodes = fs::read_to_string(dir.path().join("nodes.csv")).unwrap();
        for line in nodes.lines().skip(1) {
            assert!(line.ends_with(",-1"));
        }
    }

    #[test]
    fn missing_file_is_format_error() {
        let dir = tempdir().unwrap();
        let err = load_graph_bundle(dir.path()).unwrap_err();
        assert!(matches!(err, Error::Format(_)));
    }

    #[test]
    fn truncated_bin_is_integrity_error() {
        let dir = tempdir().unwrap();
        let g = toy();
        save_graph_bundle(&g, dir.path()).unwrap();
        // Rewrite the meta to point at a bin file of the wrong length.
        let meta = r#"{"num_nodes":3,"feature_dim":4,"num_classes":2,"feature_file":"features.bin","name":"toy"}"#;
        fs::write(dir.path().join("meta.json"), meta).unwrap();
        fs::write(dir.path().join("features.bin"), vec![0u8; 3 * 4 * 4 - 1]).unwrap();
        let err = load_graph_bundle(dir.path()).unwrap_err();
        assert!(matches!(err, Error::Integrity(_)), "{err}");
    }

    #[test]
    fn bin_features_load() {
        let dir = tempdir().unwrap();
        let g = toy();
        save_graph_bundle(&g, dir.path()).unwrap();
        let meta = r#"{"num_nodes":3,"feature_dim":4,"num_classes":2,"feature_file":"features.bin","name":"toy"}"#;
        fs::write(dir.path().join("meta.json"), meta).unwrap();
        let mut bytes = Vec::new();
        for v in g.features().iter() {
            bytes.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        fs::write(dir.path().join("features.bin"), bytes).unwrap();
        let back = load_graph_bundle(dir.path()).unwrap();
        assert_eq!(back.features().dim(), (3, 4));
        assert!((back.features()[[1, 1]] - (-0.25)).abs() < 1e-7);
    }

    #[test]
    fn duplicate_edge_error_carries_line_numbers() {
        let dir = tempdir().unwrap();
        save_graph_bundle(&toy(), dir.path()).unwrap();
        fs::write(dir.path().join("edges.csv"), "src,dst\n0,1\n1,0\n").unwrap();
        let err = load_graph_bundle(dir.path()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("lines 2 and 3"), "{msg}");
    }
}
