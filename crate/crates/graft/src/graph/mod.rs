//! Graph data model, on-disk bundles, splits, and synthetic generators.

mod bundle;
mod generate;
mod split;

pub use bundle::{load_graph_bundle, save_graph_bundle};
pub use generate::{generate_er, generate_sbm_pair, generate_snapshots, SbmParams};
pub use split::{make_split, Split};

use std::collections::HashSet;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Label value marking an unlabeled node.
pub const UNLABELED: i64 = -1;

/// An undirected, unweighted attributed graph.
///
/// Edges are stored as unordered pairs with `src < dst`, sorted, without
/// self-loops or duplicates. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    num_nodes: usize,
    edges: Vec<(usize, usize)>,
    features: Array2<f64>,
    labels: Vec<i64>,
    num_classes: usize,
    name: String,
}

impl Graph {
    /// Validates and builds a graph. Edge pairs may arrive in either
    /// orientation; they are normalized to `src < dst`.
    pub fn new(
        num_nodes: usize,
        edges: Vec<(usize, usize)>,
        features: Array2<f64>,
        labels: Vec<i64>,
        num_classes: usize,
        name: impl Into<String>,
    ) -> Result<Self> {
        if num_nodes == 0 {
            return Err(Error::Param("graph must have at least one node".into()));
        }
        if features.nrows() != num_nodes {
            return Err(Error::Integrity(format!(
                "feature matrix has {} rows but the graph has {} nodes",
                features.nrows(),
                num_nodes
            )));
        }
        if labels.len() != num_nodes {
            return Err(Error::Integrity(format!(
                "label vector has {} entries but the graph has {} nodes",
                labels.len(),
                num_nodes
            )));
        }
        for (i, &l) in labels.iter().enumerate() {
            if l != UNLABELED && (l < 0 || l as usize >= num_classes) {
                return Err(Error::Integrity(format!(
                    "node {i} has label {l}, outside 0..{num_classes}"
                )));
            }
        }
        let mut norm = Vec::with_capacity(edges.len());
        let mut seen = HashSet::with_capacity(edges.len());
        for (a, b) in edges {
            if a == b {
                return Err(Error::Integrity(format!("self-loop at node {a}")));
            }
            if a >= num_nodes || b >= num_nodes {
                return Err(Error::Integrity(format!(
                    "edge ({a},{b}) has an endpoint >= {num_nodes}"
                )));
            }
            let e = (a.min(b), a.max(b));
            if !seen.insert(e) {
                return Err(Error::Integrity(format!("duplicate edge ({},{})", e.0, e.1)));
            }
            norm.push(e);
        }
        norm.sort_unstable();
        if !features.iter().all(|v| v.is_finite()) {
            return Err(Error::Numerical("non-finite feature entry".into()));
        }
        Ok(Graph {
            num_nodes,
            edges: norm,
            features,
            labels,
            num_classes,
            name: name.into(),
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Sorted unordered edge pairs, each with `src < dst`.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Ids of nodes carrying a label.
    pub fn labeled_nodes(&self) -> Vec<usize> {
        (0..self.num_nodes).filter(|&i| self.labels[i] != UNLABELED).collect()
    }

    /// Dense symmetric 0/1 adjacency.
    pub fn dense_adjacency(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.num_nodes, self.num_nodes));
        for &(i, j) in &self.edges {
            a[[i, j]] = 1.0;
            a[[j, i]] = 1.0;
        }
        a
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        let e = (a.min(b), a.max(b));
        self.edges.binary_search(&e).is_ok()
    }
}
