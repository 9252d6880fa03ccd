use std::collections::BTreeMap;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::tape::{Tape, Var};

/// A named hierarchy of real-valued tensors, addressed by dotted paths such
/// as `student.0.w`. Iteration order is the lexicographic path order, which
/// keeps optimizer updates and checkpoints deterministic.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamTree {
    tensors: BTreeMap<String, Array2<f64>>,
}

impl ParamTree {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Array2<f64>) {
        self.tensors.insert(name.into(), tensor);
    }

    pub fn get(&self, name: &str) -> Result<&Array2<f64>> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::Param(format!("missing parameter {name:?}")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Array2<f64>> {
        self.tensors
            .get_mut(name)
            .ok_or_else(|| Error::Param(format!("missing parameter {name:?}")))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tensors.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Leaves in deterministic (lexicographic) order.
    pub fn leaves(&self) -> impl Iterator<Item = (&str, &Array2<f64>)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn leaves_mut(&mut self) -> impl Iterator<Item = (&str, &mut Array2<f64>)> {
        self.tensors.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    /// Leaf names in deterministic order.
    pub fn names(&self) -> Vec<String> {
        self.tensors.keys().cloned().collect()
    }

    /// Copies every tensor of `other` under `prefix.`.
    pub fn merge_namespaced(&mut self, prefix: &str, other: &ParamTree) {
        for (k, v) in other.leaves() {
            self.insert(format!("{prefix}.{k}"), v.clone());
        }
    }

    /// Extracts the subtree under `prefix.`, with the prefix stripped.
    pub fn subtree(&self, prefix: &str) -> ParamTree {
        let mut out = ParamTree::new();
        let pat = format!("{prefix}.");
        for (k, v) in self.leaves() {
            if let Some(rest) = k.strip_prefix(&pat) {
                out.insert(rest, v.clone());
            }
        }
        out
    }

    pub fn all_finite(&self) -> bool {
        self.leaves().all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }

    /// Name of the first leaf containing a non-finite entry, if any.
    pub fn first_non_finite(&self) -> Option<String> {
        self.leaves()
            .find(|(_, t)| t.iter().any(|v| !v.is_finite()))
            .map(|(n, _)| n.to_string())
    }

    pub fn total_len(&self) -> usize {
        self.leaves().map(|(_, t)| t.len()).sum()
    }
}

/// Parameters bound onto a tape as gradient-accumulating leaves.
pub struct BoundParams {
    vars: BTreeMap<String, Var>,
}

impl BoundParams {
    pub fn var(&self, name: &str) -> Result<Var> {
        self.vars
            .get(name)
            .copied()
            .ok_or_else(|| Error::Param(format!("missing bound parameter {name:?}")))
    }

    pub fn var_opt(&self, name: &str) -> Option<Var> {
        self.vars.get(name).copied()
    }

    pub fn names(&self) -> Vec<String> {
        self.vars.keys().cloned().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Var)> {
        self.vars.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

/// Binds every leaf of `params` as a parameter node on `tape`.
pub fn bind_params(tape: &mut Tape, params: &ParamTree) -> BoundParams {
    let mut vars = BTreeMap::new();
    for (name, tensor) in params.leaves() {
        vars.insert(name.to_string(), tape.param(tensor.clone()));
    }
    BoundParams { vars }
}
