use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Train/validation/test node ids over the labeled part of a graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    /// False when a class was too small and the split fell back to
    /// unstratified sampling.
    pub stratified: bool,
}

impl Split {
    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Partitions the labeled nodes by the given fractions, stratified per class
/// when every class has at least as many labeled nodes as there are non-zero
/// parts. Deterministic for a fixed seed.
pub fn make_split(g: &Graph, ratios: (f64, f64, f64), seed: u64) -> Result<Split> {
    let (rt, rv, rs) = ratios;
    if rt < 0.0 || rv < 0.0 || rs < 0.0 {
        return Err(Error::Param("split ratios must be non-negative".into()));
    }
    if (rt + rv + rs - 1.0).abs() > 1e-9 {
        return Err(Error::Param(format!(
            "split ratios must sum to 1, got {}",
            rt + rv + rs
        )));
    }
    let labeled = g.labeled_nodes();
    if labeled.is_empty() {
        return Err(Error::Param("graph has no labeled nodes to split".into()));
    }
    let parts = [rt, rv, rs];
    let nonzero_parts = parts.iter().filter(|&&r| r > 0.0).count();

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); g.num_classes().max(1)];
    for &id in &labeled {
        by_class[g.labels()[id] as usize].push(id);
    }
    by_class.retain(|c| !c.is_empty());

    let stratified = by_class.iter().all(|c| c.len() >= nonzero_parts);
    let groups: Vec<Vec<usize>> = if stratified {
        by_class
    } else {
        log::warn!(
            "a class has fewer labeled nodes than split parts; falling back to unstratified"
        );
        vec![labeled.clone()]
    };

    let mut split = Split { train: Vec::new(), val: Vec::new(), test: Vec::new(), stratified };
    for mut group in groups {
        group.shuffle(&mut rng);
        let counts = largest_remainder(group.len(), &parts, nonzero_parts);
        let (a, b) = (counts[0], counts[0] + counts[1]);
        split.train.extend_from_slice(&group[..a]);
        split.val.extend_from_slice(&group[a..b]);
        split.test.extend_from_slice(&group[b..]);
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

/// Integer apportionment of `n` into three parts proportional to `ratios`,
/// summing exactly to `n`, with every non-zero part granted at least one
/// element when `n` permits.
fn largest_remainder(n: usize, ratios: &[f64; 3], nonzero_parts: usize) -> [usize; 3] {
    let mut counts = [0usize; 3];
    let mut rem: Vec<(f64, usize)> = Vec::new();
    let mut assigned = 0usize;
    for (i, &r) in ratios.iter().enumerate() {
        let exact = r * n as f64;
        counts[i] = exact.floor() as usize;
        assigned += counts[i];
        rem.push((exact - exact.floor(), i));
    }
    rem.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    for k in 0..(n - assigned) {
        counts[rem[k % 3].1] += 1;
    }
    // Keep non-zero parts non-empty when there are enough elements.
    if n >= nonzero_parts {
        loop {
            let Some(short) = (0..3).find(|&i| ratios[i] > 0.0 && counts[i] == 0) else { break };
            let donor = (0..3).max_by_key(|&i| counts[i]).unwrap();
            counts[donor] -= 1;
            counts[short] += 1;
        }
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::UNLABELED;
    use ndarray::Array2;
    use std::collections::HashSet;

    fn labeled_graph(per_class: &[usize]) -> Graph {
        let n: usize = per_class.iter().sum();
        let mut labels = Vec::new();
        for (c, &k) in per_class.iter().enumerate() {
            labels.extend(std::iter::repeat(c as i64).take(k));
        }
        Graph::new(n, vec![], Array2::zeros((n, 2)), labels, per_class.len(), "t").unwrap()
    }

    #[test]
    fn paper_ratio_sizes() {
        let g = labeled_graph(&[25, 25, 25, 25]);
        let s = make_split(&g, (0.04, 0.16, 0.80), 7).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (4, 16, 80));
        assert!(s.stratified);
    }

    #[test]
    fn degenerate_ratio_puts_all_in_train() {
        let g = labeled_graph(&[10, 10]);
        let s = make_split(&g, (1.0, 0.0, 0.0), 3).unwrap();
        assert_eq!(s.train.len(), 20);
        assert!(s.val.is_empty() && s.test.is_empty());
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let g = labeled_graph(&[30, 20, 10]);
        let a = make_split(&g, (0.2, 0.3, 0.5), 42).unwrap();
        let b = make_split(&g, (0.2, 0.3, 0.5), 42).unwrap();
        assert_eq!(a, b);
        let c = make_split(&g, (0.2, 0.3, 0.5), 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn partitions_labeled_nodes_exactly_once() {
        let g = labeled_graph(&[17, 23, 9]);
        let s = make_split(&g, (0.3, 0.3, 0.4), 5).unwrap();
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        let uniq: HashSet<usize> = all.iter().copied().collect();
        assert_eq!(all.len(), 49);
        assert_eq!(uniq.len(), 49);
        assert_eq!(all, g.labeled_nodes());
    }

    #[test]
    fn tiny_class_falls_back_unstratified() {
        let g = labeled_graph(&[2, 40]);
        let s = make_split(&g, (0.2, 0.3, 0.5), 1).unwrap();
        assert!(!s.stratified);
        assert_eq!(s.len(), 42);
        assert!(!s.train.is_empty() && !s.val.is_empty() && !s.test.is_empty());
    }

    #[test]
    fn ignores_unlabeled_nodes() {
        let mut labels = vec![0i64; 10];
        labels.extend(vec![-1i64; 5]);
        labels.extend(vec![1i64; 10]);
        let g = Graph::new(25, vec![], Array2::zeros((25, 1)), labels, 2, "t").unwrap();
        let s = make_split(&g, (0.5, 0.25, 0.25), 9).unwrap();
        assert_eq!(s.len(), 20);
        assert!(s.train.iter().all(|&i| g.labels()[i] != UNLABELED));
    }
}
