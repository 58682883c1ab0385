//! Gain-ratio decision tree used as the task classifier.
//!
//! Splits are binary thresholds on one feature: `x[f] < θ` goes left. Candidate
//! thresholds are midpoints between consecutive distinct values of the
//! feature among the node's samples. The split with the highest gain ratio
//! wins; ties go to the lowest feature index, then the smallest threshold.

use alloc::boxed::Box;
use alloc::vec::Vec;

use thiserror::Error;

/// Two gain ratios closer than this are treated as tied.
pub const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("empty label set")]
    Empty,
    #[error("partition is not a cover of the parent labels")]
    NotACover,
    #[error("partition has fewer than two non-empty parts")]
    DegeneratePartition,
    #[error("{inputs} inputs but {labels} labels")]
    LengthMismatch { inputs: usize, labels: usize },
    #[error("input {index} has length {found}, expected {expected}")]
    DimensionMismatch { index: usize, expected: usize, found: usize },
}

/// Shannon entropy in bits of the label distribution.
pub fn entropy(labels: &[usize]) -> Result<f64, TreeError> {
    if labels.is_empty() {
        return Err(TreeError::Empty);
    }
    Ok(entropy_counts(&counts_of(labels), labels.len()))
}

fn counts_of(labels: &[usize]) -> Vec<usize> {
    let max = labels.iter().copied().max().unwrap_or(0);
    let mut counts = alloc::vec![0usize; max + 1];
    for &l in labels {
        counts[l] += 1;
    }
    counts
}

fn entropy_counts(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    let mut h = 0.0;
    for &c in counts {
        if c > 0 {
            let p = c as f64 / n;
            h -= p * libm::log2(p);
        }
    }
    h
}

/// Gain ratio of splitting `parent` into `parts`.
pub fn gain_ratio<P: AsRef<[usize]>>(parent: &[usize], parts: &[P]) -> Result<f64, TreeError> {
    if parent.is_empty() {
        return Err(TreeError::Empty);
    }
    let mut merged: Vec<usize> = parts.iter().flat_map(|p| p.as_ref().iter().copied()).collect();
    let mut sorted_parent = parent.to_vec();
    merged.sort_unstable();
    sorted_parent.sort_unstable();
    if merged != sorted_parent {
        return Err(TreeError::NotACover);
    }
    if parts.iter().filter(|p| !p.as_ref().is_empty()).count() < 2 {
        return Err(TreeError::DegeneratePartition);
    }
    let width = sorted_parent.last().copied().unwrap_or(0) + 1;
    let part_counts: Vec<(Vec<usize>, usize)> = parts
        .iter()
        .map(|p| {
            let mut c = alloc::vec![0usize; width];
            for &l in p.as_ref() {
                c[l] += 1;
            }
            (c, p.as_ref().len())
        })
        .collect();
    let mut parent_counts = alloc::vec![0usize; width];
    for &l in parent {
        parent_counts[l] += 1;
    }
    Ok(ratio_from_counts(&parent_counts, parent.len(), &part_counts))
}

fn ratio_from_counts(parent: &[usize], n: usize, parts: &[(Vec<usize>, usize)]) -> f64 {
    let total = n as f64;
    let mut gain = entropy_counts(parent, n);
    let mut split_info = 0.0;
    for (counts, m) in parts {
        if *m == 0 {
            continue;
        }
        let w = *m as f64 / total;
        gain -= w * entropy_counts(counts, *m);
        split_info -= w * libm::log2(w);
    }
    if gain <= TIE_EPS || split_info <= 0.0 {
        return 0.0;
    }
    gain / split_info
}

/// Binary-split gain ratio straight from class counts.
fn binary_ratio(parent: &[usize], n: usize, left: &[usize], nl: usize) -> (f64, f64) {
    let nr = n - nl;
    let total = n as f64;
    let (wl, wr) = (nl as f64 / total, nr as f64 / total);
    let mut hr = 0.0;
    let rtotal = nr as f64;
    for (&p, &l) in parent.iter().zip(left) {
        let r = p - l;
        if r > 0 {
            let q = r as f64 / rtotal;
            hr -= q * libm::log2(q);
        }
    }
    let gain = entropy_counts(parent, n) - wl * entropy_counts(left, nl) - wr * hr;
    let split_info = -wl * libm::log2(wl) - wr * libm::log2(wr);
    (gain, gain / split_info)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub gain_ratio: f64,
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m <= a {
        b
    } else {
        m
    }
}

/// Best threshold split over all features, or `None` when no split has
/// positive information gain.
pub fn best_split<X: AsRef<[f64]>>(xs: &[X], ys: &[usize]) -> Result<Option<Split>, TreeError> {
    check_inputs(xs, ys)?;
    if xs.len() < 2 {
        return Ok(None);
    }
    let presorted = presort(xs);
    let labels = dense_labels(ys);
    Ok(search(xs, &labels, &presorted, 1))
}

fn check_inputs<X: AsRef<[f64]>>(xs: &[X], ys: &[usize]) -> Result<usize, TreeError> {
    if xs.len() != ys.len() {
        return Err(TreeError::LengthMismatch { inputs: xs.len(), labels: ys.len() });
    }
    let Some(first) = xs.first() else {
        return Err(TreeError::Empty);
    };
    let dim = first.as_ref().len();
    for (index, x) in xs.iter().enumerate() {
        if x.as_ref().len() != dim {
            return Err(TreeError::DimensionMismatch { index, expected: dim, found: x.as_ref().len() });
        }
    }
    Ok(dim)
}

struct Labels {
    /// Per-sample class index into `ids`.
    class: Vec<usize>,
    ids: Vec<usize>,
}

fn dense_labels(ys: &[usize]) -> Labels {
    let mut ids = ys.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let class = ys.iter().map(|y| ids.binary_search(y).expect("id present")).collect();
    Labels { class, ids }
}

/// Per-feature sample orderings, ascending by value (stable by index).
fn presort<X: AsRef<[f64]>>(xs: &[X]) -> Vec<Vec<u32>> {
    let dim = xs[0].as_ref().len();
    (0..dim)
        .map(|f| {
            let mut order: Vec<u32> = (0..xs.len() as u32).collect();
            order.sort_by(|&a, &b| xs[a as usize].as_ref()[f].total_cmp(&xs[b as usize].as_ref()[f]));
            order
        })
        .collect()
}

fn search<X: AsRef<[f64]>>(xs: &[X], labels: &Labels, sorted: &[Vec<u32>], min_leaf: usize) -> Option<Split> {
    let n = sorted.first()?.len();
    let classes = labels.ids.len();
    let mut parent = alloc::vec![0usize; classes];
    for &i in &sorted[0] {
        parent[labels.class[i as usize]] += 1;
    }
    if parent.iter().filter(|&&c| c > 0).count() < 2 {
        return None;
    }
    let mut best: Option<Split> = None;
    let mut left = alloc::vec![0usize; classes];
    for (feature, order) in sorted.iter().enumerate() {
        left.iter_mut().for_each(|c| *c = 0);
        for pos in 0..n - 1 {
            let i = order[pos] as usize;
            left[labels.class[i]] += 1;
            let nl = pos + 1;
            if nl < min_leaf || n - nl < min_leaf {
                continue;
            }
            let a = xs[i].as_ref()[feature];
            let b = xs[order[pos + 1] as usize].as_ref()[feature];
            if a == b {
                continue;
            }
            let (gain, ratio) = binary_ratio(&parent, n, &left, nl);
            if gain <= TIE_EPS {
                continue;
            }
            if best.is_none_or(|s| ratio > s.gain_ratio + TIE_EPS) {
                best = Some(Split { feature, threshold: midpoint(a, b), gain_ratio: ratio });
            }
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum TreeNode {
    Leaf { id: usize },
    Split { feature: usize, threshold: f64, left: Box<TreeNode>, right: Box<TreeNode> },
}

impl TreeNode {
    pub fn node_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => 1 + left.node_count() + right.node_count(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    /// Every leaf id, in left-to-right order.
    pub fn leaf_ids(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = alloc::vec![self];
        while let Some(node) = stack.pop() {
            match node {
                TreeNode::Leaf { id } => out.push(*id),
                TreeNode::Split { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { max_depth: 12, min_samples_leaf: 5 }
    }
}

/// Maps an input vector to the id of the network that should answer it.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TaskClassifier {
    pub root: TreeNode,
    pub input_len: usize,
    pub params: TreeParams,
}

pub fn fit<X: AsRef<[f64]>>(xs: &[X], ys: &[usize], params: &TreeParams) -> Result<TaskClassifier, TreeError> {
    let input_len = check_inputs(xs, ys)?;
    let labels = dense_labels(ys);
    let sorted = presort(xs);
    let mut member = alloc::vec![false; xs.len()];
    let root = grow(xs, &labels, sorted, 0, params, &mut member);
    Ok(TaskClassifier { root, input_len, params: params.clone() })
}

fn majority(labels: &Labels, idx: &[u32]) -> usize {
    let mut counts = alloc::vec![0usize; labels.ids.len()];
    for &i in idx {
        counts[labels.class[i as usize]] += 1;
    }
    // ids are ascending, so the first maximum is the smallest id
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    labels.ids[best]
}

fn grow<X: AsRef<[f64]>>(
    xs: &[X],
    labels: &Labels,
    sorted: Vec<Vec<u32>>,
    depth: usize,
    params: &TreeParams,
    member: &mut [bool],
) -> TreeNode {
    let leaf = TreeNode::Leaf { id: majority(labels, &sorted[0]) };
    let n = sorted[0].len();
    let min_leaf = params.min_samples_leaf.max(1);
    if depth >= params.max_depth || n < 2 * min_leaf {
        return leaf;
    }
    let Some(split) = search(xs, labels, &sorted, min_leaf) else {
        return leaf;
    };

    for &i in &sorted[0] {
        member[i as usize] = xs[i as usize].as_ref()[split.feature] < split.threshold;
    }
    let mut lefts = Vec::with_capacity(sorted.len());
    let mut rights = Vec::with_capacity(sorted.len());
    for order in sorted {
        let (l, r): (Vec<u32>, Vec<u32>) = order.into_iter().partition(|&i| member[i as usize]);
        lefts.push(l);
        rights.push(r);
    }
    let left = grow(xs, labels, lefts, depth + 1, params, member);
    let right = grow(xs, labels, rights, depth + 1, params, member);
    TreeNode::Split { feature: split.feature, threshold: split.threshold, left: Box::new(left), right: Box::new(right) }
}

impl TaskClassifier {
    /// A classifier that sends everything to `id`.
    pub fn constant(id: usize, input_len: usize) -> Self {
        Self { root: TreeNode::Leaf { id }, input_len, params: TreeParams::default() }
    }

    pub fn classify(&self, x: &[f64]) -> Result<usize, TreeError> {
        if x.len() != self.input_len {
            return Err(TreeError::DimensionMismatch { index: 0, expected: self.input_len, found: x.len() });
        }
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { id } => return Ok(*id),
                TreeNode::Split { feature, threshold, left, right } => {
                    node = if x[*feature] < *threshold { left } else { right };
                }
            }
        }
    }
}

/// Free-function form of [`TaskClassifier::classify`].
pub fn classify(tc: &TaskClassifier, x: &[f64]) -> Result<usize, TreeError> {
    tc.classify(x)
}
