//! CART classification trees with weighted Gini impurity.
//!
//! Nodes live in a flat arena; internal nodes store child indices. A sample
//! goes left when `x[feature] <= threshold`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::FeatureDataset;
use crate::error::{Error, Result};

/// Relative tolerance under which two split impurities count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

/// `1 - sum(p_c^2)` for (possibly weighted) class counts.
pub fn gini_impurity(counts: &[f64]) -> Result<f64> {
    let total: f64 = counts.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::InvalidParam("gini impurity of an empty node".into()));
    }
    Ok(gini_unchecked(counts, total))
}

fn gini_unchecked(counts: &[f64], total: f64) -> f64 {
    1.0 - counts.iter().map(|&c| (c / total) * (c / total)).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        proba: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    nodes: Vec<Node>,
    max_depth: Option<usize>,
    n_features: usize,
    n_classes: usize,
}

/// Hyperparameters for [`fit_tree`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or unsplittable.
    pub max_depth: Option<usize>,
    /// Number of candidate features drawn per node; `None` uses all.
    pub feature_subset: Option<usize>,
    pub seed: u64,
}

impl TreeModel {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn max_depth(&self) -> Option<usize> {
        self.max_depth
    }

    /// Depth of the deepest leaf (0 for a single-leaf tree).
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    /// Leaf distribution for `x`.
    pub fn predict_proba(&self, x: &[f64]) -> Result<&[f64]> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: x.len(),
            });
        }
        Ok(self.leaf_for(x))
    }

    pub(crate) fn leaf_for(&self, x: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { proba } => return proba,
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        self.predict_proba(x).map(argmax)
    }
}

pub fn predict_tree(model: &TreeModel, x: &[f64]) -> Result<Vec<f64>> {
    model.predict_proba(x).map(<[f64]>::to_vec)
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

struct Candidate {
    impurity: f64,
    feature: usize,
    threshold: f64,
}

impl Candidate {
    /// Strictly better, treating near-equal impurities as ties decided by
    /// lower feature index, then lower threshold.
    fn beats(&self, other: &Candidate) -> bool {
        let scale = self.impurity.abs().max(other.impurity.abs()).max(1e-300);
        if (self.impurity - other.impurity).abs() <= TIE_TOLERANCE * scale {
            (self.feature, self.threshold) < (other.feature, other.threshold)
        } else {
            self.impurity < other.impurity
        }
    }
}

/// Midpoint between consecutive distinct values, kept strictly below `hi`.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid >= hi {
        lo
    } else {
        mid
    }
}

struct Builder<'a> {
    ds: &'a FeatureDataset,
    weights: &'a [f64],
    params: TreeParams,
    nodes: Vec<Node>,
    /// Reused (value, label, weight) buffer for sorting one feature.
    scratch: Vec<(f64, usize, f64)>,
}

impl Builder<'_> {
    fn class_weights(&self, rows: &[usize]) -> Vec<f64> {
        let mut counts = vec![0.0; self.ds.n_classes()];
        for &r in rows {
            counts[self.ds.label(r)] += self.weights[r];
        }
        counts
    }

    fn leaf(counts: &[f64]) -> Node {
        let total: f64 = counts.iter().sum();
        Node::Leaf {
            proba: counts.iter().map(|&c| c / total).collect(),
        }
    }

    /// Best split of `rows` on `feature`, by weighted child impurity.
    fn best_on_feature(
        &mut self,
        rows: &[usize],
        feature: usize,
        parent: &[f64],
        total: f64,
    ) -> Option<Candidate> {
        self.scratch.clear();
        self.scratch.extend(
            rows.iter()
                .map(|&r| (self.ds.row(r)[feature], self.ds.label(r), self.weights[r])),
        );
        self.scratch.sort_by(|a, b| a.0.total_cmp(&b.0));
        let first = self.scratch.first()?.0;
        let last = self.scratch.last()?.0;
        if first == last {
            return None;
        }
        let mut left = vec![0.0; parent.len()];
        let mut left_total = 0.0;
        let mut best: Option<Candidate> = None;
        for i in 0..self.scratch.len() - 1 {
            let (v, label, w) = self.scratch[i];
            left[label] += w;
            left_total += w;
            let next = self.scratch[i + 1].0;
            if next == v {
                continue;
            }
            let right: Vec<f64> = parent.iter().zip(&left).map(|(p, l)| p - l).collect();
            let right_total = total - left_total;
            let impurity = if right_total <= 0.0 || left_total <= 0.0 {
                continue;
            } else {
                (left_total * gini_unchecked(&left, left_total)
                    + right_total * gini_unchecked(&right, right_total))
                    / total
            };
            let cand = Candidate {
                impurity,
                feature,
                threshold: midpoint(v, next),
            };
            if best.as_ref().is_none_or(|b| cand.beats(b)) {
                best = Some(cand);
            }
        }
        best
    }

    /// Candidate features for a node: all of them, or a node-seeded shuffle
    /// consumed until `feature_subset` non-constant features were examined.
    fn find_split(&mut self, rows: &[usize], node_id: usize, parent: &[f64]) -> Option<Candidate> {
        let total: f64 = parent.iter().sum();
        let d = self.ds.n_features();
        let (order, quota) = match self.params.feature_subset {
            Some(m) if m < d => {
                let mut order: Vec<usize> = (0..d).collect();
                let node_seed = self
                    .params
                    .seed
                    .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                    .wrapping_add(node_id as u64);
                order.shuffle(&mut ChaCha8Rng::seed_from_u64(node_seed));
                (order, m.max(1))
            }
            _ => ((0..d).collect(), d),
        };
        let mut best: Option<Candidate> = None;
        let mut examined = 0;
        for f in order {
            if examined >= quota {
                break;
            }
            if let Some(cand) = self.best_on_feature(rows, f, parent, total) {
                examined += 1;
                if best.as_ref().is_none_or(|b| cand.beats(b)) {
                    best = Some(cand);
                }
            }
        }
        best
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let counts = self.class_weights(&rows);
        self.nodes.push(Self::leaf(&counts));
        let pure = counts.iter().filter(|&&c| c > 0.0).count() <= 1;
        let depth_capped = self.params.max_depth.is_some_and(|m| depth >= m);
        if pure || depth_capped {
            return id;
        }
        // Zero-gain splits are still taken: weighted Gini never rises under a
        // split, and refusing them would block parity-style structure.
        let Some(split) = self.find_split(&rows, id, &counts) else {
            return id;
        };
        let (l_rows, r_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&r| self.ds.row(r)[split.feature] <= split.threshold);
        let left = self.grow(l_rows, depth + 1);
        let right = self.grow(r_rows, depth + 1);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

/// Greedy top-down CART fit on weighted rows.
///
/// `weights = None` means unit weight per row. Rows with zero weight are
/// ignored when choosing splits and leaf distributions.
pub fn fit_tree(
    ds: &FeatureDataset,
    weights: Option<&[f64]>,
    params: TreeParams,
) -> Result<TreeModel> {
    if ds.is_empty() {
        return Err(Error::InvalidData("cannot fit a tree on an empty dataset".into()));
    }
    let uniform;
    let weights = match weights {
        Some(w) => {
            if w.len() != ds.n_rows() {
                return Err(Error::DimensionMismatch {
                    expected: ds.n_rows(),
                    got: w.len(),
                });
            }
            if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidParam("weights must be finite and non-negative".into()));
            }
            if w.iter().sum::<f64>() <= 0.0 {
                return Err(Error::InvalidParam("weights sum to zero".into()));
            }
            w
        }
        None => {
            uniform = vec![1.0; ds.n_rows()];
            &uniform
        }
    };
    if params.feature_subset == Some(0) {
        return Err(Error::InvalidParam("feature_subset must be at least 1".into()));
    }
    let rows: Vec<usize> = (0..ds.n_rows()).filter(|&r| weights[r] > 0.0).collect();
    let mut builder = Builder {
        ds,
        weights,
        params,
        nodes: Vec::new(),
        scratch: Vec::with_capacity(rows.len()),
    };
    builder.grow(rows, 0);
    Ok(TreeModel {
        nodes: builder.nodes,
        max_depth: params.max_depth,
        n_features: ds.n_features(),
        n_classes: ds.n_classes(),
    })
}

/// Fraction of weight on rows the tree predicts correctly.
pub fn weighted_accuracy(model: &TreeModel, ds: &FeatureDataset, weights: Option<&[f64]>) -> f64 {
    let mut hit = 0.0;
    let mut total = 0.0;
    for (i, row) in ds.rows().enumerate() {
        let w = weights.map_or(1.0, |w| w[i]);
        total += w;
        if argmax(model.leaf_for(row)) == ds.label(i) {
            hit += w;
        }
    }
    hit / total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(rows: &[&[f64]], labels: &[usize], k: usize) -> FeatureDataset {
        let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        let names = (0..k).map(|c| format!("c{c}")).collect();
        FeatureDataset::from_rows(&rows, labels.to_vec(), names).unwrap()
    }

    #[test]
    fn gini_values() {
        assert_eq!(gini_impurity(&[5.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(gini_impurity(&[2.0, 2.0]).unwrap(), 0.5);
        assert!((gini_impurity(&[3.0, 1.0]).unwrap() - 0.375).abs() < 1e-15);
        assert!(gini_impurity(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn pure_root_is_a_leaf() {
        let d = ds(&[&[0.0], &[1.0], &[2.0]], &[1, 1, 1], 2);
        let t = fit_tree(&d, None, TreeParams::default()).unwrap();
        assert_eq!(t.depth(), 0);
        assert_eq!(predict_tree(&t, &[42.0]).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn xor_needs_depth_two() {
        let d = ds(
            &[&[0.0, 0.0], &[1.0, 1.0], &[0.0, 1.0], &[1.0, 0.0]],
            &[0, 0, 1, 1],
            2,
        );
        let params = TreeParams {
            max_depth: Some(2),
            ..Default::default()
        };
        let t = fit_tree(&d, None, params).unwrap();
        assert_eq!(weighted_accuracy(&t, &d, None), 1.0);
    }

    #[test]
    fn stump_threshold_between_groups() {
        let d = ds(&[&[0.0], &[1.0], &[2.0], &[3.0]], &[0, 0, 1, 1], 2);
        let params = TreeParams {
            max_depth: Some(1),
            ..Default::default()
        };
        let t = fit_tree(&d, None, params).unwrap();
        match &t.nodes()[0] {
            Node::Split { threshold, .. } => assert!(*threshold > 1.0 && *threshold < 2.0),
            other => panic!("expected a split, got {other:?}"),
        }
        assert_eq!(weighted_accuracy(&t, &d, None), 1.0);
    }

    #[test]
    fn dimension_mismatch_and_bad_weights() {
        let d = ds(&[&[0.0], &[1.0]], &[0, 1], 2);
        let t = fit_tree(&d, None, TreeParams::default()).unwrap();
        assert!(matches!(t.predict_proba(&[1.0, 2.0]), Err(Error::DimensionMismatch { .. })));
        assert!(fit_tree(&d, Some(&[1.0, f64::NAN]), TreeParams::default()).is_err());
        assert!(fit_tree(&d, Some(&[0.0, 0.0]), TreeParams::default()).is_err());
        assert!(fit_tree(&d.empty_like(), None, TreeParams::default()).is_err());
    }

    #[test]
    fn tie_break_prefers_lowest_feature() {
        // Both features separate perfectly; feature 0 must win.
        let d = ds(&[&[0.0, 0.0], &[1.0, 1.0]], &[0, 1], 2);
        let t = fit_tree(&d, None, TreeParams::default()).unwrap();
        assert!(matches!(t.nodes()[0], Node::Split { feature: 0, .. }));
    }

    #[test]
    fn adjacent_floats_keep_threshold_below_upper_value() {
        let hi = 1.0f64;
        let lo = f64::from_bits(hi.to_bits() - 1);
        let m = midpoint(lo, hi);
        assert!(m < hi && m >= lo);
    }
}
