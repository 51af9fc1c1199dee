use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_dim, Classifier};
use crate::data::FeatureDataset;
use crate::error::{Error, Result};
use crate::tree::{argmax, fit_tree, TreeModel, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_estimators: usize,
    /// Bootstrap draw count as a fraction of the training rows.
    pub max_samples: f64,
    #[serde(default)]
    pub max_depth: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_estimators: 200,
            max_samples: 0.75,
            max_depth: None,
            seed: 0,
        }
    }
}

/// Fixed-size bitset of rows drawn into one tree's bootstrap sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InBag {
    len: usize,
    words: Vec<u64>,
}

impl InBag {
    fn new(len: usize) -> Self {
        Self {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    fn insert(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn contains(&self, i: usize) -> bool {
        self.words[i / 64] & (1 << (i % 64)) != 0
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    trees: Vec<TreeModel>,
    inbag: Vec<InBag>,
    params: ForestParams,
    n_features: usize,
    n_classes: usize,
}

/// Out-of-bag accuracy along with how many rows could be scored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OobReport {
    /// `None` when no row was out of bag for any tree.
    pub accuracy: Option<f64>,
    pub covered: usize,
    pub skipped: usize,
}

impl ForestModel {
    pub fn trees(&self) -> &[TreeModel] {
        &self.trees
    }

    pub fn inbag(&self) -> &[InBag] {
        &self.inbag
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    /// Share of training rows never drawn for tree `t`.
    pub fn oob_fraction(&self, t: usize) -> f64 {
        let bag = &self.inbag[t];
        1.0 - bag.count() as f64 / bag.len() as f64
    }

    /// Copy of the forest with trees reordered; for order-independence checks.
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            trees: order.iter().map(|&i| self.trees[i].clone()).collect(),
            inbag: order.iter().map(|&i| self.inbag[i].clone()).collect(),
            ..self.clone()
        }
    }
}

impl Classifier for ForestModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n_features, x)?;
        if self.trees.is_empty() {
            return Err(Error::Training("forest has no trees".into()));
        }
        let mut out = vec![0.0; self.n_classes];
        for tree in &self.trees {
            for (o, p) in out.iter_mut().zip(tree.leaf_for(x)) {
                *o += p;
            }
        }
        let n = self.trees.len() as f64;
        out.iter_mut().for_each(|o| *o /= n);
        Ok(out)
    }
}

/// Bagged CART trees with `floor(sqrt(D))` candidate features per node.
///
/// Tree `t` draws `round(max_samples * N)` rows with replacement using the
/// seed `params.seed + t`; draw multiplicities become row weights. Trees are
/// fitted in parallel and the result is identical to a serial fit.
pub fn fit_forest(ds: &FeatureDataset, params: ForestParams) -> Result<ForestModel> {
    if ds.is_empty() {
        return Err(Error::InvalidData("cannot fit a forest on an empty dataset".into()));
    }
    if params.n_estimators == 0 {
        return Err(Error::InvalidParam("n_estimators must be at least 1".into()));
    }
    if !(params.max_samples > 0.0 && params.max_samples <= 1.0) {
        return Err(Error::InvalidParam(format!(
            "max_samples must lie in (0, 1], got {}",
            params.max_samples
        )));
    }
    let n = ds.n_rows();
    let draws = ((params.max_samples * n as f64).round() as usize).max(1);
    let subset = ((ds.n_features() as f64).sqrt().floor() as usize).max(1);

    let fitted: Vec<Result<(TreeModel, InBag)>> = (0..params.n_estimators)
        .into_par_iter()
        .map(|t| {
            let seed = params.seed.wrapping_add(t as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut weights = vec![0.0; n];
            let mut bag = InBag::new(n);
            for _ in 0..draws {
                let r = rng.random_range(0..n);
                weights[r] += 1.0;
                bag.insert(r);
            }
            let tree = fit_tree(
                ds,
                Some(&weights),
                TreeParams {
                    max_depth: params.max_depth,
                    feature_subset: Some(subset),
                    seed,
                },
            )?;
            Ok((tree, bag))
        })
        .collect();

    let mut trees = Vec::with_capacity(params.n_estimators);
    let mut inbag = Vec::with_capacity(params.n_estimators);
    for item in fitted {
        let (tree, bag) = item?;
        trees.push(tree);
        inbag.push(bag);
    }
    Ok(ForestModel {
        trees,
        inbag,
        params,
        n_features: ds.n_features(),
        n_classes: ds.n_classes(),
    })
}

/// Scores each training row with only the trees that did not draw it.
pub fn oob_accuracy(model: &ForestModel, ds: &FeatureDataset) -> Result<OobReport> {
    let n = model.inbag.first().map_or(0, InBag::len);
    if ds.n_rows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: ds.n_rows(),
        });
    }
    check_dim(model.n_features, ds.row(0))?;
    let mut correct = 0usize;
    let mut covered = 0usize;
    let mut proba = vec![0.0; model.n_classes];
    for (i, row) in ds.rows().enumerate() {
        proba.iter_mut().for_each(|p| *p = 0.0);
        let mut votes = 0usize;
        for (tree, bag) in model.trees.iter().zip(&model.inbag) {
            if bag.contains(i) {
                continue;
            }
            votes += 1;
            for (acc, p) in proba.iter_mut().zip(tree.leaf_for(row)) {
                *acc += p;
            }
        }
        if votes == 0 {
            continue;
        }
        covered += 1;
        if argmax(&proba) == ds.label(i) {
            correct += 1;
        }
    }
    Ok(OobReport {
        accuracy: (covered > 0).then(|| correct as f64 / covered as f64),
        covered,
        skipped: n - covered,
    })
}
