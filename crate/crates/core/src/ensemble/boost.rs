//! Discrete multiclass AdaBoost (SAMME).

use serde::{Deserialize, Serialize};

use super::{check_dim, Classifier};
use crate::data::FeatureDataset;
use crate::error::{Error, Result};
use crate::tree::{argmax, fit_tree, TreeModel, TreeParams};

/// Stage weight used when a base learner makes no weighted error.
pub const ZERO_ERROR_ALPHA: f64 = 23.025_850_929_940_457; // ln(1e10)

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub n_estimators: usize,
    pub learning_rate: f64,
    /// Depth of each base tree; 1 gives decision stumps.
    pub max_depth: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for BoostParams {
    fn default() -> Self {
        Self {
            n_estimators: 100,
            learning_rate: 0.5,
            max_depth: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub tree: TreeModel,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostModel {
    stages: Vec<Stage>,
    params: BoostParams,
    n_features: usize,
    n_classes: usize,
}

impl BoostModel {
    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn params(&self) -> &BoostParams {
        &self.params
    }

    pub fn learning_rate(&self) -> f64 {
        self.params.learning_rate
    }

    /// The first `m` stages as a model of their own.
    pub fn truncated(&self, m: usize) -> Self {
        Self {
            stages: self.stages[..m.min(self.stages.len())].to_vec(),
            ..self.clone()
        }
    }
}

impl Classifier for BoostModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Alpha-weighted stage votes, normalized to sum to one.
    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n_features, x)?;
        if self.stages.is_empty() {
            return Err(Error::Training("boosted model has no stages".into()));
        }
        let mut votes = vec![0.0; self.n_classes];
        let mut total = 0.0;
        for stage in &self.stages {
            votes[argmax(stage.tree.leaf_for(x))] += stage.alpha;
            total += stage.alpha;
        }
        votes.iter_mut().for_each(|v| *v /= total);
        Ok(votes)
    }
}

/// SAMME stage weight `lr * (ln((1 - err) / err) + ln(K - 1))`.
pub fn samme_alpha(error: f64, n_classes: usize, learning_rate: f64) -> f64 {
    learning_rate * (((1.0 - error) / error).ln() + ((n_classes - 1) as f64).ln())
}

/// What happened in one boosting round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundReport {
    pub round: usize,
    pub error: f64,
    pub alpha: f64,
    /// False when the learner was no better than chance and was discarded.
    pub accepted: bool,
}

/// Round-by-round SAMME trainer. Exposes the sample weights between rounds.
pub struct SammeTrainer<'a> {
    ds: &'a FeatureDataset,
    params: BoostParams,
    weights: Vec<f64>,
    stages: Vec<Stage>,
    round: usize,
    finished: bool,
}

impl<'a> SammeTrainer<'a> {
    pub fn new(ds: &'a FeatureDataset, params: BoostParams) -> Result<Self> {
        if ds.is_empty() {
            return Err(Error::InvalidData("cannot boost on an empty dataset".into()));
        }
        if params.n_estimators == 0 {
            return Err(Error::InvalidParam("n_estimators must be at least 1".into()));
        }
        if !(params.learning_rate > 0.0 && params.learning_rate.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "learning_rate must be positive, got {}",
                params.learning_rate
            )));
        }
        if ds.n_classes() < 2 {
            return Err(Error::InvalidParam("boosting needs at least two classes".into()));
        }
        let n = ds.n_rows();
        Ok(Self {
            ds,
            params,
            weights: vec![1.0 / n as f64; n],
            stages: Vec::new(),
            round: 0,
            finished: false,
        })
    }

    /// Current normalized sample weights.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// Runs one round; `None` once training has stopped.
    pub fn step(&mut self) -> Result<Option<RoundReport>> {
        if self.finished || self.round >= self.params.n_estimators {
            self.finished = true;
            return Ok(None);
        }
        let round = self.round;
        self.round += 1;
        let k = self.ds.n_classes();
        let tree = fit_tree(
            self.ds,
            Some(&self.weights),
            TreeParams {
                max_depth: Some(self.params.max_depth),
                feature_subset: None,
                seed: self.params.seed.wrapping_add(round as u64),
            },
        )?;
        let missed: Vec<bool> = self
            .ds
            .rows()
            .enumerate()
            .map(|(i, x)| argmax(tree.leaf_for(x)) != self.ds.label(i))
            .collect();
        let total: f64 = self.weights.iter().sum();
        let error = missed
            .iter()
            .zip(&self.weights)
            .filter(|(m, _)| **m)
            .map(|(_, w)| w)
            .sum::<f64>()
            / total;

        if error >= 1.0 - 1.0 / k as f64 {
            self.finished = true;
            return Ok(Some(RoundReport {
                round,
                error,
                alpha: 0.0,
                accepted: false,
            }));
        }
        if error <= 0.0 {
            self.stages.push(Stage {
                tree,
                alpha: ZERO_ERROR_ALPHA,
            });
            self.finished = true;
            return Ok(Some(RoundReport {
                round,
                error: 0.0,
                alpha: ZERO_ERROR_ALPHA,
                accepted: true,
            }));
        }

        let alpha = samme_alpha(error, k, self.params.learning_rate);
        let boost = alpha.exp();
        for (w, &m) in self.weights.iter_mut().zip(&missed) {
            if m {
                *w *= boost;
            }
        }
        let sum: f64 = self.weights.iter().sum();
        self.weights.iter_mut().for_each(|w| *w /= sum);
        self.stages.push(Stage { tree, alpha });
        Ok(Some(RoundReport {
            round,
            error,
            alpha,
            accepted: true,
        }))
    }

    pub fn finish(self) -> Result<BoostModel> {
        if self.stages.is_empty() {
            return Err(Error::Training(
                "first base learner was no better than chance".into(),
            ));
        }
        Ok(BoostModel {
            stages: self.stages,
            params: self.params,
            n_features: self.ds.n_features(),
            n_classes: self.ds.n_classes(),
        })
    }
}

/// Trains up to `n_estimators` SAMME stages of depth-limited trees.
pub fn fit_adaboost(ds: &FeatureDataset, params: BoostParams) -> Result<BoostModel> {
    let mut trainer = SammeTrainer::new(ds, params)?;
    while trainer.step()?.is_some() {}
    trainer.finish()
}
