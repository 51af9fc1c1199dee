//! Tree ensembles and the shared probability-producing model interface.

mod boost;
mod forest;
mod voting;

pub use boost::{fit_adaboost, samme_alpha, BoostModel, BoostParams, RoundReport, SammeTrainer, Stage};
pub use forest::{fit_forest, oob_accuracy, ForestModel, ForestParams, InBag, OobReport};
pub use voting::{fit_voting, VotingModel};

use serde::{Deserialize, Serialize};

use crate::data::FeatureDataset;
use crate::error::{Error, Result};
use crate::tree::{argmax, TreeModel};

/// Anything that maps a feature vector to a class-probability vector.
pub trait Classifier {
    fn n_features(&self) -> usize;
    fn n_classes(&self) -> usize;
    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Argmax of [`Classifier::predict_proba`], lowest index on ties.
    fn predict(&self, x: &[f64]) -> Result<usize> {
        self.predict_proba(x).map(|p| argmax(&p))
    }

    fn predict_dataset(&self, ds: &FeatureDataset) -> Result<Vec<usize>> {
        ds.rows().map(|r| self.predict(r)).collect()
    }
}

pub(crate) fn check_dim(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: x.len(),
        });
    }
    Ok(())
}

impl Classifier for TreeModel {
    fn n_features(&self) -> usize {
        TreeModel::n_features(self)
    }

    fn n_classes(&self) -> usize {
        TreeModel::n_classes(self)
    }

    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        TreeModel::predict_proba(self, x).map(<[f64]>::to_vec)
    }
}

/// Any trained model, as stored in model files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Tree(TreeModel),
    Forest(ForestModel),
    Boost(BoostModel),
    Voting(VotingModel),
}

impl Model {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Model::Tree(_) => "tree",
            Model::Forest(_) => "forest",
            Model::Boost(_) => "boost",
            Model::Voting(_) => "voting",
        }
    }

    fn inner(&self) -> &dyn Classifier {
        match self {
            Model::Tree(m) => m,
            Model::Forest(m) => m,
            Model::Boost(m) => m,
            Model::Voting(m) => m,
        }
    }
}

impl Classifier for Model {
    fn n_features(&self) -> usize {
        self.inner().n_features()
    }

    fn n_classes(&self) -> usize {
        self.inner().n_classes()
    }

    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.inner().predict_proba(x)
    }
}

impl From<TreeModel> for Model {
    fn from(m: TreeModel) -> Self {
        Model::Tree(m)
    }
}

impl From<ForestModel> for Model {
    fn from(m: ForestModel) -> Self {
        Model::Forest(m)
    }
}

impl From<BoostModel> for Model {
    fn from(m: BoostModel) -> Self {
        Model::Boost(m)
    }
}

impl From<VotingModel> for Model {
    fn from(m: VotingModel) -> Self {
        Model::Voting(m)
    }
}
