//! Rebalancing, tree ensembles and evaluation for imbalanced multi-class
//! classification over precomputed feature vectors, plus a parameter planner
//! for residual CNN backbones.
//!
//! The crate operates on [`FeatureDataset`]s: dense row-major `f64` matrices
//! with integer labels and a shared class-name table.

pub mod data;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod persist;
pub mod planner;
pub mod projection;
pub mod rebalance;
pub mod report;
pub mod tree;

pub use data::{ClassDistribution, FeatureDataset, SYNTHETIC_TAG};
pub use ensemble::{
    fit_adaboost, fit_forest, fit_voting, BoostModel, BoostParams, Classifier, ForestModel,
    ForestParams, Model, VotingModel,
};
pub use error::{Error, ErrorKind, Result};
pub use eval::{evaluate, roc_auc, EvalReport, RocPoint};
pub use experiment::{run_grid, run_gridsearch, GridOutcome, GridPreset, GridSpec, ModelSpec, RunConfig};
pub use persist::{load_model, save_model, ModelPayload, Provenance};
pub use planner::{plan_network, NetConfig, NetPlan, Preset};
pub use projection::{pca2_fit, pca2_project, Pca2, Projection};
pub use rebalance::{build_variant, smote, undersample, SmoteParams, VariantKind, VariantSpec};
pub use report::{emit_report, ReportFormat, ResultsTable};
pub use tree::{fit_tree, TreeModel, TreeParams};
