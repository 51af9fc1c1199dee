//! Run configuration, model construction and the grid-search harness.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{load_features, read_label_map, FeatureDataset, FileFormat};
use crate::ensemble::{
    fit_adaboost, fit_forest, fit_voting, BoostParams, Classifier, ForestParams, Model,
};
use crate::error::{Error, Result};
use crate::eval::evaluate;
use crate::rebalance::{build_variant, VariantKind, VariantSpec};
use crate::report::{PoolCell, ResultRow, ResultsTable};
use crate::tree::{fit_tree, TreeParams};

/// splitmix64 step; used to derive independent seeds from a base seed.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One fully specified model configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelSpec {
    Tree {
        #[serde(default)]
        max_depth: Option<usize>,
    },
    Forest(ForestParams),
    Adaboost(BoostParams),
    Voting {
        forest: ForestParams,
        adaboost: BoostParams,
        #[serde(default)]
        weights: Option<Vec<f64>>,
    },
}

impl ModelSpec {
    /// Copy with every seed replaced by `seed`.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut out = self.clone();
        match &mut out {
            ModelSpec::Tree { .. } => {}
            ModelSpec::Forest(p) => p.seed = seed,
            ModelSpec::Adaboost(p) => p.seed = seed,
            ModelSpec::Voting {
                forest, adaboost, ..
            } => {
                forest.seed = seed;
                adaboost.seed = seed;
            }
        }
        out
    }

    /// Short parameter list in the `[n; lr; DT_d]` style.
    pub fn short_label(&self) -> String {
        match self {
            ModelSpec::Tree { max_depth } => match max_depth {
                Some(d) => format!("DT_{d}"),
                None => "DT".into(),
            },
            ModelSpec::Forest(p) => format!("{}; {}", p.n_estimators, p.max_samples),
            ModelSpec::Adaboost(p) => {
                format!("{}; {}; DT_{}", p.n_estimators, p.learning_rate, p.max_depth)
            }
            ModelSpec::Voting { .. } => "RF+AdaBoost".into(),
        }
    }
}

pub fn train_model(spec: &ModelSpec, ds: &FeatureDataset) -> Result<Model> {
    Ok(match spec {
        ModelSpec::Tree { max_depth } => fit_tree(
            ds,
            None,
            TreeParams {
                max_depth: *max_depth,
                ..Default::default()
            },
        )?
        .into(),
        ModelSpec::Forest(p) => fit_forest(ds, *p)?.into(),
        ModelSpec::Adaboost(p) => fit_adaboost(ds, *p)?.into(),
        ModelSpec::Voting {
            forest,
            adaboost,
            weights,
        } => {
            let rf = fit_forest(ds, *forest)?;
            let ab = fit_adaboost(ds, *adaboost)?;
            fit_voting(vec![rf.into(), ab.into()], weights.clone())?.into()
        }
    })
}

/// Hyperparameter axes for one model family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelGrid {
    Forest {
        n_estimators: Vec<usize>,
        max_samples: Vec<f64>,
        #[serde(default = "unlimited_depth")]
        max_depth: Vec<Option<usize>>,
    },
    Adaboost {
        n_estimators: Vec<usize>,
        learning_rate: Vec<f64>,
        max_depth: Vec<usize>,
    },
    Fixed {
        models: Vec<ModelSpec>,
    },
}

fn unlimited_depth() -> Vec<Option<usize>> {
    vec![None]
}

impl ModelGrid {
    pub fn cells(&self) -> Vec<ModelSpec> {
        let mut out = Vec::new();
        match self {
            ModelGrid::Forest {
                n_estimators,
                max_samples,
                max_depth,
            } => {
                for &n in n_estimators {
                    for &s in max_samples {
                        for &d in max_depth {
                            out.push(ModelSpec::Forest(ForestParams {
                                n_estimators: n,
                                max_samples: s,
                                max_depth: d,
                                seed: 0,
                            }));
                        }
                    }
                }
            }
            ModelGrid::Adaboost {
                n_estimators,
                learning_rate,
                max_depth,
            } => {
                for &n in n_estimators {
                    for &lr in learning_rate {
                        for &d in max_depth {
                            out.push(ModelSpec::Adaboost(BoostParams {
                                n_estimators: n,
                                learning_rate: lr,
                                max_depth: d,
                                seed: 0,
                            }));
                        }
                    }
                }
            }
            ModelGrid::Fixed { models } => out.extend(models.iter().cloned()),
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub variants: Vec<VariantKind>,
    #[serde(flatten)]
    pub models: ModelGrid,
}

impl GridSpec {
    /// Cartesian product, variants outermost.
    pub fn cells(&self) -> Vec<(VariantKind, ModelSpec)> {
        let models = self.models.cells();
        self.variants
            .iter()
            .flat_map(|&v| models.iter().map(move |m| (v, m.clone())))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.variants.len() * self.models.cells().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub const ADABOOST_EXP1_ESTIMATORS: [usize; 9] = [5, 10, 20, 30, 40, 50, 70, 100, 200];
pub const ADABOOST_EXP1_LEARNING_RATES: [f64; 8] = [1e-3, 1e-2, 5e-2, 0.1, 0.2, 0.5, 0.7, 1.0];

/// Built-in grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridPreset {
    /// Estimators x learning rate with stumps, on original and combined.
    AdaboostExp1,
    /// Narrowed estimators and rates with depths 2..=10.
    AdaboostExp2,
    /// Fixed 100 estimators across all six variants.
    AdaboostExp3,
    /// Forest size sweep at max_samples 0.75.
    ForestEstimators,
    /// Forest max_samples sweep at 200 trees.
    ForestMaxSamples,
    /// Tuned forest on all six variants.
    ForestVariants,
}

impl GridPreset {
    pub fn grid(self) -> GridSpec {
        let two = vec![VariantKind::Original, VariantKind::Combined];
        let depths: Vec<usize> = (2..=10).collect();
        match self {
            Self::AdaboostExp1 => GridSpec {
                variants: two,
                models: ModelGrid::Adaboost {
                    n_estimators: ADABOOST_EXP1_ESTIMATORS.to_vec(),
                    learning_rate: ADABOOST_EXP1_LEARNING_RATES.to_vec(),
                    max_depth: vec![1],
                },
            },
            Self::AdaboostExp2 => GridSpec {
                variants: two,
                models: ModelGrid::Adaboost {
                    n_estimators: vec![100, 150, 200],
                    learning_rate: vec![0.1, 0.2, 0.5],
                    max_depth: depths,
                },
            },
            Self::AdaboostExp3 => GridSpec {
                variants: VariantKind::ALL.to_vec(),
                models: ModelGrid::Adaboost {
                    n_estimators: vec![100],
                    learning_rate: vec![0.1, 0.2, 0.5],
                    max_depth: depths,
                },
            },
            Self::ForestEstimators => GridSpec {
                variants: vec![VariantKind::Original],
                models: ModelGrid::Forest {
                    n_estimators: vec![10, 25, 50, 100, 150, 200, 300],
                    max_samples: vec![0.75],
                    max_depth: vec![None],
                },
            },
            Self::ForestMaxSamples => GridSpec {
                variants: vec![VariantKind::Original],
                models: ModelGrid::Forest {
                    n_estimators: vec![200],
                    max_samples: vec![0.25, 0.5, 0.75, 1.0],
                    max_depth: vec![None],
                },
            },
            Self::ForestVariants => GridSpec {
                variants: VariantKind::ALL.to_vec(),
                models: ModelGrid::Forest {
                    n_estimators: vec![200],
                    max_samples: vec![0.75],
                    max_depth: vec![None],
                },
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSources {
    pub original: PathBuf,
    #[serde(default)]
    pub extras: Option<PathBuf>,
}

/// Validation and test files for one named evaluation pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPoolSpec {
    pub name: String,
    #[serde(default)]
    pub val: Option<PathBuf>,
    #[serde(default)]
    pub test: Option<PathBuf>,
}

/// Variant parameters shared by every variant a run builds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariantDefaults {
    #[serde(default = "VariantDefaults::k")]
    pub smote_k: usize,
    #[serde(default = "VariantDefaults::theta")]
    pub partial_theta: f64,
    #[serde(default = "VariantDefaults::target")]
    pub balanced_target: usize,
}

impl VariantDefaults {
    fn k() -> usize {
        crate::rebalance::DEFAULT_SMOTE_K
    }
    fn theta() -> f64 {
        crate::rebalance::DEFAULT_PARTIAL_THETA
    }
    fn target() -> usize {
        crate::rebalance::DEFAULT_BALANCED_TARGET
    }

    pub fn spec(&self, kind: VariantKind, seed: u64) -> VariantSpec {
        VariantSpec {
            kind,
            smote_k: self.smote_k,
            partial_theta: self.partial_theta,
            balanced_target: self.balanced_target,
            seed,
        }
    }
}

impl Default for VariantDefaults {
    fn default() -> Self {
        Self {
            smote_k: Self::k(),
            partial_theta: Self::theta(),
            balanced_target: Self::target(),
        }
    }
}

/// JSON run configuration. Relative paths resolve against the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub train: TrainSources,
    #[serde(default)]
    pub label_map: Option<PathBuf>,
    #[serde(default)]
    pub variant_params: VariantDefaults,
    /// Variant used by single-model training.
    #[serde(default)]
    pub variant: Option<VariantKind>,
    pub eval_pools: Vec<EvalPoolSpec>,
    /// Pool whose validation accuracy ranks grid cells; defaults to the first.
    #[serde(default)]
    pub primary_eval: Option<String>,
    #[serde(default)]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub grid_preset: Option<GridPreset>,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_top_k() -> usize {
    3
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.train.original);
        if let Some(p) = self.train.extras.as_mut() {
            fix(p);
        }
        if let Some(p) = self.label_map.as_mut() {
            fix(p);
        }
        for pool in &mut self.eval_pools {
            if let Some(p) = pool.val.as_mut() {
                fix(p);
            }
            if let Some(p) = pool.test.as_mut() {
                fix(p);
            }
        }
        if let Some(p) = self.output_dir.as_mut() {
            fix(p);
        }
    }

    pub fn primary_pool(&self) -> Result<&str> {
        match &self.primary_eval {
            Some(name) => self
                .eval_pools
                .iter()
                .find(|p| &p.name == name)
                .map(|p| p.name.as_str())
                .ok_or_else(|| Error::Config(format!("primary_eval {name:?} is not a pool"))),
            None => self
                .eval_pools
                .first()
                .map(|p| p.name.as_str())
                .ok_or_else(|| Error::Config("at least one eval pool is required".into())),
        }
    }

    /// The explicit grid, else the preset.
    pub fn resolved_grid(&self) -> Result<GridSpec> {
        let grid = match (&self.grid, self.grid_preset) {
            (Some(g), _) => g.clone(),
            (None, Some(p)) => p.grid(),
            (None, None) => return Err(Error::Config("no grid or grid_preset given".into())),
        };
        if grid.is_empty() {
            return Err(Error::Config("grid has no cells".into()));
        }
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.eval_pools.is_empty() {
            return Err(Error::Config("at least one eval pool is required".into()));
        }
        self.primary_pool()?;
        let mut paths = vec![&self.train.original];
        paths.extend(self.train.extras.iter());
        paths.extend(self.label_map.iter());
        for pool in &self.eval_pools {
            paths.extend(pool.val.iter());
            paths.extend(pool.test.iter());
        }
        if let Some(missing) = paths.into_iter().find(|p| !p.exists()) {
            return Err(Error::Config(format!("{} does not exist", missing.display())));
        }
        Ok(())
    }
}

/// Datasets for a run, already loaded.
#[derive(Debug, Clone)]
pub struct LoadedData {
    pub original: FeatureDataset,
    pub extras: Option<FeatureDataset>,
    pub pools: Vec<LoadedPool>,
}

#[derive(Debug, Clone)]
pub struct LoadedPool {
    pub name: String,
    pub val: Option<FeatureDataset>,
    pub test: Option<FeatureDataset>,
}

impl LoadedData {
    /// Loads every file, forcing one class table across them: the label map
    /// if configured, else the original training set's classes.
    pub fn load(cfg: &RunConfig) -> Result<Self> {
        let load = |p: &Path, map: Option<&[String]>| load_features(p, FileFormat::from_path(p), map);
        let map = cfg.label_map.as_deref().map(read_label_map).transpose()?;
        let original = load(&cfg.train.original, map.as_deref())?;
        let names = original.class_names().to_vec();
        let extras = cfg
            .train
            .extras
            .as_deref()
            .map(|p| load(p, Some(&names)))
            .transpose()?;
        let pools = cfg
            .eval_pools
            .iter()
            .map(|spec| {
                Ok(LoadedPool {
                    name: spec.name.clone(),
                    val: spec.val.as_deref().map(|p| load(p, Some(&names))).transpose()?,
                    test: spec.test.as_deref().map(|p| load(p, Some(&names))).transpose()?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            original,
            extras,
            pools,
        })
    }
}

/// Accuracy of one cell on one pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolScore {
    pub pool: String,
    pub val_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub val_per_class: Option<Vec<Option<f64>>>,
    pub test_per_class: Option<Vec<Option<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    /// Position in the unranked cartesian product.
    pub cell: usize,
    pub variant: VariantKind,
    pub model: ModelSpec,
    pub label: String,
    pub scores: Vec<PoolScore>,
    pub error: Option<String>,
}

impl CellResult {
    pub fn primary_val(&self, pool: &str) -> Option<f64> {
        self.scores
            .iter()
            .find(|s| s.pool == pool)
            .and_then(|s| s.val_accuracy)
    }
}

/// All cells, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOutcome {
    pub ranking_key: String,
    pub boosting: String,
    pub seed: u64,
    pub n_cells: usize,
    pub failed_cells: usize,
    pub cells: Vec<CellResult>,
}

impl GridOutcome {
    /// Top `k` cells as a results table with paired Val/Test columns.
    pub fn table(&self, title: &str, k: usize) -> ResultsTable {
        let pools: Vec<String> = self
            .cells
            .first()
            .map(|c| c.scores.iter().map(|s| s.pool.clone()).collect())
            .unwrap_or_default();
        let rows = self
            .cells
            .iter()
            .take(k)
            .map(|c| ResultRow {
                label: c.label.clone(),
                cells: c
                    .scores
                    .iter()
                    .map(|s| PoolCell {
                        val: s.val_accuracy,
                        test: s.test_accuracy,
                    })
                    .collect(),
                details: Vec::new(),
            })
            .collect();
        ResultsTable {
            title: title.to_owned(),
            pools,
            rows,
            notes: vec![
                format!("ranked by {}", self.ranking_key),
                format!("boosting: {}", self.boosting),
            ],
        }
    }
}

fn cell_label(grid: &GridSpec, variant: VariantKind, model: &ModelSpec) -> String {
    if grid.models.cells().len() == 1 {
        variant.name().to_owned()
    } else {
        format!("[{}; {}]", variant.name(), model.short_label())
    }
}

fn score_model(model: &Model, pools: &[LoadedPool]) -> Result<Vec<PoolScore>> {
    pools
        .iter()
        .map(|pool| {
            let eval = |ds: &Option<FeatureDataset>, split: &str| {
                ds.as_ref()
                    .map(|d| evaluate(model, d, &format!("{}/{split}", pool.name)))
                    .transpose()
            };
            let val = eval(&pool.val, "val")?;
            let test = eval(&pool.test, "test")?;
            Ok(PoolScore {
                pool: pool.name.clone(),
                val_accuracy: val.as_ref().map(|r| r.overall_accuracy),
                test_accuracy: test.as_ref().map(|r| r.overall_accuracy),
                val_per_class: val.map(|r| r.per_class_accuracy),
                test_per_class: test.map(|r| r.per_class_accuracy),
            })
        })
        .collect()
}

/// Builds each needed variant once. Failures are kept per variant.
fn build_variants(
    data: &LoadedData,
    kinds: &[VariantKind],
    params: &VariantDefaults,
    seed: u64,
) -> HashMap<VariantKind, std::result::Result<FeatureDataset, String>> {
    let mut unique: Vec<VariantKind> = Vec::new();
    for &k in kinds {
        if !unique.contains(&k) {
            unique.push(k);
        }
    }
    unique
        .par_iter()
        .map(|&kind| {
            let spec = params.spec(kind, seed);
            let built = build_variant(&data.original, data.extras.as_ref(), &spec)
                .map_err(|e| e.to_string());
            (kind, built)
        })
        .collect()
}

/// Trains and scores every cell of the grid. A failing cell is recorded and
/// does not stop the others. Cell `i` trains with seed `derive_seed(seed, i)`;
/// cells run in parallel and the outcome does not depend on scheduling.
pub fn run_grid(
    data: &LoadedData,
    grid: &GridSpec,
    variant_params: &VariantDefaults,
    primary_pool: &str,
    seed: u64,
) -> Result<GridOutcome> {
    if grid.is_empty() {
        return Err(Error::Config("grid has no cells".into()));
    }
    if !data.pools.iter().any(|p| p.name == primary_pool) {
        return Err(Error::Config(format!("no eval pool named {primary_pool:?}")));
    }
    let cells = grid.cells();
    let variants = build_variants(data, &grid.variants, variant_params, seed);

    let mut results: Vec<CellResult> = cells
        .par_iter()
        .enumerate()
        .map(|(i, (variant, spec))| {
            let spec = spec.with_seed(derive_seed(seed, i as u64));
            let label = cell_label(grid, *variant, &spec);
            let outcome = variants[variant]
                .as_ref()
                .map_err(Clone::clone)
                .and_then(|ds| {
                    let model = train_model(&spec, ds).map_err(|e| e.to_string())?;
                    score_model(&model, &data.pools).map_err(|e| e.to_string())
                });
            let (scores, error) = match outcome {
                Ok(s) => (s, None),
                Err(e) => (Vec::new(), Some(e)),
            };
            CellResult {
                cell: i,
                variant: *variant,
                model: spec,
                label,
                scores,
                error,
            }
        })
        .collect();

    results.sort_by(|a, b| {
        let ka = a.primary_val(primary_pool);
        let kb = b.primary_val(primary_pool);
        match (ka, kb) {
            (Some(x), Some(y)) => y.total_cmp(&x),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => std::cmp::Ordering::Equal,
        }
        .then(a.cell.cmp(&b.cell))
    });
    let failed_cells = results.iter().filter(|c| c.error.is_some()).count();
    Ok(GridOutcome {
        ranking_key: format!("validation accuracy on pool {primary_pool:?}"),
        boosting: "SAMME (discrete)".into(),
        seed,
        n_cells: results.len(),
        failed_cells,
        cells: results,
    })
}

/// Loads the config's data and runs its grid.
pub fn run_gridsearch(cfg: &RunConfig) -> Result<GridOutcome> {
    cfg.validate()?;
    let grid = cfg.resolved_grid()?;
    let data = LoadedData::load(cfg)?;
    run_grid(&data, &grid, &cfg.variant_params, cfg.primary_pool()?, cfg.seed)
}

/// Trains one model and evaluates it on every pool. A voting model also
/// reports its members as separate rows.
pub fn train_and_report(
    data: &LoadedData,
    spec: &ModelSpec,
    variant: &VariantSpec,
) -> Result<(Model, FeatureDataset, ResultsTable)> {
    let ds = build_variant(&data.original, data.extras.as_ref(), variant)?;
    let model = train_model(spec, &ds)?;
    let mut rows = Vec::new();
    if let Model::Voting(v) = &model {
        for (member, name) in v.members().iter().zip(["Random Forest", "AdaBoost"]) {
            rows.push(detailed_row(name, member, &data.pools)?);
        }
        rows.push(detailed_row("Voting Classifier", &model, &data.pools)?);
    } else {
        rows.push(detailed_row(variant.kind.name(), &model, &data.pools)?);
    }
    let table = ResultsTable {
        title: format!("{} trained on {}", model.kind_name(), variant.kind),
        pools: data.pools.iter().map(|p| p.name.clone()).collect(),
        rows,
        notes: Vec::new(),
    };
    Ok((model, ds, table))
}

/// A results row carrying full evaluation reports for each pool split.
pub fn detailed_row<M: Classifier + ?Sized>(
    label: &str,
    model: &M,
    pools: &[LoadedPool],
) -> Result<ResultRow> {
    let mut cells = Vec::new();
    let mut details = Vec::new();
    for pool in pools {
        let mut cell = PoolCell::default();
        if let Some(ds) = &pool.val {
            let r = evaluate(model, ds, &format!("{}/val", pool.name))?;
            cell.val = Some(r.overall_accuracy);
            details.push(r);
        }
        if let Some(ds) = &pool.test {
            let r = evaluate(model, ds, &format!("{}/test", pool.name))?;
            cell.test = Some(r.overall_accuracy);
            details.push(r);
        }
        cells.push(cell);
    }
    Ok(ResultRow {
        label: label.to_owned(),
        cells,
        details,
    })
}
