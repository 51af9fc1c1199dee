//! SMOTE oversampling, capped random undersampling and the six training-set
//! variants built from them.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::data::{FeatureDataset, SYNTHETIC_TAG};
use crate::error::{Error, Result};

pub const DEFAULT_SMOTE_K: usize = 5;
pub const DEFAULT_PARTIAL_THETA: f64 = 0.25;
pub const DEFAULT_BALANCED_TARGET: usize = 2000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmoteParams {
    pub k: usize,
    /// Desired row count per class; 0 leaves a class untouched.
    pub per_class_target: Vec<usize>,
    pub seed: u64,
}

/// Indices of the `k` nearest rows to `rows[i]` among `rows` (Euclidean),
/// excluding `i` itself. Ties are broken by lower index.
fn nearest_neighbors(ds: &FeatureDataset, rows: &[usize], i: usize, k: usize) -> Vec<usize> {
    let base = ds.row(rows[i]);
    let mut dists: Vec<(f64, usize)> = rows
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(j, &r)| {
            let d2 = base
                .iter()
                .zip(ds.row(r))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
            (d2, j)
        })
        .collect();
    let by_distance = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if dists.len() > k {
        dists.select_nth_unstable_by(k - 1, by_distance);
        dists.truncate(k);
    }
    dists.sort_by(by_distance);
    dists.into_iter().map(|(_, j)| j).collect()
}

/// Synthetic rows for one class, generated with a class-local RNG.
fn smote_class(
    ds: &FeatureDataset,
    rows: &[usize],
    needed: usize,
    k: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    let k_eff = k.min(rows.len() - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut neighbor_cache: Vec<Option<Vec<usize>>> = vec![None; rows.len()];
    let mut out = Vec::with_capacity(needed);
    for _ in 0..needed {
        let b = rng.random_range(0..rows.len());
        let nn = neighbor_cache[b].get_or_insert_with(|| nearest_neighbors(ds, rows, b, k_eff));
        let n = nn[rng.random_range(0..nn.len())];
        let delta: f64 = rng.random();
        let x = ds.row(rows[b]);
        let y = ds.row(rows[n]);
        out.push(x.iter().zip(y).map(|(&a, &b)| a + delta * (b - a)).collect());
    }
    out
}

/// Oversamples classes up to their targets by interpolating between a
/// random class member and one of its `k'` nearest same-class neighbours,
/// where `k' = min(k, count - 1)`.
///
/// Original rows are kept verbatim and in order; synthetic rows are appended
/// class by class and tagged [`SYNTHETIC_TAG`]. Each class uses the seed
/// `params.seed + class`, so classes are generated in parallel with the same
/// output as a serial run.
pub fn smote(ds: &FeatureDataset, params: &SmoteParams) -> Result<FeatureDataset> {
    if params.k == 0 {
        return Err(Error::InvalidParam("SMOTE k must be at least 1".into()));
    }
    if params.per_class_target.len() != ds.n_classes() {
        return Err(Error::InvalidParam(format!(
            "{} SMOTE targets for {} classes",
            params.per_class_target.len(),
            ds.n_classes()
        )));
    }
    let groups = ds.class_indices();
    let mut jobs = Vec::new();
    for (class, (rows, &target)) in groups.iter().zip(&params.per_class_target).enumerate() {
        if target == 0 || target == rows.len() {
            continue;
        }
        let name = &ds.class_names()[class];
        if target < rows.len() {
            return Err(Error::InvalidParam(format!(
                "SMOTE target {target} for class {name:?} is below its count {}",
                rows.len()
            )));
        }
        if rows.len() < 2 {
            return Err(Error::InvalidData(format!(
                "class {name:?} has {} row(s); SMOTE needs at least 2",
                rows.len()
            )));
        }
        jobs.push((class, target - rows.len()));
    }

    let generated: Vec<(usize, Vec<Vec<f64>>)> = jobs
        .par_iter()
        .map(|&(class, needed)| {
            let seed = params.seed.wrapping_add(class as u64);
            (class, smote_class(ds, &groups[class], needed, params.k, seed))
        })
        .collect();

    let mut out = ds.clone();
    for (class, rows) in generated {
        for row in rows {
            out.push_row(&row, class, SYNTHETIC_TAG);
        }
    }
    Ok(out)
}

/// Caps every class at `cap` rows by uniform sampling without replacement.
/// Surviving rows keep their original relative order.
pub fn undersample(ds: &FeatureDataset, cap: usize, seed: u64) -> Result<FeatureDataset> {
    if cap == 0 {
        return Err(Error::InvalidParam("undersampling cap must be at least 1".into()));
    }
    let mut keep = Vec::with_capacity(ds.n_rows());
    for (class, rows) in ds.class_indices().into_iter().enumerate() {
        if rows.len() <= cap {
            keep.extend(rows);
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(class as u64));
            keep.extend(sample(&mut rng, rows.len(), cap).into_iter().map(|i| rows[i]));
        }
    }
    keep.sort_unstable();
    Ok(ds.select(&keep))
}

/// The six training-set recipes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantKind {
    Original,
    Combined,
    Smote,
    SmoteCombined,
    SmotePartial,
    Balanced,
}

impl VariantKind {
    pub const ALL: [VariantKind; 6] = [
        Self::Original,
        Self::Combined,
        Self::Smote,
        Self::SmoteCombined,
        Self::SmotePartial,
        Self::Balanced,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Original => "original",
            Self::Combined => "combined",
            Self::Smote => "smote",
            Self::SmoteCombined => "smote_combined",
            Self::SmotePartial => "smote_partial",
            Self::Balanced => "balanced",
        }
    }

    pub fn needs_extras(self) -> bool {
        matches!(
            self,
            Self::Combined | Self::SmoteCombined | Self::SmotePartial | Self::Balanced
        )
    }
}

impl fmt::Display for VariantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VariantKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        let norm = if norm == "ori" { "original".to_owned() } else { norm };
        Self::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| Error::InvalidParam(format!("unknown variant {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariantSpec {
    pub kind: VariantKind,
    #[serde(default = "default_k")]
    pub smote_k: usize,
    #[serde(default = "default_theta")]
    pub partial_theta: f64,
    #[serde(default = "default_target")]
    pub balanced_target: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_k() -> usize {
    DEFAULT_SMOTE_K
}
fn default_theta() -> f64 {
    DEFAULT_PARTIAL_THETA
}
fn default_target() -> usize {
    DEFAULT_BALANCED_TARGET
}

impl VariantSpec {
    pub fn new(kind: VariantKind, seed: u64) -> Self {
        Self {
            kind,
            smote_k: DEFAULT_SMOTE_K,
            partial_theta: DEFAULT_PARTIAL_THETA,
            balanced_target: DEFAULT_BALANCED_TARGET,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.smote_k == 0 {
            return Err(Error::InvalidParam("smote_k must be at least 1".into()));
        }
        if !(self.partial_theta > 0.0 && self.partial_theta <= 1.0) {
            return Err(Error::InvalidParam(format!(
                "partial_theta must lie in (0, 1], got {}",
                self.partial_theta
            )));
        }
        if self.balanced_target == 0 {
            return Err(Error::InvalidParam("balanced_target must be positive".into()));
        }
        Ok(())
    }
}

/// Targets raising classes strictly below `level` up to `level`.
fn raise_to(counts: &[usize], level: usize) -> Vec<usize> {
    counts
        .iter()
        .map(|&c| if c < level { level } else { 0 })
        .collect()
}

/// Per-class targets for the partial variant: classes below
/// `theta * majority` are raised to `ceil(theta * majority)`.
pub fn partial_targets(counts: &[usize], theta: f64) -> Vec<usize> {
    let majority = counts.iter().copied().max().unwrap_or(0) as f64;
    let threshold = theta * majority;
    let level = threshold.ceil() as usize;
    counts
        .iter()
        .map(|&c| if (c as f64) < threshold { level } else { 0 })
        .collect()
}

pub fn build_variant(
    original: &FeatureDataset,
    extras: Option<&FeatureDataset>,
    spec: &VariantSpec,
) -> Result<FeatureDataset> {
    spec.validate()?;
    let combined = || -> Result<FeatureDataset> {
        let extras = extras.ok_or_else(|| {
            Error::InvalidParam(format!("variant {} needs extra sources", spec.kind))
        })?;
        original.concat(extras)
    };
    let smote_with = |ds: &FeatureDataset, targets: Vec<usize>| {
        smote(
            ds,
            &SmoteParams {
                k: spec.smote_k,
                per_class_target: targets,
                seed: spec.seed,
            },
        )
    };
    match spec.kind {
        VariantKind::Original => Ok(original.clone()),
        VariantKind::Combined => combined(),
        VariantKind::Smote => {
            let counts = original.distribution().counts;
            let majority = counts.iter().copied().max().unwrap_or(0);
            smote_with(original, raise_to(&counts, majority))
        }
        VariantKind::SmoteCombined => {
            let ds = combined()?;
            let counts = ds.distribution().counts;
            let majority = counts.iter().copied().max().unwrap_or(0);
            smote_with(&ds, raise_to(&counts, majority))
        }
        VariantKind::SmotePartial => {
            let ds = combined()?;
            let targets = partial_targets(&ds.distribution().counts, spec.partial_theta);
            smote_with(&ds, targets)
        }
        VariantKind::Balanced => {
            let ds = combined()?;
            let targets = raise_to(&ds.distribution().counts, spec.balanced_target);
            let raised = smote_with(&ds, targets)?;
            undersample(&raised, spec.balanced_target, spec.seed)
        }
    }
}

/// Record of how a variant was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantManifest {
    pub spec: VariantSpec,
    pub class_names: Vec<String>,
    pub counts_before: Vec<usize>,
    pub counts_after: Vec<usize>,
    pub synthetic_rows: usize,
}

impl VariantManifest {
    pub fn describe(
        spec: &VariantSpec,
        original: &FeatureDataset,
        extras: Option<&FeatureDataset>,
        output: &FeatureDataset,
    ) -> Self {
        let mut before = original.distribution().counts;
        if spec.kind.needs_extras() {
            if let Some(extras) = extras {
                for (b, e) in before.iter_mut().zip(extras.distribution().counts) {
                    *b += e;
                }
            }
        }
        Self {
            spec: *spec,
            class_names: output.class_names().to_vec(),
            counts_before: before,
            counts_after: output.distribution().counts,
            synthetic_rows: (0..output.n_rows()).filter(|&i| output.is_synthetic(i)).count(),
        }
    }
}
