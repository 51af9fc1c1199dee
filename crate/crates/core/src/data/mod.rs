//! Labeled feature vectors and everything needed to get them in and out of
//! memory: file formats, stratified splitting and synthetic generators.

mod corpus;
mod io;
mod split;
mod synth;

pub use corpus::{materialize_counts, VehicleSource, VEHICLE_CLASSES};
pub use io::{
    dataset_fingerprint, load_features, read_binary, read_csv, read_label_map, save_features,
    write_binary, write_csv, FileFormat, BINARY_MAGIC,
};
pub use split::{stratified_split, stratified_train_counts, uniform_split, SplitPair};
pub use synth::{synth_blobs, BlobSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Source tag carried by rows created by an oversampler.
pub const SYNTHETIC_TAG: u8 = u8::MAX;

/// N labeled D-dimensional feature vectors.
///
/// Features are stored row-major. Labels are dense indices into
/// `class_names`; `source_tags` records where each row came from
/// (0 for the primary source, [`SYNTHETIC_TAG`] for oversampled rows).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDataset {
    features: Vec<f64>,
    n_features: usize,
    labels: Vec<usize>,
    class_names: Vec<String>,
    source_tags: Vec<u8>,
}

impl FeatureDataset {
    pub fn new(
        features: Vec<f64>,
        n_features: usize,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let n = labels.len();
        Self::with_source_tags(features, n_features, labels, class_names, vec![0; n])
    }

    pub fn with_source_tags(
        features: Vec<f64>,
        n_features: usize,
        labels: Vec<usize>,
        class_names: Vec<String>,
        source_tags: Vec<u8>,
    ) -> Result<Self> {
        if n_features == 0 {
            return Err(Error::InvalidData("feature dimension must be at least 1".into()));
        }
        if features.len() != labels.len() * n_features {
            return Err(Error::InvalidData(format!(
                "{} feature values do not form {} rows of width {}",
                features.len(),
                labels.len(),
                n_features
            )));
        }
        if source_tags.len() != labels.len() {
            return Err(Error::InvalidData(format!(
                "{} source tags for {} rows",
                source_tags.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::InvalidData(format!(
                "label {bad} out of range for {} classes",
                class_names.len()
            )));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite feature value in row {}",
                pos / n_features
            )));
        }
        for (i, name) in class_names.iter().enumerate() {
            if class_names[..i].contains(name) {
                return Err(Error::InvalidData(format!("duplicate class name {name:?}")));
            }
        }
        Ok(Self {
            features,
            n_features,
            labels,
            class_names,
            source_tags,
        })
    }

    /// Builds a dataset from owned rows. All rows must share one width.
    pub fn from_rows(
        rows: &[Vec<f64>],
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let width = rows.first().map(Vec::len).ok_or_else(|| {
            Error::InvalidData("cannot infer feature dimension from zero rows".into())
        })?;
        if rows.len() != labels.len() {
            return Err(Error::InvalidData(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let mut features = Vec::with_capacity(rows.len() * width);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(Error::InvalidData(format!(
                    "row {i} has {} values, expected {width}",
                    row.len()
                )));
            }
            features.extend_from_slice(row);
        }
        Self::new(features, width, labels, class_names)
    }

    /// An empty dataset sharing this one's schema.
    pub fn empty_like(&self) -> Self {
        Self {
            features: Vec::new(),
            n_features: self.n_features,
            labels: Vec::new(),
            class_names: self.class_names.clone(),
            source_tags: Vec::new(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.features.chunks_exact(self.n_features)
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn source_tags(&self) -> &[u8] {
        &self.source_tags
    }

    pub fn is_synthetic(&self, i: usize) -> bool {
        self.source_tags[i] == SYNTHETIC_TAG
    }

    pub fn distribution(&self) -> ClassDistribution {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        ClassDistribution { counts }
    }

    /// Row indices grouped by class, each group in ascending order.
    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.n_classes()];
        for (i, &l) in self.labels.iter().enumerate() {
            groups[l].push(i);
        }
        groups
    }

    /// Gathers the given rows (repeats allowed) into a new dataset.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Self {
            features,
            n_features: self.n_features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
            source_tags: indices.iter().map(|&i| self.source_tags[i]).collect(),
        }
    }

    /// Row-wise union. Both datasets must share dimension and class table.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        out.features.extend_from_slice(&other.features);
        out.labels.extend_from_slice(&other.labels);
        out.source_tags.extend_from_slice(&other.source_tags);
        Ok(out)
    }

    pub fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.n_features != other.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: other.n_features,
            });
        }
        if self.class_names != other.class_names {
            return Err(Error::InvalidData(
                "datasets use different class tables".into(),
            ));
        }
        Ok(())
    }

    /// Appends rows in place. Used by resamplers that only grow a dataset.
    pub(crate) fn push_row(&mut self, row: &[f64], label: usize, tag: u8) {
        debug_assert_eq!(row.len(), self.n_features);
        self.features.extend_from_slice(row);
        self.labels.push(label);
        self.source_tags.push(tag);
    }
}

/// Per-class row counts of a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassDistribution {
    pub counts: Vec<usize>,
}

impl ClassDistribution {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Largest class count (0 for an empty distribution).
    pub fn majority(&self) -> usize {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    pub fn minority(&self) -> usize {
        self.counts.iter().copied().min().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("c{i}")).collect()
    }

    #[test]
    fn rejects_out_of_range_label() {
        let err = FeatureDataset::new(vec![0.0, 1.0], 1, vec![0, 2], names(2)).unwrap_err();
        assert!(matches!(err, Error::InvalidData(_)));
    }

    #[test]
    fn rejects_non_finite_and_ragged() {
        assert!(FeatureDataset::new(vec![f64::NAN], 1, vec![0], names(1)).is_err());
        assert!(FeatureDataset::new(vec![1.0, 2.0, 3.0], 2, vec![0], names(1)).is_err());
        let rows = vec![vec![1.0, 2.0], vec![3.0]];
        assert!(FeatureDataset::from_rows(&rows, vec![0, 0], names(1)).is_err());
    }

    #[test]
    fn rejects_duplicate_class_names() {
        let err = FeatureDataset::new(vec![1.0], 1, vec![0], vec!["a".into(), "a".into()]);
        assert!(err.is_err());
    }

    #[test]
    fn select_and_concat_track_labels_and_tags() {
        let ds = FeatureDataset::from_rows(
            &[vec![0.0], vec![1.0], vec![2.0]],
            vec![0, 1, 1],
            names(2),
        )
        .unwrap();
        let picked = ds.select(&[2, 2, 0]);
        assert_eq!(picked.labels(), &[1, 1, 0]);
        assert_eq!(picked.row(1), &[2.0]);
        let joined = ds.concat(&picked).unwrap();
        assert_eq!(joined.n_rows(), 6);
        assert_eq!(joined.distribution().counts, vec![2, 4]);
    }
}
