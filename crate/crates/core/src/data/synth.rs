use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::FeatureDataset;
use crate::error::{Error, Result};

/// One isotropic Gaussian class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub center: Vec<f64>,
    pub stddev: f64,
    pub count: usize,
}

impl BlobSpec {
    pub fn new(center: Vec<f64>, stddev: f64, count: usize) -> Self {
        Self {
            name: None,
            center,
            stddev,
            count,
        }
    }
}

/// Draws `count` samples per blob; blob `i` becomes class `i`.
///
/// A zero `stddev` is accepted and places every sample exactly on the center.
pub fn synth_blobs(specs: &[BlobSpec], seed: u64) -> Result<FeatureDataset> {
    let dim = specs
        .first()
        .map(|s| s.center.len())
        .ok_or_else(|| Error::InvalidParam("at least one blob is required".into()))?;
    if dim == 0 {
        return Err(Error::InvalidParam("blob centers must be non-empty".into()));
    }
    for (i, s) in specs.iter().enumerate() {
        if s.center.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: s.center.len(),
            });
        }
        if s.count == 0 {
            return Err(Error::InvalidParam(format!("blob {i} has zero count")));
        }
        if !(s.stddev >= 0.0 && s.stddev.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "blob {i} has invalid stddev {}",
                s.stddev
            )));
        }
        if s.center.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParam(format!("blob {i} center is not finite")));
        }
    }

    draw(specs, dim, seed)
}

/// Samples every blob without the count check; zero-count blobs keep their
/// class slot.
pub(super) fn draw(specs: &[BlobSpec], dim: usize, seed: u64) -> Result<FeatureDataset> {
    let names: Vec<String> = specs
        .iter()
        .enumerate()
        .map(|(i, s)| s.name.clone().unwrap_or_else(|| format!("class{i}")))
        .collect();
    let total: usize = specs.iter().map(|s| s.count).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(total * dim);
    let mut labels = Vec::with_capacity(total);
    for (class, s) in specs.iter().enumerate() {
        for _ in 0..s.count {
            for &c in &s.center {
                let z: f64 = StandardNormal.sample(&mut rng);
                features.push(c + s.stddev * z);
            }
            labels.push(class);
        }
    }
    FeatureDataset::new(features, dim, labels, names)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_follow_spec() {
        let ds = synth_blobs(
            &[
                BlobSpec::new(vec![0.0, 0.0], 1.0, 1000),
                BlobSpec::new(vec![5.0, 5.0], 1.0, 50),
            ],
            7,
        )
        .unwrap();
        assert_eq!(ds.distribution().counts, vec![1000, 50]);
    }

    #[test]
    fn zero_stddev_collapses_to_center() {
        let ds = synth_blobs(&[BlobSpec::new(vec![1.5, -2.0], 0.0, 20)], 1).unwrap();
        assert!(ds.rows().all(|r| r == [1.5, -2.0]));
    }

    #[test]
    fn sample_mean_concentrates() {
        let n = 10_000;
        let sd = 2.0;
        let center = vec![3.0, -1.0, 0.5];
        let ds = synth_blobs(&[BlobSpec::new(center.clone(), sd, n)], 11).unwrap();
        for (j, &c) in center.iter().enumerate() {
            let mean = ds.rows().map(|r| r[j]).sum::<f64>() / n as f64;
            assert!((mean - c).abs() <= 5.0 * sd / (n as f64).sqrt(), "coord {j}: {mean}");
        }
    }

    #[test]
    fn deterministic_and_validated() {
        let spec = [BlobSpec::new(vec![0.0], 1.0, 5)];
        assert_eq!(synth_blobs(&spec, 3).unwrap(), synth_blobs(&spec, 3).unwrap());
        assert!(synth_blobs(&[BlobSpec::new(vec![0.0], -1.0, 5)], 0).is_err());
        assert!(synth_blobs(&[BlobSpec::new(vec![0.0], 1.0, 0)], 0).is_err());
        assert!(synth_blobs(&[], 0).is_err());
    }
}
