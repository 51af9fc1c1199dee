//! Per-class image counts of the 16-class vehicle corpus, by source.

use super::synth::{draw, BlobSpec};
use super::FeatureDataset;
use crate::error::Result;

pub const VEHICLE_CLASSES: [&str; 16] = [
    "Ambulance",
    "Barge",
    "Bicycle",
    "Boat",
    "Bus",
    "Car",
    "Cart",
    "Helicopter",
    "Limousine",
    "Motorcycle",
    "Segway",
    "Snowmobile",
    "Tank",
    "Taxi",
    "Truck",
    "Van",
];

/// Kaggle (original), ImageNet and web-crawled image pools.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VehicleSource {
    Kaggle,
    ImageNet,
    WebCrawl,
}

impl VehicleSource {
    pub const ALL: [VehicleSource; 3] = [Self::Kaggle, Self::ImageNet, Self::WebCrawl];

    /// Training-image counts in [`VEHICLE_CLASSES`] order.
    pub fn train_counts(self) -> [usize; 16] {
        match self {
            Self::Kaggle => [
                88, 160, 1496, 7909, 1782, 5390, 22, 517, 11, 2189, 88, 77, 121, 527, 1474, 715,
            ],
            Self::ImageNet => [
                1300, 0, 1300, 0, 1300, 0, 2600, 0, 1300, 0, 0, 1300, 1300, 1300, 1300, 2459,
            ],
            Self::WebCrawl => [0, 270, 0, 0, 0, 0, 0, 232, 0, 0, 232, 0, 0, 0, 0, 0],
        }
    }

    /// Test-image counts in [`VEHICLE_CLASSES`] order.
    pub fn test_counts(self) -> [usize; 16] {
        match self {
            Self::Kaggle => [
                44, 42, 122, 786, 351, 1391, 29, 151, 63, 797, 65, 46, 85, 221, 559, 396,
            ],
            Self::ImageNet => [50, 0, 50, 0, 50, 0, 100, 0, 50, 0, 0, 50, 50, 50, 50, 100],
            Self::WebCrawl => [0; 16],
        }
    }

    /// Summed training counts over several sources.
    pub fn combined_train_counts(sources: &[VehicleSource]) -> [usize; 16] {
        let mut out = [0; 16];
        for s in sources {
            for (o, c) in out.iter_mut().zip(s.train_counts()) {
                *o += c;
            }
        }
        out
    }
}

/// Stand-in feature rows with exactly the given per-class counts.
///
/// Class `c` is a Gaussian blob centred at `c * spacing` along every axis.
pub fn materialize_counts(
    names: &[&str],
    counts: &[usize],
    dim: usize,
    spacing: f64,
    seed: u64,
) -> Result<FeatureDataset> {
    let specs: Vec<BlobSpec> = names
        .iter()
        .zip(counts)
        .enumerate()
        .map(|(c, (name, &count))| BlobSpec {
            name: Some((*name).to_owned()),
            center: vec![c as f64 * spacing; dim],
            stddev: 1.0,
            count,
        })
        .collect();
    draw(&specs, dim, seed)
}
