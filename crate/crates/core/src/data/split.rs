use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::FeatureDataset;
use crate::error::{Error, Result};

/// Train/validation partition of a parent dataset.
#[derive(Debug, Clone)]
pub struct SplitPair {
    pub train: FeatureDataset,
    pub val: FeatureDataset,
    /// Parent row indices of `train`, ascending.
    pub train_rows: Vec<usize>,
    /// Parent row indices of `val`, ascending.
    pub val_rows: Vec<usize>,
    /// Classes that ended up with no validation rows.
    pub train_only_classes: Vec<usize>,
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor().max(0.0) as usize
}

fn check_fraction(train_fraction: f64) -> Result<()> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidParam(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    Ok(())
}

/// Per-class training counts for a stratified split.
///
/// Each class gets `round_half_up(fraction * count)`, clamped so it keeps at
/// least one training row and, when it has two or more rows, at least one
/// validation row. The total is then pulled back to
/// `round_half_up(fraction * N)` one row at a time, taking from (or giving
/// to) the classes whose rounding overshot (undershot) the most, larger
/// classes first on ties. No class moves more than once, so every class
/// stays within one row of its exact share.
pub fn stratified_train_counts(counts: &[usize], fraction: f64) -> Vec<usize> {
    let exact: Vec<f64> = counts.iter().map(|&c| fraction * c as f64).collect();
    let bounds: Vec<(usize, usize)> = counts
        .iter()
        .map(|&c| match c {
            0 => (0, 0),
            1 => (1, 1),
            _ => (1, c - 1),
        })
        .collect();
    let mut train: Vec<usize> = exact
        .iter()
        .zip(&bounds)
        .map(|(&x, &(lo, hi))| round_half_up(x).clamp(lo, hi))
        .collect();

    let total: usize = counts.iter().sum();
    let target = round_half_up(fraction * total as f64) as i64;
    let mut drift = train.iter().sum::<usize>() as i64 - target;
    if drift == 0 {
        return train;
    }
    let shrinking = drift > 0;
    let mut order: Vec<usize> = (0..counts.len())
        .filter(|&c| {
            let (lo, hi) = bounds[c];
            if shrinking {
                train[c] > lo
            } else {
                train[c] < hi
            }
        })
        .collect();
    let excess = |c: usize| {
        let e = train[c] as f64 - exact[c];
        if shrinking {
            e
        } else {
            -e
        }
    };
    order.sort_by(|&a, &b| {
        excess(b)
            .total_cmp(&excess(a))
            .then(counts[b].cmp(&counts[a]))
            .then(a.cmp(&b))
    });
    for c in order {
        if drift == 0 {
            break;
        }
        if shrinking {
            train[c] -= 1;
            drift -= 1;
        } else {
            train[c] += 1;
            drift += 1;
        }
    }
    train
}

fn assemble(ds: &FeatureDataset, mut train_rows: Vec<usize>, mut val_rows: Vec<usize>) -> SplitPair {
    train_rows.sort_unstable();
    val_rows.sort_unstable();
    let val = ds.select(&val_rows);
    let train = ds.select(&train_rows);
    let val_counts = val.distribution().counts;
    let train_only_classes = train
        .distribution()
        .counts
        .iter()
        .enumerate()
        .filter(|&(c, &n)| n > 0 && val_counts[c] == 0)
        .map(|(c, _)| c)
        .collect();
    SplitPair {
        train,
        val,
        train_rows,
        val_rows,
        train_only_classes,
    }
}

/// Splits each class separately so both halves keep the class proportions.
pub fn stratified_split(ds: &FeatureDataset, train_fraction: f64, seed: u64) -> Result<SplitPair> {
    check_fraction(train_fraction)?;
    if ds.is_empty() {
        return Err(Error::InvalidData("cannot split an empty dataset".into()));
    }
    let groups = ds.class_indices();
    let counts: Vec<usize> = groups.iter().map(Vec::len).collect();
    let quota = stratified_train_counts(&counts, train_fraction);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_rows = Vec::new();
    let mut val_rows = Vec::new();
    for (mut group, take) in groups.into_iter().zip(quota) {
        group.shuffle(&mut rng);
        train_rows.extend_from_slice(&group[..take]);
        val_rows.extend_from_slice(&group[take..]);
    }
    let pair = assemble(ds, train_rows, val_rows);
    for &c in &pair.train_only_classes {
        log::warn!(
            "class {:?} has a single row; it goes to train and is absent from validation",
            ds.class_names()[c]
        );
    }
    Ok(pair)
}

/// Class-blind split: shuffle all rows and cut at `round(fraction * N)`.
pub fn uniform_split(ds: &FeatureDataset, train_fraction: f64, seed: u64) -> Result<SplitPair> {
    check_fraction(train_fraction)?;
    if ds.is_empty() {
        return Err(Error::InvalidData("cannot split an empty dataset".into()));
    }
    let mut rows: Vec<usize> = (0..ds.n_rows()).collect();
    rows.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = round_half_up(train_fraction * ds.n_rows() as f64).min(ds.n_rows());
    let val_rows = rows.split_off(cut);
    Ok(assemble(ds, rows, val_rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(counts: &[usize]) -> FeatureDataset {
        let mut labels = Vec::new();
        for (c, &n) in counts.iter().enumerate() {
            labels.extend(std::iter::repeat_n(c, n));
        }
        let features = (0..labels.len()).map(|i| i as f64).collect();
        let names = (0..counts.len()).map(|c| format!("c{c}")).collect();
        FeatureDataset::new(features, 1, labels, names).unwrap()
    }

    #[test]
    fn exact_ratio_counts() {
        let pair = stratified_split(&dataset(&[100, 60]), 0.8, 1).unwrap();
        assert_eq!(pair.train.distribution().counts, vec![80, 48]);
        assert_eq!(pair.val.distribution().counts, vec![20, 12]);
    }

    #[test]
    fn single_row_class_goes_to_train() {
        let pair = stratified_split(&dataset(&[10, 1]), 0.8, 3).unwrap();
        assert_eq!(pair.train.distribution().counts[1], 1);
        assert_eq!(pair.val.distribution().counts[1], 0);
        assert_eq!(pair.train_only_classes, vec![1]);
    }

    #[test]
    fn two_row_class_keeps_a_validation_row() {
        assert_eq!(stratified_train_counts(&[2], 0.9), vec![1]);
    }

    #[test]
    fn same_seed_same_rows() {
        let ds = dataset(&[37, 12, 5]);
        let a = stratified_split(&ds, 0.8, 9).unwrap();
        let b = stratified_split(&ds, 0.8, 9).unwrap();
        assert_eq!(a.train_rows, b.train_rows);
        let c = stratified_split(&ds, 0.8, 10).unwrap();
        assert_ne!(a.train_rows, c.train_rows);
    }

    #[test]
    fn drift_is_absorbed_within_one_row() {
        // Every class rounds up from x.5, overshooting the total by 2.
        let counts = [5, 5, 5, 5];
        let train = stratified_train_counts(&counts, 0.5);
        assert_eq!(train.iter().sum::<usize>(), 10);
        for t in train {
            assert!((t as f64 - 2.5).abs() <= 1.0);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(stratified_split(&dataset(&[3]), 1.0, 0).is_err());
        assert!(stratified_split(&dataset(&[3]).empty_like(), 0.5, 0).is_err());
    }

    #[test]
    fn uniform_split_sizes() {
        let pair = uniform_split(&dataset(&[50, 50]), 0.8, 4).unwrap();
        assert_eq!(pair.train.n_rows(), 80);
        assert_eq!(pair.val.n_rows(), 20);
    }
}
