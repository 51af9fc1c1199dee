//! Independent reference implementations and data generators shared by the
//! integration tests. Nothing here calls into the code under test except to
//! build datasets.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rbml_core::FeatureDataset;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn names(k: usize) -> Vec<String> {
    (0..k).map(|c| format!("c{c}")).collect()
}

/// Small random dataset. Features are drawn from a coarse grid so that
/// repeated values and tied splits occur.
pub fn random_dataset(rng: &mut ChaCha8Rng, max_n: usize, max_d: usize, k: usize) -> FeatureDataset {
    let n = rng.random_range(1..=max_n);
    let d = rng.random_range(1..=max_d);
    let levels = rng.random_range(2..=12);
    let features: Vec<f64> = (0..n * d)
        .map(|_| rng.random_range(0..levels) as f64 * 0.5 - 1.0)
        .collect();
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
    FeatureDataset::new(features, d, labels, names(k)).unwrap()
}

pub fn random_weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0.1..2.0)).collect()
}

// ---------------------------------------------------------------------------
// Decision-tree oracles

fn mass_per_class(ds: &FeatureDataset, w: &[f64], rows: &[usize]) -> Vec<f64> {
    let mut m = vec![0.0; ds.n_classes()];
    for &r in rows {
        m[ds.label(r)] += w[r];
    }
    m
}

/// Every (feature, midpoint) split that separates `rows`, in feature then
/// threshold order.
pub fn all_splits(ds: &FeatureDataset, rows: &[usize]) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    for f in 0..ds.n_features() {
        let mut vals: Vec<f64> = rows.iter().map(|&r| ds.row(r)[f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for pair in vals.windows(2) {
            out.push((f, (pair[0] + pair[1]) / 2.0));
        }
    }
    out
}

fn partition(ds: &FeatureDataset, rows: &[usize], f: usize, t: f64) -> (Vec<usize>, Vec<usize>) {
    rows.iter().partition(|&&r| ds.row(r)[f] <= t)
}

/// Largest correctly classified weight reachable by any tree of depth at
/// most `depth` built from axis-aligned midpoint splits.
pub fn optimal_tree_mass(ds: &FeatureDataset, w: &[f64], rows: &[usize], depth: usize) -> f64 {
    let leaf = mass_per_class(ds, w, rows)
        .into_iter()
        .fold(0.0, f64::max);
    if depth == 0 {
        return leaf;
    }
    let mut best = leaf;
    for (f, t) in all_splits(ds, rows) {
        let (l, r) = partition(ds, rows, f, t);
        let m = optimal_tree_mass(ds, w, &l, depth - 1) + optimal_tree_mass(ds, w, &r, depth - 1);
        if m > best {
            best = m;
        }
    }
    best
}

fn gini(m: &[f64]) -> f64 {
    let t: f64 = m.iter().sum();
    1.0 - m.iter().map(|c| (c / t) * (c / t)).sum::<f64>()
}

/// Per-row predictions of the tree chosen by naive greedy search: at every
/// node, enumerate all splits, score each by recomputing child class masses
/// from scratch, keep the smallest weighted child Gini (earliest split wins
/// within a relative 1e-12), and recurse until pure or out of depth. Leaves
/// predict their heaviest class, lowest index on ties.
pub fn greedy_tree_predictions(ds: &FeatureDataset, w: &[f64], depth: usize) -> Vec<usize> {
    let mut pred = vec![usize::MAX; ds.n_rows()];
    let rows: Vec<usize> = (0..ds.n_rows()).filter(|&r| w[r] > 0.0).collect();
    greedy_fill(ds, w, &rows, depth, &mut pred);
    pred
}

fn greedy_fill(ds: &FeatureDataset, w: &[f64], rows: &[usize], depth: usize, pred: &mut [usize]) {
    let here = mass_per_class(ds, w, rows);
    let pure = here.iter().filter(|&&c| c > 0.0).count() <= 1;
    let mut best: Option<(f64, Vec<usize>, Vec<usize>)> = None;
    if depth > 0 && !pure {
        let total: f64 = here.iter().sum();
        for (f, t) in all_splits(ds, rows) {
            let (l, r) = partition(ds, rows, f, t);
            let ml = mass_per_class(ds, w, &l);
            let mr = mass_per_class(ds, w, &r);
            let (tl, tr): (f64, f64) = (ml.iter().sum(), mr.iter().sum());
            let score = (tl * gini(&ml) + tr * gini(&mr)) / total;
            let better = match &best {
                None => true,
                Some((b, _, _)) => score < *b && (b - score) > 1e-12 * b.abs().max(score.abs()),
            };
            if better {
                best = Some((score, l, r));
            }
        }
    }
    match best {
        Some((_, l, r)) => {
            greedy_fill(ds, w, &l, depth - 1, pred);
            greedy_fill(ds, w, &r, depth - 1, pred);
        }
        None => {
            let mut arg = 0;
            for c in 1..here.len() {
                if here[c] > here[arg] {
                    arg = c;
                }
            }
            for &r in rows {
                pred[r] = arg;
            }
        }
    }
}

/// Weighted fraction of rows whose prediction equals the label, summed in
/// row order.
pub fn weighted_hit_rate(ds: &FeatureDataset, w: &[f64], pred: &[usize]) -> f64 {
    let (mut hit, mut total) = (0.0, 0.0);
    for i in 0..ds.n_rows() {
        total += w[i];
        if pred[i] == ds.label(i) {
            hit += w[i];
        }
    }
    hit / total
}

// ---------------------------------------------------------------------------
// AUC oracle

/// Probability that a random positive outscores a random negative, ties
/// counting one half.
pub fn pair_counting_auc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut s = 0.0;
    for &p in pos {
        for &n in neg {
            s += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    s / (pos.len() * neg.len()) as f64
}

// ---------------------------------------------------------------------------
// Symmetric eigensolver oracle (cyclic Jacobi rotations)

/// All eigenpairs of a dense symmetric matrix, eigenvalues descending.
pub fn jacobi_eigen(a: &[f64], n: usize) -> Vec<(f64, Vec<f64>)> {
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|j| (m[j * n + j], (0..n).map(|i| v[i * n + j]).collect()))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    pairs
}

/// Random covariance `B Bᵀ / r` with `r` columns, so its rank is at most `r`.
pub fn random_covariance(rng: &mut ChaCha8Rng, d: usize, r: usize) -> Vec<f64> {
    let b: Vec<f64> = (0..d * r).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut c = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            c[i * d + j] = (0..r).map(|k| b[i * r + k] * b[j * r + k]).sum::<f64>() / r as f64;
        }
    }
    c
}

// ---------------------------------------------------------------------------
// SMOTE geometry oracle

/// True when `p` lies on the segment from `a` to `b` within `tol`.
pub fn on_segment(p: &[f64], a: &[f64], b: &[f64], tol: f64) -> bool {
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    let len2: f64 = ab.iter().map(|v| v * v).sum();
    if len2 == 0.0 {
        return p.iter().zip(a).all(|(x, y)| (x - y).abs() <= tol);
    }
    let t = p.iter().zip(a).zip(&ab).map(|((x, y), d)| (x - y) * d).sum::<f64>() / len2;
    if !(-tol..=1.0 + tol).contains(&t) {
        return false;
    }
    p.iter()
        .zip(a)
        .zip(&ab)
        .all(|((x, y), d)| (x - (y + t * d)).abs() <= tol * (1.0 + d.abs()))
}

/// Indices of the `k` same-class rows nearest to `i` (squared Euclidean,
/// ties by lower index), found by scanning every row.
pub fn brute_neighbors(ds: &FeatureDataset, i: usize, k: usize) -> Vec<usize> {
    let mut cands: Vec<(f64, usize)> = (0..ds.n_rows())
        .filter(|&j| j != i && ds.label(j) == ds.label(i))
        .map(|j| {
            let d = ds.row(i).iter().zip(ds.row(j)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            (d, j)
        })
        .collect();
    cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    cands.into_iter().take(k).map(|c| c.1).collect()
}

// ---------------------------------------------------------------------------
// Blob benchmarks

/// Isotropic Gaussian blobs, one centre per class. Centre `c` sits at
/// `spread` on axis `c % dim`, and also at `-spread` on the next axis once
/// the axes run out. Zero counts leave an empty class.
pub fn blobs(counts: &[usize], dim: usize, spread: f64, stddev: f64, seed: u64) -> FeatureDataset {
    let mut r = rng(seed);
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (c, &count) in counts.iter().enumerate() {
        let mut center = vec![0.0; dim];
        center[c % dim] = spread;
        if c >= dim {
            center[(c + 1) % dim] = -spread;
        }
        for _ in 0..count {
            for &m in &center {
                let z: f64 = StandardNormal.sample(&mut r);
                features.push(m + stddev * z);
            }
            labels.push(c);
        }
    }
    FeatureDataset::new(features, dim, labels, names(counts.len())).unwrap()
}
