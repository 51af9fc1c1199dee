//! Two-component PCA for looking at class structure in feature space.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::FeatureDataset;
use crate::error::{Error, Result};

pub const POWER_TOLERANCE: f64 = 1e-10;
pub const POWER_MAX_ITERATIONS: usize = 10_000;

/// Mean, top-two principal axes and their variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca2 {
    pub mean: Vec<f64>,
    pub components: [Vec<f64>; 2],
    /// Eigenvalues of the sample covariance, largest first.
    pub explained_variance: [f64; 2],
}

/// Dense symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::InvalidParam(format!(
                "{} entries do not form a {dim}x{dim} matrix",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    fn mul_vec(&self, v: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.data[i * self.dim..(i + 1) * self.dim];
            *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }

    /// `self - lambda * v v^T`.
    fn deflate(&mut self, lambda: f64, v: &[f64]) {
        for i in 0..self.dim {
            for j in 0..self.dim {
                self.data[i * self.dim + j] -= lambda * v[i] * v[j];
            }
        }
    }
}

/// Sample covariance (divisor N-1) and column means.
pub fn covariance(ds: &FeatureDataset) -> Result<(Vec<f64>, SymMatrix)> {
    let n = ds.n_rows();
    if n < 2 {
        return Err(Error::InvalidData("covariance needs at least two rows".into()));
    }
    let d = ds.n_features();
    let mut mean = vec![0.0; d];
    for row in ds.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = vec![0.0; d * d];
    let mut centered = vec![0.0; d];
    for row in ds.rows() {
        for ((c, v), m) in centered.iter_mut().zip(row).zip(&mean) {
            *c = v - m;
        }
        for i in 0..d {
            let ci = centered[i];
            for j in i..d {
                cov[i * d + j] += ci * centered[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = cov[i * d + j] / (n - 1) as f64;
            cov[i * d + j] = v;
            cov[j * d + i] = v;
        }
    }
    Ok((mean, SymMatrix { dim: d, data: cov }))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Removes the components along each (unit) vector in `basis`.
fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let p = dot(v, b);
        v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
    }
}

/// Flips `v` so its largest-magnitude entry (first on ties) is positive.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Deterministic unit start vector orthogonal to `found`: the normalized
/// all-ones vector if it survives, otherwise the best surviving basis vector.
fn start_vector(dim: usize, found: &[Vec<f64>]) -> Vec<f64> {
    let mut v = vec![1.0 / (dim as f64).sqrt(); dim];
    orthogonalize(&mut v, found);
    if norm(&v) > 1e-6 {
        let n = norm(&v);
        v.iter_mut().for_each(|x| *x /= n);
        return v;
    }
    let mut best: Option<Vec<f64>> = None;
    for j in 0..dim {
        let mut e = vec![0.0; dim];
        e[j] = 1.0;
        orthogonalize(&mut e, found);
        if best.as_ref().is_none_or(|b| norm(&e) > norm(b)) {
            best = Some(e);
        }
    }
    let mut v = best.expect("dim >= 1");
    let n = norm(&v);
    v.iter_mut().for_each(|x| *x /= n);
    v
}

/// Leading `count` eigenpairs of a positive semidefinite matrix by power
/// iteration with deflation. Eigenvalues come back in decreasing order;
/// each eigenvector is unit length with the sign convention of [`fix_sign`].
pub fn top_eigenpairs(matrix: &SymMatrix, count: usize) -> Vec<(f64, Vec<f64>)> {
    let dim = matrix.dim;
    let mut work = matrix.clone();
    let scale = matrix.trace().abs().max(f64::MIN_POSITIVE);
    let mut found: Vec<Vec<f64>> = Vec::new();
    let mut out = Vec::with_capacity(count);
    let mut w = vec![0.0; dim];
    for _ in 0..count.min(dim) {
        let mut v = start_vector(dim, &found);
        let mut lambda = 0.0;
        for _ in 0..POWER_MAX_ITERATIONS {
            work.mul_vec(&v, &mut w);
            orthogonalize(&mut w, &found);
            let n = norm(&w);
            if n <= 1e-13 * scale {
                // Remaining spectrum is numerically zero; keep `v` as the axis.
                lambda = 0.0;
                break;
            }
            let diff = w
                .iter()
                .zip(&v)
                .map(|(a, b)| (a / n - b).powi(2))
                .sum::<f64>()
                .sqrt();
            v.iter_mut().zip(&w).for_each(|(x, y)| *x = y / n);
            lambda = n;
            if diff < POWER_TOLERANCE {
                break;
            }
        }
        if lambda > 0.0 {
            work.mul_vec(&v, &mut w);
            lambda = dot(&v, &w).max(0.0);
        }
        fix_sign(&mut v);
        work.deflate(lambda, &v);
        found.push(v.clone());
        out.push((lambda, v));
    }
    out
}

pub fn pca2_fit(ds: &FeatureDataset) -> Result<Pca2> {
    if ds.n_rows() < 3 {
        return Err(Error::InvalidData("PCA needs at least three rows".into()));
    }
    if ds.n_features() < 2 {
        return Err(Error::InvalidData("PCA needs at least two features".into()));
    }
    let (mean, cov) = covariance(ds)?;
    if cov.trace() <= 0.0 {
        return Err(Error::InvalidData("all rows are identical; nothing to project".into()));
    }
    let mut pairs = top_eigenpairs(&cov, 2).into_iter();
    let (l1, c1) = pairs.next().expect("two eigenpairs");
    let (l2, c2) = pairs.next().expect("two eigenpairs");
    Ok(Pca2 {
        mean,
        components: [c1, c2],
        explained_variance: [l1, l2.min(l1)],
    })
}

/// Projected coordinates with the labels and synthetic flags they came with.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub coords: Vec<[f64; 2]>,
    pub labels: Vec<usize>,
    pub synthetic: Vec<bool>,
    pub class_names: Vec<String>,
}

pub fn pca2_project(model: &Pca2, ds: &FeatureDataset) -> Result<Projection> {
    if ds.n_features() != model.mean.len() {
        return Err(Error::DimensionMismatch {
            expected: model.mean.len(),
            got: ds.n_features(),
        });
    }
    let coords = ds
        .rows()
        .map(|row| {
            let mut out = [0.0; 2];
            for (o, comp) in out.iter_mut().zip(&model.components) {
                *o = row
                    .iter()
                    .zip(&model.mean)
                    .zip(comp)
                    .map(|((x, m), c)| (x - m) * c)
                    .sum();
            }
            out
        })
        .collect();
    Ok(Projection {
        coords,
        labels: ds.labels().to_vec(),
        synthetic: (0..ds.n_rows()).map(|i| ds.is_synthetic(i)).collect(),
        class_names: ds.class_names().to_vec(),
    })
}

/// Fixed palette, indexed by class.
pub const PALETTE: [&str; 16] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#393b79", "#637939", "#8c6d31", "#843c39", "#7b4173", "#3182bd",
];

/// CSV with header `pc1,pc2,label,is_synthetic`.
pub fn write_scatter_csv<W: Write>(p: &Projection, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(["pc1", "pc2", "label", "is_synthetic"]).map_err(err)?;
    for ((c, &l), &s) in p.coords.iter().zip(&p.labels).zip(&p.synthetic) {
        w.write_record([
            c[0].to_string(),
            c[1].to_string(),
            p.class_names[l].clone(),
            s.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))
}

/// Static SVG scatter. Synthetic points are drawn hollow.
pub fn scatter_svg(p: &Projection, title: &str) -> String {
    const W: f64 = 720.0;
    const H: f64 = 540.0;
    const PAD: f64 = 40.0;
    const LEGEND: f64 = 150.0;
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for c in &p.coords {
        x0 = x0.min(c[0]);
        x1 = x1.max(c[0]);
        y0 = y0.min(c[1]);
        y1 = y1.max(c[1]);
    }
    let span_x = (x1 - x0).max(1e-12);
    let span_y = (y1 - y0).max(1e-12);
    let plot_w = W - LEGEND - 2.0 * PAD;
    let plot_h = H - 2.0 * PAD;
    let sx = |x: f64| PAD + (x - x0) / span_x * plot_w;
    let sy = |y: f64| H - PAD - (y - y0) / span_y * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{PAD}" y="24" font-family="sans-serif" font-size="14">{}</text>"#,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r##"<rect x="{PAD}" y="{PAD}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#999"/>"##
    );
    for ((c, &l), &synthetic) in p.coords.iter().zip(&p.labels).zip(&p.synthetic) {
        let color = PALETTE[l % PALETTE.len()];
        let fill = if synthetic { "none" } else { color };
        let _ = writeln!(
            svg,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{fill}" stroke="{color}" stroke-width="0.8" fill-opacity="0.7"/>"#,
            sx(c[0]),
            sy(c[1])
        );
    }
    let lx = W - LEGEND + 10.0;
    for (i, name) in p.class_names.iter().enumerate() {
        let y = PAD + 16.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<circle cx="{lx}" cy="{y}" r="4" fill="{}"/><text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text>"#,
            PALETTE[i % PALETTE.len()],
            lx + 10.0,
            y + 4.0,
            escape(name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
