use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{GrdaError, Result};

const MASS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl Axis {
    fn index(&self, v: f64) -> usize {
        let t = (v - self.lo) / (self.hi - self.lo);
        ((t * self.bins as f64).floor().max(0.0) as usize).min(self.bins - 1)
    }
}

/// Histogram settings for [`estimate_density`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub bins_per_axis: usize,
    /// Fraction of each axis' data range added on both sides.
    pub margin: f64,
    /// Weight domains by their sample share instead of rejecting unequal
    /// sample counts.
    pub reweight: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { bins_per_axis: 32, margin: 0.05, reweight: false }
    }
}

/// Per-domain probability masses over a shared set of bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    p: Vec<Vec<f64>>,
    weights: Vec<f64>,
    axes: Vec<Axis>,
    notes: Vec<String>,
}

impl DensityEstimate {
    /// Masses on abstract bins with a uniform domain prior.
    pub fn new(p: Vec<Vec<f64>>) -> Result<Self> {
        let n = p.len();
        if n == 0 {
            return Err(GrdaError::input("density needs at least one domain"));
        }
        let bins = p[0].len();
        if bins == 0 {
            return Err(GrdaError::input("density needs at least one bin"));
        }
        for (i, row) in p.iter().enumerate() {
            if row.len() != bins {
                return Err(GrdaError::dim(format!("domain {i} has {} bins, expected {bins}", row.len())));
            }
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(GrdaError::input(format!("domain {i} has a negative or non-finite mass")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > MASS_TOL {
                return Err(GrdaError::input(format!("domain {i} masses sum to {s}")));
            }
        }
        Ok(Self { p, weights: vec![1.0 / n as f64; n], axes: Vec::new(), notes: Vec::new() })
    }

    /// Replaces the domain prior; `w` is normalized to sum to one.
    pub fn with_weights(mut self, w: Vec<f64>) -> Result<Self> {
        if w.len() != self.n_domains() || w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(GrdaError::input("domain weights must be one non-negative value per domain"));
        }
        let s: f64 = w.iter().sum();
        if s <= 0.0 {
            return Err(GrdaError::input("domain weights sum to zero"));
        }
        self.weights = w.into_iter().map(|v| v / s).collect();
        Ok(self)
    }

    pub fn n_domains(&self) -> usize {
        self.p.len()
    }

    pub fn n_bins(&self) -> usize {
        self.p[0].len()
    }

    pub fn mass(&self, domain: usize, bin: usize) -> f64 {
        self.p[domain][bin]
    }

    pub fn masses(&self, domain: usize) -> &[f64] {
        &self.p[domain]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn notes(&self) -> &[String] {
        &self.notes
    }

    pub fn add_note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    /// `p(e) = Σ_i p(u=i) p_i(e)`.
    pub fn marginal(&self, bin: usize) -> Result<f64> {
        if bin >= self.n_bins() {
            return Err(GrdaError::input(format!("bin {bin} outside 0..{}", self.n_bins())));
        }
        Ok(self.p.iter().zip(&self.weights).map(|(row, w)| w * row[bin]).sum())
    }

    pub fn grid_description(&self) -> String {
        if self.axes.is_empty() {
            format!("{} abstract bins", self.n_bins())
        } else {
            let parts: Vec<String> =
                self.axes.iter().map(|a| format!("{} bins on [{:.4}, {:.4}]", a.bins, a.lo, a.hi)).collect();
            parts.join(" x ")
        }
    }
}

/// Projection of rows onto the top two principal components of the pool.
fn pca2(rows: &[&[f64]]) -> Vec<[f64; 2]> {
    let d = rows[0].len();
    let n = rows.len() as f64;
    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r.iter()) {
            *m += v / n;
        }
    }
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for r in rows {
        for a in 0..d {
            for b in 0..d {
                cov[(a, b)] += (r[a] - mean[a]) * (r[b] - mean[b]) / n;
            }
        }
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let comps: Vec<Vec<f64>> = order[..2]
        .iter()
        .map(|&c| {
            let mut v: Vec<f64> = eig.eigenvectors.column(c).iter().copied().collect();
            // Fix the sign so the largest-magnitude entry is positive.
            let big = v.iter().cloned().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
            if big < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        })
        .collect();
    rows.iter()
        .map(|r| {
            let mut out = [0.0; 2];
            for (slot, c) in out.iter_mut().zip(&comps) {
                *slot = r.iter().zip(&mean).zip(c).map(|((x, m), w)| (x - m) * w).sum();
            }
            out
        })
        .collect()
}

/// Per-domain histograms over a grid that covers every encoding. Encodings
/// wider than two dimensions are first projected onto the top two principal
/// components of all encodings pooled.
pub fn estimate_density(encodings: &[Vec<Vec<f64>>], spec: &GridSpec) -> Result<DensityEstimate> {
    if encodings.is_empty() {
        return Err(GrdaError::input("no domains to estimate"));
    }
    if spec.bins_per_axis == 0 || !(spec.margin >= 0.0) {
        return Err(GrdaError::input("grid needs positive bins and a non-negative margin"));
    }
    if let Some(i) = encodings.iter().position(Vec::is_empty) {
        return Err(GrdaError::input(format!("domain {i} has no encodings")));
    }
    let d = encodings[0][0].len();
    if d == 0 || encodings.iter().flatten().any(|e| e.len() != d || e.iter().any(|v| !v.is_finite())) {
        return Err(GrdaError::input("encodings must share one positive width and be finite"));
    }
    let counts: Vec<usize> = encodings.iter().map(Vec::len).collect();
    let (lo_c, hi_c) = (*counts.iter().min().unwrap(), *counts.iter().max().unwrap());
    let mut notes = Vec::new();
    if hi_c as f64 > 1.1 * lo_c as f64 {
        if !spec.reweight {
            return Err(GrdaError::input(format!(
                "domain sample counts range from {lo_c} to {hi_c}; enable reweighting to accept this"
            )));
        }
        notes.push("domain prior reweighted by empirical sample shares".to_string());
    }

    let pooled: Vec<&[f64]> = encodings.iter().flatten().map(Vec::as_slice).collect();
    let points: Vec<Vec<f64>> = if d > 2 {
        notes.push(format!(
            "{d}-dimensional encodings projected onto their top two principal components; \
             conditions are checked on the projected density only"
        ));
        pca2(&pooled).into_iter().map(|p| p.to_vec()).collect()
    } else {
        pooled.iter().map(|p| p.to_vec()).collect()
    };
    let dims = points[0].len();
    let axes: Vec<Axis> = (0..dims)
        .map(|a| {
            let lo = points.iter().map(|p| p[a]).fold(f64::INFINITY, f64::min);
            let hi = points.iter().map(|p| p[a]).fold(f64::NEG_INFINITY, f64::max);
            let width = hi - lo;
            let pad = if width > 0.0 { spec.margin * width } else { 0.5 };
            Axis { lo: lo - pad, hi: hi + pad, bins: spec.bins_per_axis }
        })
        .collect();
    let n_bins: usize = axes.iter().map(|a| a.bins).product();
    let mut p = Vec::with_capacity(encodings.len());
    let mut offset = 0;
    for &count in &counts {
        let mut row = vec![0.0; n_bins];
        for pt in &points[offset..offset + count] {
            let mut idx = 0;
            for (a, axis) in axes.iter().enumerate() {
                idx = idx * axis.bins + axis.index(pt[a]);
            }
            row[idx] += 1.0 / count as f64;
        }
        p.push(row);
        offset += count;
    }
    // Re-sum to absorb rounding from repeated 1/count additions.
    for row in &mut p {
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= s);
    }
    let mut est = DensityEstimate::new(p)?;
    if spec.reweight {
        est = est.with_weights(counts.iter().map(|&c| c as f64).collect())?;
    }
    est.axes = axes;
    est.notes = notes;
    Ok(est)
}
