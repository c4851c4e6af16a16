//! Numerical checks of the game's equilibria.
//!
//! For a fixed encoder the best discriminator outputs
//! `α(e, e') = Σ_ij p(i|e) p(j|e') A_ij`, and the resulting loss
//! `E_{e,e'} H(α(e, e'))` never exceeds `H(E[A_ij])`. The checkers below test
//! the per-graph conditions under which that ceiling is reached, on densities
//! discretized over a shared set of bins.

mod density;

pub use density::{estimate_density, Axis, DensityEstimate, GridSpec};

use serde::{Deserialize, Serialize};

use crate::error::{GrdaError, Result};
use crate::graph::DomainGraph;
use crate::tensor::scalar::binary_entropy_unchecked;

const SIMPLEX_TOL: f64 = 1e-9;

/// `p(u | e)` over the `N` domains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainPosterior(Vec<f64>);

impl DomainPosterior {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() || p.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(GrdaError::input("posterior entries must be finite and non-negative"));
        }
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > SIMPLEX_TOL {
            return Err(GrdaError::input(format!("posterior sums to {s}, not 1")));
        }
        Ok(Self(p))
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Output probability of the best discriminator for a pair of encodings
/// with domain posteriors `p` and `q`.
pub fn optimal_disc_response(p: &DomainPosterior, q: &DomainPosterior, graph: &DomainGraph) -> Result<f64> {
    let n = graph.n();
    if p.len() != n || q.len() != n {
        return Err(GrdaError::input(format!(
            "posteriors of sizes {} and {} for a graph on {n} nodes",
            p.len(),
            q.len()
        )));
    }
    let mut s = 0.0;
    for i in 0..n {
        for j in graph.neighbors(i) {
            s += p.0[i] * q.0[j];
        }
    }
    Ok(s)
}

/// `p(u | bin)` from per-domain masses and the domain prior.
pub fn posterior(density: &DensityEstimate, bin: usize) -> Result<DomainPosterior> {
    let m = density.marginal(bin)?;
    if m <= 0.0 {
        return Err(GrdaError::UndefinedPosterior(format!("bin {bin} has zero mass")));
    }
    let w = density.weights();
    let p: Vec<f64> = (0..density.n_domains()).map(|i| density.mass(i, bin) * w[i] / m).collect();
    let s: f64 = p.iter().sum();
    DomainPosterior::new(p.into_iter().map(|v| v / s).collect())
}

pub fn alpha(density: &DensityEstimate, graph: &DomainGraph, bin: usize, bin2: usize) -> Result<f64> {
    check_size(density, graph)?;
    optimal_disc_response(&posterior(density, bin)?, &posterior(density, bin2)?, graph)
}

fn check_size(density: &DensityEstimate, graph: &DomainGraph) -> Result<()> {
    if density.n_domains() != graph.n() {
        return Err(GrdaError::input(format!(
            "density over {} domains for a graph on {} nodes",
            density.n_domains(),
            graph.n()
        )));
    }
    Ok(())
}

/// `E[A_ij]` for `i, j` drawn independently from the domain prior.
pub fn expected_adjacency(density: &DensityEstimate, graph: &DomainGraph) -> Result<f64> {
    check_size(density, graph)?;
    let w = density.weights();
    Ok(graph.edges().iter().map(|&(i, j)| 2.0 * w[i] * w[j]).sum())
}

/// `H(E[A_ij])`.
pub fn ceiling(density: &DensityEstimate, graph: &DomainGraph) -> Result<f64> {
    Ok(binary_entropy_unchecked(expected_adjacency(density, graph)?))
}

/// Discriminator loss under the best response, `Σ p(e) p(e') H(α(e, e'))`.
pub fn optimal_game_value(density: &DensityEstimate, graph: &DomainGraph) -> Result<f64> {
    check_size(density, graph)?;
    let n = graph.n();
    let mut support = Vec::new();
    for b in 0..density.n_bins() {
        let m = density.marginal(b)?;
        if m > 0.0 {
            let post = posterior(density, b)?;
            let mut a_post = vec![0.0; n];
            for (i, slot) in a_post.iter_mut().enumerate() {
                *slot = graph.neighbors(i).map(|j| post.0[j]).sum();
            }
            support.push((m, post, a_post));
        }
    }
    let mut total = 0.0;
    for (m1, p1, _) in &support {
        for (m2, _, a2) in &support {
            let a: f64 = p1.0.iter().zip(a2).map(|(x, y)| x * y).sum();
            total += m1 * m2 * binary_entropy_unchecked(a.clamp(0.0, 1.0));
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    LemmaOracle,
    Ceiling,
    Clique,
    Star,
    Chain,
    Chain3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub kind: CheckKind,
    pub residual: f64,
    pub tolerance: f64,
    pub verdict: bool,
    /// Bin (or bin pair) with the largest violation.
    pub worst_bins: Vec<usize>,
    pub grid: String,
    pub notes: Vec<String>,
}

impl EquilibriumReport {
    fn new(kind: CheckKind, residual: f64, worst_bins: Vec<usize>, tol: f64, density: Option<&DensityEstimate>) -> Self {
        Self {
            kind,
            residual,
            tolerance: tol,
            verdict: residual <= tol,
            worst_bins,
            grid: density.map(DensityEstimate::grid_description).unwrap_or_else(|| "none".into()),
            notes: density.map(|d| d.notes().to_vec()).unwrap_or_default(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn argmax_residual(values: impl Iterator<Item = (f64, Vec<usize>)>) -> (f64, Vec<usize>) {
    let mut best = (0.0, Vec::new());
    for (r, at) in values {
        if r > best.0 || best.1.is_empty() {
            best = (r, at);
        }
    }
    best
}

/// All domains share one density.
pub fn check_clique(density: &DensityEstimate, graph: &DomainGraph, tol: f64) -> Result<EquilibriumReport> {
    check_size(density, graph)?;
    if !graph.is_clique() {
        return Err(GrdaError::input("clique check needs a complete graph"));
    }
    let n = graph.n();
    let (r, at) = argmax_residual((0..density.n_bins()).map(|b| {
        let col: Vec<f64> = (0..n).map(|i| density.mass(i, b)).collect();
        let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
        (hi - lo, vec![b])
    }));
    Ok(EquilibriumReport::new(CheckKind::Clique, r, at, tol, Some(density)))
}

/// The center (node 0) carries the average of the peripheral densities.
pub fn check_star(density: &DensityEstimate, graph: &DomainGraph, tol: f64) -> Result<EquilibriumReport> {
    check_size(density, graph)?;
    if !graph.is_star() {
        return Err(GrdaError::input("star check needs a star centered on node 0"));
    }
    let n = graph.n();
    let (r, at) = argmax_residual((0..density.n_bins()).map(|b| {
        let mean = (1..n).map(|i| density.mass(i, b)).sum::<f64>() / (n - 1) as f64;
        ((density.mass(0, b) - mean).abs(), vec![b])
    }));
    Ok(EquilibriumReport::new(CheckKind::Star, r, at, tol, Some(density)))
}

/// `Σ_i [p_i(e) p_{i+1}(e') + p_i(e') p_{i+1}(e)] / (p(e) p(e')) = 2(N-1)`
/// over all bin pairs with positive marginal mass.
pub fn check_chain(density: &DensityEstimate, graph: &DomainGraph, tol: f64) -> Result<EquilibriumReport> {
    check_size(density, graph)?;
    if !graph.is_chain() {
        return Err(GrdaError::input("chain check needs the path 0-1-...-(N-1)"));
    }
    let n = graph.n();
    let nb = density.n_bins();
    let plain: Vec<f64> = (0..nb).map(|b| (0..n).map(|i| density.mass(i, b)).sum::<f64>() / n as f64).collect();
    let target = 2.0 * (n - 1) as f64;
    let live: Vec<usize> = (0..nb).filter(|&b| plain[b] > 0.0).collect();
    let mut best = (0.0, Vec::new());
    for &b in &live {
        for &c in &live {
            let s: f64 = (0..n - 1)
                .map(|i| {
                    density.mass(i, b) * density.mass(i + 1, c) + density.mass(i, c) * density.mass(i + 1, b)
                })
                .sum();
            let r = (s / (plain[b] * plain[c]) - target).abs();
            if r > best.0 || best.1.is_empty() {
                best = (r, vec![b, c]);
            }
        }
    }
    let mut report = EquilibriumReport::new(CheckKind::Chain, best.0, best.1, tol, Some(density));
    report.notes.push("bins with zero mass are excluded".into());
    Ok(report)
}

/// The middle of a three-node chain is the average of its ends.
pub fn check_chain3(density: &DensityEstimate, graph: &DomainGraph, tol: f64) -> Result<EquilibriumReport> {
    check_size(density, graph)?;
    if graph.n() != 3 || !graph.is_chain() {
        return Err(GrdaError::input("chain-3 check needs the path 0-1-2"));
    }
    let (r, at) = argmax_residual((0..density.n_bins()).map(|b| {
        let mid = 0.5 * (density.mass(0, b) + density.mass(2, b));
        ((density.mass(1, b) - mid).abs(), vec![b])
    }));
    Ok(EquilibriumReport::new(CheckKind::Chain3, r, at, tol, Some(density)))
}

/// Distance of the best-response loss from `H(E[A_ij])`.
pub fn check_ceiling(density: &DensityEstimate, graph: &DomainGraph, tol: f64) -> Result<EquilibriumReport> {
    let value = optimal_game_value(density, graph)?;
    let top = ceiling(density, graph)?;
    let mut report = EquilibriumReport::new(CheckKind::Ceiling, (top - value).abs(), Vec::new(), tol, Some(density));
    report.notes.push(format!("game value {value:.12}, ceiling {top:.12}"));
    Ok(report)
}

/// Reproduces a hand-computed best response on a three-node chain.
pub fn lemma_self_test() -> Result<EquilibriumReport> {
    let g = DomainGraph::chain(3)?;
    let p = DomainPosterior::new(vec![0.1, 0.3, 0.6])?;
    let q = DomainPosterior::new(vec![0.7, 0.2, 0.1])?;
    let v = optimal_disc_response(&p, &q, &g)?;
    let mut report = EquilibriumReport::new(CheckKind::LemmaOracle, (v - 0.38).abs(), Vec::new(), 1e-12, None);
    report.notes.push(format!("chain-3 response {v}, expected 0.38"));
    Ok(report)
}

/// Every checker that applies to `graph`, plus the ceiling test.
pub fn verify_all(density: &DensityEstimate, graph: &DomainGraph, tol: f64) -> Result<Vec<EquilibriumReport>> {
    let mut out = vec![check_ceiling(density, graph, tol)?];
    if graph.is_clique() {
        out.push(check_clique(density, graph, tol)?);
    }
    if graph.is_star() {
        out.push(check_star(density, graph, tol)?);
    }
    if graph.is_chain() {
        out.push(check_chain(density, graph, tol)?);
        if graph.n() == 3 {
            out.push(check_chain3(density, graph, tol)?);
        }
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct AnalyticDoc {
    graph: DomainGraph,
    p: Vec<Vec<f64>>,
}

/// Reads `{"graph": {"n", "edges"}, "p": [[...], ...]}`.
pub fn analytic_from_json(s: &str) -> Result<(DomainGraph, DensityEstimate)> {
    let doc: AnalyticDoc = serde_json::from_str(s)?;
    let d = DensityEstimate::new(doc.p)?;
    check_size(&d, &doc.graph)?;
    Ok((doc.graph, d))
}

pub fn analytic_to_json(graph: &DomainGraph, density: &DensityEstimate) -> Result<String> {
    let p = (0..density.n_domains()).map(|i| density.masses(i).to_vec()).collect();
    Ok(serde_json::to_string_pretty(&AnalyticDoc { graph: graph.clone(), p })?)
}
