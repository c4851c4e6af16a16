use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{Dataset, Sample, Target, TaskKind};
use crate::error::{GrdaError, Result};
use crate::graph::{sample_dg_graph, UnitVectorSet};
use crate::rng::SeededRng;
use crate::tensor::scalar::standard_normal_cdf;

/// Generative parameters of a rotating-Gaussian dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgMetadata {
    pub seed: u64,
    pub omega: Vec<f64>,
    pub unit_vectors: Vec<[f64; 2]>,
    /// Mean of the positive class per domain; the negative mean is its negation.
    pub mu_pos: Vec<[f64; 2]>,
    pub mu_neg: Vec<[f64; 2]>,
}

impl DgMetadata {
    pub fn from_unit_vectors(seed: u64, v: &UnitVectorSet) -> Self {
        let mu_pos: Vec<[f64; 2]> = (0..v.len())
            .map(|i| {
                let s = v.omega[i] / PI;
                [s * v.a[i], s * v.b[i]]
            })
            .collect();
        let mu_neg = mu_pos.iter().map(|m| [-m[0], -m[1]]).collect();
        Self {
            seed,
            omega: v.omega.clone(),
            unit_vectors: (0..v.len()).map(|i| [v.a[i], v.b[i]]).collect(),
            mu_pos,
            mu_neg,
        }
    }

    pub fn n_domains(&self) -> usize {
        self.omega.len()
    }

    /// One draw from domain `u`'s class-conditional Gaussian.
    pub fn draw(&self, u: usize, class: usize, rng: &mut SeededRng) -> Vec<f64> {
        let mu = if class == 1 { self.mu_pos[u] } else { self.mu_neg[u] };
        vec![mu[0] + rng.normal(), mu[1] + rng.normal()]
    }

    /// Accuracy of the Bayes rule in domain `u`: `Φ(|μ|)` for unit-variance
    /// classes at `±μ`.
    pub fn bayes_accuracy(&self, u: usize) -> f64 {
        let m = self.mu_pos[u];
        standard_normal_cdf((m[0] * m[0] + m[1] * m[1]).sqrt())
    }
}

/// Class of the nearer mean, `1` iff `xᵀμ_pos > 0`; ties go to class 0.
pub fn bayes_label(x: &[f64], u: usize, meta: Option<&DgMetadata>) -> Result<usize> {
    let meta = meta.ok_or_else(|| GrdaError::input("bayes rule needs generative metadata"))?;
    if u >= meta.n_domains() {
        return Err(GrdaError::input(format!("domain {u} outside 0..{}", meta.n_domains())));
    }
    if x.len() != 2 {
        return Err(GrdaError::dim(format!("expected 2 features, got {}", x.len())));
    }
    let m = meta.mu_pos[u];
    Ok(usize::from(x[0] * m[0] + x[1] * m[1] > 0.0))
}

/// Rotating-Gaussian binary classification over a sampled domain graph.
/// Each domain gets `per_domain / 2` samples of each class; `n_sources`
/// connected domains, grown by BFS from a seeded start node, are labeled.
pub fn generate_dg(n_domains: usize, per_domain: usize, n_sources: usize, seed: u64) -> Result<Dataset> {
    if n_domains < 2 {
        return Err(GrdaError::input(format!("need at least 2 domains, got {n_domains}")));
    }
    if per_domain == 0 || per_domain % 2 != 0 {
        return Err(GrdaError::input(format!("per-domain must be even and positive, got {per_domain}")));
    }
    if n_sources == 0 || n_sources >= n_domains {
        return Err(GrdaError::input(format!(
            "sources must be in 1..{n_domains}, got {n_sources}"
        )));
    }
    let (graph, vecs) = sample_dg_graph(n_domains, seed)?;
    let meta = DgMetadata::from_unit_vectors(seed, &vecs);

    let mut pick = SeededRng::stream(seed, "dg-sources");
    let start = pick.below(n_domains);
    let mut source_domains = graph.connected_set_from(start, n_sources, &mut pick)?;
    source_domains.sort_unstable();
    let target_domains: Vec<usize> = (0..n_domains).filter(|u| !source_domains.contains(u)).collect();

    let mut rng = SeededRng::stream(seed, "dg-samples");
    let mut samples = Vec::with_capacity(n_domains * per_domain);
    let mut heldout = Vec::with_capacity(n_domains * per_domain);
    for u in 0..n_domains {
        let is_source = source_domains.contains(&u);
        for class in [1usize, 0] {
            for _ in 0..per_domain / 2 {
                let x = meta.draw(u, class, &mut rng);
                let label = Target::Class(class);
                if is_source {
                    samples.push(Sample { x, y: Some(label), u });
                    heldout.push(None);
                } else {
                    samples.push(Sample { x, y: None, u });
                    heldout.push(Some(label));
                }
            }
        }
    }
    let ds = Dataset {
        graph,
        samples,
        heldout,
        source_domains,
        target_domains,
        task: TaskKind::Classification { classes: 2 },
        seed,
        dg: Some(meta),
        tpt: None,
    };
    ds.validate()?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn mean_at_quarter_turn() {
        let v = UnitVectorSet::from_angles(vec![FRAC_PI_4]);
        let m = DgMetadata::from_unit_vectors(0, &v);
        let expected = 2f64.sqrt() / 8.0;
        assert_abs_diff_eq!(m.mu_pos[0][0], expected, epsilon = 1e-15);
        assert_abs_diff_eq!(m.mu_pos[0][1], expected, epsilon = 1e-15);
        assert_abs_diff_eq!(m.mu_pos[0][0], 0.176_777, epsilon = 1e-6);
        assert_eq!(m.mu_neg[0], [-m.mu_pos[0][0], -m.mu_pos[0][1]]);
    }

    #[test]
    fn dg15_shape() {
        let ds = generate_dg(15, 100, 6, 1).unwrap();
        assert_eq!(ds.samples.len(), 1500);
        assert_eq!(ds.labeled_count(), 600);
        assert_eq!(ds.source_domains.len(), 6);
        assert!(ds.domain_counts().iter().all(|&c| c == 100));
        let meta = ds.dg.as_ref().unwrap();
        for u in 0..15 {
            assert_eq!(meta.mu_neg[u], [-meta.mu_pos[u][0], -meta.mu_pos[u][1]]);
            let pos = ds
                .domain_indices(u)
                .iter()
                .filter(|&&i| {
                    let t = ds.samples[i].y.as_ref().or(ds.heldout[i].as_ref()).unwrap();
                    t.class() == Some(1)
                })
                .count();
            assert_eq!(pos, 50);
        }
    }

    #[test]
    fn generation_is_reproducible() {
        let a = generate_dg(15, 20, 6, 9).unwrap();
        let b = generate_dg(15, 20, 6, 9).unwrap();
        assert_eq!(a, b);
        let c = generate_dg(15, 20, 6, 10).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn sources_are_connected() {
        for seed in 0..10 {
            let ds = generate_dg(15, 4, 6, seed).unwrap();
            let edges: Vec<(usize, usize)> = ds
                .graph
                .edges()
                .into_iter()
                .filter_map(|(i, j)| {
                    let a = ds.source_domains.iter().position(|&v| v == i)?;
                    let b = ds.source_domains.iter().position(|&v| v == j)?;
                    Some((a, b))
                })
                .collect();
            let sub = crate::graph::DomainGraph::from_edges(6, &edges).unwrap();
            assert!(sub.is_connected(), "seed {seed}");
        }
    }

    #[test]
    fn argument_errors() {
        assert!(generate_dg(15, 101, 6, 1).is_err());
        assert!(generate_dg(15, 100, 15, 1).is_err());
        assert!(generate_dg(15, 100, 0, 1).is_err());
        assert!(generate_dg(1, 100, 1, 1).is_err());
    }

    #[test]
    fn bayes_rule_examples() {
        let ds = generate_dg(5, 2, 2, 3).unwrap();
        let meta = ds.dg.as_ref().unwrap();
        for u in 0..5 {
            let mu = meta.mu_pos[u];
            if mu != [0.0, 0.0] {
                assert_eq!(bayes_label(&mu, u, Some(meta)).unwrap(), 1);
            }
            assert_eq!(bayes_label(&[0.0, 0.0], u, Some(meta)).unwrap(), 0);
        }
        assert!(bayes_label(&[0.0, 0.0], 0, None).is_err());
    }

    #[test]
    fn bayes_rule_beats_chance_by_monte_carlo() {
        let ds = generate_dg(15, 2, 6, 4).unwrap();
        let meta = ds.dg.as_ref().unwrap();
        let mut rng = SeededRng::new(77);
        for u in 0..15 {
            let n = 10_000;
            let mut correct = 0;
            for k in 0..n {
                let class = k % 2;
                let x = meta.draw(u, class, &mut rng);
                correct += usize::from(bayes_label(&x, u, Some(meta)).unwrap() == class);
            }
            let acc = correct as f64 / n as f64;
            let expected = meta.bayes_accuracy(u);
            assert!(acc > 0.5, "domain {u}: {acc}");
            // Monte-Carlo error of a 10k-sample proportion is about 0.005.
            assert!((acc - expected).abs() < 0.02, "domain {u}: {acc} vs {expected}");
        }
    }

    #[test]
    fn class_mean_gap_converges() {
        let ds = generate_dg(6, 10_000, 2, 5).unwrap();
        let meta = ds.dg.as_ref().unwrap();
        for u in 0..6 {
            let mut sums = [[0.0; 2]; 2];
            let mut counts = [0usize; 2];
            for i in ds.domain_indices(u) {
                let s = &ds.samples[i];
                let c = s.y.as_ref().or(ds.heldout[i].as_ref()).unwrap().class().unwrap();
                sums[c][0] += s.x[0];
                sums[c][1] += s.x[1];
                counts[c] += 1;
            }
            for d in 0..2 {
                let gap = sums[1][d] / counts[1] as f64 - sums[0][d] / counts[0] as f64;
                assert!((gap - 2.0 * meta.mu_pos[u][d]).abs() < 0.1);
            }
        }
    }

    #[test]
    fn adjacent_domains_have_more_similar_boundaries() {
        let (mut adj_sum, mut adj_n, mut non_sum, mut non_n) = (0.0, 0usize, 0.0, 0usize);
        for seed in 0..20 {
            let ds = generate_dg(15, 2, 6, seed).unwrap();
            let meta = ds.dg.as_ref().unwrap();
            for i in 0..15 {
                for j in i + 1..15 {
                    let (a, b) = (meta.mu_pos[i], meta.mu_pos[j]);
                    let na = (a[0] * a[0] + a[1] * a[1]).sqrt();
                    let nb = (b[0] * b[0] + b[1] * b[1]).sqrt();
                    if na == 0.0 || nb == 0.0 {
                        continue;
                    }
                    let cos = (a[0] * b[0] + a[1] * b[1]) / (na * nb);
                    if ds.graph.has_edge(i, j) {
                        adj_sum += cos;
                        adj_n += 1;
                    } else {
                        non_sum += cos;
                        non_n += 1;
                    }
                }
            }
        }
        assert!(adj_sum / adj_n as f64 > non_sum / non_n as f64);
    }

    #[test]
    fn erfc_reference_points() {
        assert_abs_diff_eq!(standard_normal_cdf(0.0), 0.5, epsilon = 1e-7);
        assert_abs_diff_eq!(standard_normal_cdf(1.0), 0.841_344_746, epsilon = 1e-7);
        assert_abs_diff_eq!(standard_normal_cdf(-1.96), 0.024_997_895, epsilon = 1e-7);
    }
}
