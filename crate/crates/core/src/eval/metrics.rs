use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Target, TaskKind};
use crate::error::{GrdaError, Result};
use crate::graph::{DomainGraph, UNREACHABLE};
use crate::model::{Model, Prediction};
use crate::rng::SeededRng;

/// Fresh draws per domain when evaluating on generated data.
pub const DG_EVAL_DRAWS: usize = 2000;

/// Anything that maps inputs and domains to predictions.
pub trait Predictor {
    fn predict_batch(&self, xs: &[&[f64]], us: &[usize]) -> Result<Vec<Prediction>>;
}

impl Predictor for Model {
    fn predict_batch(&self, xs: &[&[f64]], us: &[usize]) -> Result<Vec<Prediction>> {
        Model::predict_batch(self, xs, us)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    /// Percent correct.
    Accuracy,
    /// Mean squared error per output, in the data's original units.
    Mse,
}

impl MetricKind {
    pub fn name(&self) -> &'static str {
        match self {
            MetricKind::Accuracy => "accuracy",
            MetricKind::Mse => "mse",
        }
    }

    pub fn for_task(task: TaskKind) -> Self {
        match task {
            TaskKind::Classification { .. } => MetricKind::Accuracy,
            TaskKind::Regression { .. } => MetricKind::Mse,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainMetric {
    pub domain: usize,
    /// `None` when the domain had nothing to evaluate.
    pub value: Option<f64>,
    pub count: usize,
    pub is_source: bool,
    /// 0 for sources, otherwise the BFS distance to the nearest source
    /// capped at 3.
    pub hop_level: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopAggregates {
    pub target_mean: Option<f64>,
    /// Means for hop levels 1, 2 and 3 or more.
    pub levels: [Option<f64>; 3],
    pub level_sizes: [usize; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub method: String,
    pub seed: u64,
    pub metric: MetricKind,
    pub config_digest: String,
    pub domains: Vec<DomainMetric>,
    pub aggregates: HopAggregates,
}

impl MetricTable {
    pub fn new(method: &str, seed: u64, metric: MetricKind, config_digest: String, domains: Vec<DomainMetric>) -> Self {
        let aggregates = hop_level_aggregate(&domains);
        Self { method: method.to_string(), seed, metric, config_digest, domains, aggregates }
    }

    pub fn target_values(&self) -> Vec<f64> {
        self.domains.iter().filter(|d| !d.is_source).filter_map(|d| d.value).collect()
    }

    pub fn worst_target(&self) -> Option<f64> {
        let v = self.target_values();
        let pick = |a: f64, b: f64| match self.metric {
            MetricKind::Accuracy => a.min(b),
            MetricKind::Mse => a.max(b),
        };
        v.into_iter().reduce(pick)
    }

    /// Rows of "method,seed,domain,hop_level,metric_name,value": one per
    /// domain, then the aggregates with the domain column naming the group.
    pub fn csv_rows(&self) -> Vec<String> {
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
        let name = self.metric.name();
        let mut rows: Vec<String> = self
            .domains
            .iter()
            .map(|d| format!("{},{},{},{},{name},{}", self.method, self.seed, d.domain, d.hop_level, fmt(d.value)))
            .collect();
        rows.push(format!("{},{},target_mean,,{name},{}", self.method, self.seed, fmt(self.aggregates.target_mean)));
        for (i, v) in self.aggregates.levels.iter().enumerate() {
            rows.push(format!("{},{},level_{},{},{name},{}", self.method, self.seed, i + 1, i + 1, fmt(*v)));
        }
        rows
    }
}

pub const METRICS_HEADER: &str = "method,seed,domain,hop_level,metric_name,value";

/// Hop level per domain: 0 for sources, `min(distance, 3)` otherwise, with
/// unreachable domains at level 3.
pub fn hop_levels(graph: &DomainGraph, sources: &[usize]) -> Result<Vec<usize>> {
    Ok(graph.bfs_hops(sources)?.into_iter().map(|h| if h == UNREACHABLE { 3 } else { h.min(3) }).collect())
}

fn weighted_mean<'a>(rows: impl Iterator<Item = &'a DomainMetric>) -> Option<f64> {
    let (mut s, mut w) = (0.0, 0usize);
    for d in rows {
        if let Some(v) = d.value {
            s += v * d.count as f64;
            w += d.count;
        }
    }
    (w > 0).then(|| s / w as f64)
}

/// Sample-weighted target means, overall and per hop level.
pub fn hop_level_aggregate(domains: &[DomainMetric]) -> HopAggregates {
    let targets = || domains.iter().filter(|d| !d.is_source);
    let mut levels = [None; 3];
    let mut sizes = [0; 3];
    for lvl in 1..=3 {
        sizes[lvl - 1] = targets().filter(|d| d.hop_level == lvl).count();
        levels[lvl - 1] = weighted_mean(targets().filter(|d| d.hop_level == lvl));
    }
    HopAggregates { target_mean: weighted_mean(targets()), levels, level_sizes: sizes }
}

struct EvalSet {
    xs: Vec<Vec<f64>>,
    ys: Vec<Target>,
}

fn eval_sets(ds: &Dataset, seed: u64) -> Result<Vec<EvalSet>> {
    let n = ds.n_domains();
    let mut sets: Vec<EvalSet> = (0..n).map(|_| EvalSet { xs: Vec::new(), ys: Vec::new() }).collect();
    if let Some(meta) = &ds.dg {
        let mut rng = SeededRng::stream(seed, "eval-draws");
        for (u, set) in sets.iter_mut().enumerate() {
            for k in 0..DG_EVAL_DRAWS {
                let class = k % 2;
                set.xs.push(meta.draw(u, class, &mut rng));
                set.ys.push(Target::Class(class));
            }
        }
    } else {
        for (s, held) in ds.samples.iter().zip(&ds.heldout) {
            if let Some(y) = s.y.as_ref().or(held.as_ref()) {
                sets[s.u].xs.push(s.x.clone());
                sets[s.u].ys.push(y.clone());
            }
        }
    }
    Ok(sets)
}

/// Metric for every domain. Generated datasets are scored on fresh draws
/// from their generator; others on the labels they carry, held-out ones for
/// targets. Regression errors are measured after undoing standardization.
pub fn per_domain_metrics(
    model: &dyn Predictor,
    ds: &Dataset,
    method: &str,
    seed: u64,
    config_digest: &str,
) -> Result<MetricTable> {
    let levels = hop_levels(&ds.graph, &ds.source_domains)?;
    let metric = MetricKind::for_task(ds.task);
    let sets = eval_sets(ds, seed)?;
    let scaler = ds.tpt.as_ref().map(|t| &t.y_scaler);
    let mut domains = Vec::with_capacity(ds.n_domains());
    for (u, set) in sets.iter().enumerate() {
        let count = set.xs.len();
        let value = if count == 0 {
            None
        } else {
            let xs: Vec<&[f64]> = set.xs.iter().map(Vec::as_slice).collect();
            let preds = model.predict_batch(&xs, &vec![u; count])?;
            Some(score(metric, &preds, &set.ys, scaler)?)
        };
        domains.push(DomainMetric { domain: u, value, count, is_source: ds.is_source(u), hop_level: levels[u] });
    }
    Ok(MetricTable::new(method, seed, metric, config_digest.to_string(), domains))
}

fn score(
    metric: MetricKind,
    preds: &[Prediction],
    ys: &[Target],
    scaler: Option<&crate::data::Standardizer>,
) -> Result<f64> {
    match metric {
        MetricKind::Accuracy => {
            let mut hits = 0;
            for (p, y) in preds.iter().zip(ys) {
                match (p, y) {
                    (Prediction::Class { class, .. }, Target::Class(c)) => hits += usize::from(class == c),
                    _ => return Err(GrdaError::input("classification metric on non-class outputs")),
                }
            }
            Ok(100.0 * hits as f64 / preds.len() as f64)
        }
        MetricKind::Mse => {
            let (mut s, mut n) = (0.0, 0usize);
            for (p, y) in preds.iter().zip(ys) {
                let (Prediction::Real(p), Target::Real(y)) = (p, y) else {
                    return Err(GrdaError::input("regression metric on non-real outputs"));
                };
                let (p, y) = match scaler {
                    Some(sc) => (sc.invert(p), sc.invert(y)),
                    None => (p.clone(), y.clone()),
                };
                s += p.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                n += y.len();
            }
            Ok(s / n as f64)
        }
    }
}
