use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::metrics::{per_domain_metrics, MetricTable, METRICS_HEADER};
use crate::data::{build_tpt_task, generate_dg, load_tpt_csv, Dataset, SplitConfig};
use crate::error::{GrdaError, Result};
use crate::graph::{pretrain_embeddings, NodeEmbeddingTable, PretrainConfig};
use crate::model::{train, History, Method, Model, TrainConfig};
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    Dg { domains: usize, per_domain: usize, sources: usize, seed: u64 },
    Tpt { csv: PathBuf, split: PathBuf },
    Dir { path: PathBuf },
}

impl DatasetSpec {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DatasetSpec::Dg { domains, per_domain, sources, seed } => {
                generate_dg(*domains, *per_domain, *sources, *seed)
            }
            DatasetSpec::Tpt { csv, split } => build_tpt_task(&load_tpt_csv(csv)?, &SplitConfig::load(split)?),
            DatasetSpec::Dir { path } => Dataset::load_dir(path),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub dataset: DatasetSpec,
    pub methods: Vec<Method>,
    /// Shared settings; `seed` is replaced by each entry of `seeds`.
    pub train: TrainConfig,
    #[serde(default)]
    pub pretrain: PretrainConfig,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
}

impl RunManifest {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(GrdaError::input("manifest lists no seeds"));
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return Err(GrdaError::input("manifest seeds must be distinct"));
        }
        if self.methods.is_empty() {
            return Err(GrdaError::input("manifest lists no methods"));
        }
        self.train.validate()
    }
}

/// Short stable fingerprint of a training configuration.
pub fn config_digest(cfg: &TrainConfig) -> String {
    let json = serde_json::to_string(cfg).expect("config serializes");
    format!("{:016x}", derive_seed(0, &json))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub method: Method,
    pub seed: u64,
    pub table: MetricTable,
    pub history: History,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunFailure {
    pub method: Method,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub dataset: Dataset,
    pub embeddings: NodeEmbeddingTable,
    pub runs: Vec<RunOutput>,
    pub failures: Vec<RunFailure>,
}

impl ExperimentResult {
    pub fn tables(&self) -> Vec<&MetricTable> {
        self.runs.iter().map(|r| &r.table).collect()
    }

    pub fn runs_of(&self, method: Method) -> impl Iterator<Item = &RunOutput> {
        self.runs.iter().filter(move |r| r.method == method)
    }

    /// Mean over seeds of the sample-weighted target metric.
    pub fn mean_target(&self, method: Method) -> Option<f64> {
        let v: Vec<f64> = self.runs_of(method).filter_map(|r| r.table.aggregates.target_mean).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

fn write(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|e| GrdaError::io(path, e))
}

pub fn metrics_csv(tables: &[&MetricTable]) -> String {
    let mut s = String::from(METRICS_HEADER);
    s.push('\n');
    for t in tables {
        for row in t.csv_rows() {
            s.push_str(&row);
            s.push('\n');
        }
    }
    s
}

fn run_one(
    ds: &Dataset,
    emb: &NodeEmbeddingTable,
    method: Method,
    cfg: &TrainConfig,
    out: &Path,
) -> Result<RunOutput> {
    let model = Model::new(method, ds.task, ds.input_dim(), emb.clone(), cfg.hidden, cfg.seed)?;
    let (model, history) = train(model, ds, cfg)?;
    let stem = format!("{}_seed{}", method.name(), cfg.seed);
    write(&out.join(format!("history_{stem}.csv")), &history.to_csv())?;
    model.save(&out.join(format!("{stem}.ckpt")), Some(cfg))?;
    let table = per_domain_metrics(&model, ds, method.name(), cfg.seed, &config_digest(cfg))?;
    Ok(RunOutput { method, seed: cfg.seed, table, history })
}

/// Trains and evaluates every (method, seed) pair on one dataset with one
/// set of pretrained embeddings. A failed run is recorded and skipped.
pub fn run_experiment(manifest: &RunManifest) -> Result<ExperimentResult> {
    manifest.validate()?;
    let out = &manifest.out_dir;
    std::fs::create_dir_all(out).map_err(|e| GrdaError::io(out, e))?;
    write(&out.join("manifest.json"), &serde_json::to_string_pretty(manifest)?)?;
    let ds = manifest.dataset.load()?;
    let embeddings = pretrain_embeddings(&ds.graph, &manifest.pretrain)?;
    embeddings.save(&out.join("embeddings.csv"))?;
    ds.graph.save(&out.join("graph.json"))?;

    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for &method in &manifest.methods {
        for &seed in &manifest.seeds {
            let cfg = TrainConfig { seed, ..manifest.train.clone() };
            match run_one(&ds, &embeddings, method, &cfg, out) {
                Ok(r) => runs.push(r),
                Err(e) => failures.push(RunFailure { method, seed, error: e.to_string() }),
            }
        }
    }
    let tables: Vec<&MetricTable> = runs.iter().map(|r| &r.table).collect();
    write(&out.join("metrics.csv"), &metrics_csv(&tables))?;
    if !failures.is_empty() {
        write(&out.join("failures.json"), &serde_json::to_string_pretty(&failures)?)?;
    }
    Ok(ExperimentResult { dataset: ds, embeddings, runs, failures })
}
