use serde::{Deserialize, Serialize};

use super::DomainGraph;
use crate::error::{GrdaError, Result};
use crate::rng::SeededRng;
use crate::tensor::scalar::{bce_with_logit, sigmoid};
use crate::tensor::{Optimizer, ParamStore, Tape, Tensor};

/// One `k`-dimensional vector per domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeEmbeddingTable {
    k: usize,
    z: Vec<Vec<f64>>,
}

impl NodeEmbeddingTable {
    pub fn new(z: Vec<Vec<f64>>) -> Result<Self> {
        let k = z.first().map_or(0, Vec::len);
        if k == 0 {
            return Err(GrdaError::input("embedding table needs at least one non-empty row"));
        }
        if let Some(i) = z.iter().position(|r| r.len() != k) {
            return Err(GrdaError::dim(format!("embedding row {i} has {} columns, expected {k}", z[i].len())));
        }
        if z.iter().flatten().any(|v| !v.is_finite()) {
            return Err(GrdaError::input("embedding table has non-finite entries"));
        }
        Ok(Self { k, z })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.z[i]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.z
    }

    pub fn dot(&self, i: usize, j: usize) -> f64 {
        self.z[i].iter().zip(&self.z[j]).map(|(a, b)| a * b).sum()
    }

    /// True when no two rows coincide.
    pub fn rows_distinct(&self) -> bool {
        for i in 0..self.n() {
            for j in i + 1..self.n() {
                if self.z[i] == self.z[j] {
                    return false;
                }
            }
        }
        true
    }

    pub fn as_tensor(&self) -> Tensor {
        Tensor::matrix(self.n(), self.k, self.z.concat()).expect("table shape")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PretrainConfig {
    pub k: usize,
    pub lr: f64,
    pub steps: usize,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            k: 2,
            lr: 0.01,
            steps: 2000,
            seed: 0,
        }
    }
}

/// Reconstruction loss of `table` against `g`: mean binary cross-entropy of
/// `σ(z_iᵀ z_j)` against `A_ij` over ordered pairs `i ≠ j`.
pub fn reconstruction_loss(g: &DomainGraph, table: &NodeEmbeddingTable) -> f64 {
    let n = g.n();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                total += bce_with_logit(table.dot(i, j), g.a(i, j));
            }
        }
    }
    total / (n * (n - 1)) as f64
}

/// Fit node embeddings to the graph by full-batch Adam on the
/// reconstruction loss.
pub fn pretrain_embeddings(g: &DomainGraph, cfg: &PretrainConfig) -> Result<NodeEmbeddingTable> {
    if cfg.k == 0 {
        return Err(GrdaError::input("embedding dimension must be at least 1"));
    }
    let n = g.n();
    if n < 2 {
        return Err(GrdaError::input("pretraining needs at least two domains"));
    }
    let mut rng = SeededRng::stream(cfg.seed, "embed-init");
    let init: Vec<f64> = (0..n * cfg.k).map(|_| 0.5 * rng.normal()).collect();
    let mut store = ParamStore::new();
    let z = store.add("z", Tensor::matrix(n, cfg.k, init)?);
    let mut opt = Optimizer::adam(cfg.lr, vec![z])?;

    let targets = Tensor::matrix(n, n, g.adjacency_matrix().concat())?;
    let mut mask = vec![1.0; n * n];
    for i in 0..n {
        mask[i * n + i] = 0.0;
    }
    let mask = Tensor::matrix(n, n, mask)?;

    for step in 0..cfg.steps {
        let mut tape = Tape::new();
        let zv = tape.param(&store, z, true);
        let zt = tape.transpose(zv)?;
        let logits = tape.matmul(zv, zt)?;
        let loss = tape.bce_with_logits(logits, targets.clone(), Some(mask.clone()))?;
        let value = tape.value(loss).item();
        if !value.is_finite() {
            return Err(GrdaError::Divergence {
                epoch: step,
                reason: format!("reconstruction loss is {value}"),
            });
        }
        store.zero_grad();
        tape.backward_into(loss, &mut store)?;
        opt.step(&mut store)?;
    }

    let v = store.value(z);
    let rows: Vec<Vec<f64>> = (0..n).map(|i| v.row(i).to_vec()).collect();
    let table = NodeEmbeddingTable::new(rows).map_err(|_| GrdaError::Divergence {
        epoch: cfg.steps,
        reason: "embeddings became non-finite".into(),
    })?;
    if !table.rows_distinct() {
        return Err(GrdaError::Divergence {
            epoch: cfg.steps,
            reason: "two domains share an embedding".into(),
        });
    }
    Ok(table)
}

/// Table with random rows; used as the untrained reference.
pub fn random_table(n: usize, k: usize, seed: u64) -> NodeEmbeddingTable {
    let mut rng = SeededRng::stream(seed, "embed-init");
    let data: Vec<f64> = (0..n * k).map(|_| 0.5 * rng.normal()).collect();
    NodeEmbeddingTable::new(data.chunks(k).map(<[f64]>::to_vec).collect()).expect("finite")
}

/// Area under the ROC curve of `scores` for binary `labels`, ties counted
/// half (Mann–Whitney). `None` when one class is absent.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), labels.len());
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l).map(|(r, _)| r).sum();
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos * n_neg) as f64)
}

impl NodeEmbeddingTable {
    /// ROC-AUC of `σ(z_iᵀ z_j)` against `A_ij` over unordered pairs.
    pub fn reconstruction_auc(&self, g: &DomainGraph) -> Option<f64> {
        let mut scores = Vec::new();
        let mut labels = Vec::new();
        for i in 0..g.n() {
            for j in i + 1..g.n() {
                scores.push(sigmoid(self.dot(i, j)));
                labels.push(g.has_edge(i, j));
            }
        }
        roc_auc(&scores, &labels)
    }
}
