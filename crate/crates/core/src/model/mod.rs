//! Encoder, predictor and adversary, their losses, and adversarial training.
//!
//! The encoder maps `(x, z_u)` to an encoding `e`: a raw block of three
//! fully connected layers on `x`, then a joint block of two layers on
//! `concat(h, z_u)`. The predictor maps `e` to the task output. The
//! adversary is either the graph discriminator, which reconstructs a node
//! embedding from `e`, or a domain classifier over all `N` domains.

mod checkpoint;
mod train;

pub use checkpoint::CKPT_MAGIC;
pub use train::{
    sample_domains, train, train_step_disc, train_step_enc_pred, Batch, EpochRecord, History, MixturePolicy,
    TrainConfig, Trainer,
};

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Sample, Target, TaskKind};
use crate::error::{GrdaError, Result};
use crate::graph::NodeEmbeddingTable;
use crate::rng::SeededRng;
use crate::tensor::scalar::bce_with_logit;
use crate::tensor::{Activation, Mlp, ParamId, ParamStore, Tape, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    SourceOnly,
    DannBaseline,
    Grda,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::SourceOnly, Method::DannBaseline, Method::Grda];

    pub fn name(&self) -> &'static str {
        match self {
            Method::SourceOnly => "source_only",
            Method::DannBaseline => "dann_baseline",
            Method::Grda => "grda",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "source_only" => Ok(Method::SourceOnly),
            "dann" | "dann_baseline" => Ok(Method::DannBaseline),
            "grda" => Ok(Method::Grda),
            other => Err(GrdaError::input(format!(
                "unknown method {other:?}, expected grda, dann or source-only"
            ))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub raw: Mlp,
    pub joint: Mlp,
    pub predictor: Mlp,
    pub adversary: Option<Mlp>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub method: Method,
    pub task: TaskKind,
    pub embeddings: NodeEmbeddingTable,
    pub arch: Architecture,
    pub store: ParamStore,
}

/// Output of [`Model::predict`].
#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    Class { class: usize, probs: Vec<f64> },
    Real(Vec<f64>),
}

impl Model {
    /// Builds all three players. Each block is initialized from its own
    /// stream so the encoder and predictor do not depend on the method.
    pub fn new(
        method: Method,
        task: TaskKind,
        input_dim: usize,
        embeddings: NodeEmbeddingTable,
        hidden: usize,
        seed: u64,
    ) -> Result<Self> {
        if input_dim == 0 || hidden == 0 {
            return Err(GrdaError::input("input and hidden widths must be positive"));
        }
        let k = embeddings.k();
        let h = hidden;
        let mut store = ParamStore::new();
        let mut rng = SeededRng::stream(seed, "init-encoder");
        let raw = Mlp::new(&mut store, "enc.raw", &[input_dim, h, h, h], Activation::Relu, &mut rng);
        let joint = Mlp::new(&mut store, "enc.joint", &[h + k, h, h], Activation::Identity, &mut rng);
        let mut rng = SeededRng::stream(seed, "init-predictor");
        let predictor = Mlp::new(&mut store, "pred", &[h, h, h, task.output_dim()], Activation::Identity, &mut rng);
        let mut rng = SeededRng::stream(seed, "init-adversary");
        let adversary = match method {
            Method::SourceOnly => None,
            Method::Grda => Some(Mlp::new(&mut store, "disc", &[h, h, h, h, h, h, k], Activation::Identity, &mut rng)),
            Method::DannBaseline => Some(Mlp::new(
                &mut store,
                "disc",
                &[h, h, h, h, h, h, embeddings.n()],
                Activation::Identity,
                &mut rng,
            )),
        };
        Ok(Self { method, task, embeddings, arch: Architecture { raw, joint, predictor, adversary }, store })
    }

    pub fn n_domains(&self) -> usize {
        self.embeddings.n()
    }

    pub fn input_dim(&self) -> usize {
        self.arch.raw.in_dim()
    }

    pub fn encoding_dim(&self) -> usize {
        self.arch.joint.out_dim()
    }

    pub fn encoder_params(&self) -> Vec<ParamId> {
        let mut ids = self.arch.raw.param_ids();
        ids.extend(self.arch.joint.param_ids());
        ids
    }

    pub fn predictor_params(&self) -> Vec<ParamId> {
        self.arch.predictor.param_ids()
    }

    pub fn adversary_params(&self) -> Vec<ParamId> {
        self.arch.adversary.as_ref().map(Mlp::param_ids).unwrap_or_default()
    }

    /// Copies of the parameter values of one player, for isolation checks.
    pub fn snapshot(&self, ids: &[ParamId]) -> Vec<Tensor> {
        ids.iter().map(|&id| self.store.value(id).clone()).collect()
    }

    fn check_inputs(&self, xs: &[&[f64]], us: &[usize]) -> Result<()> {
        if xs.len() != us.len() {
            return Err(GrdaError::dim(format!("{} inputs for {} domains", xs.len(), us.len())));
        }
        if xs.is_empty() {
            return Err(GrdaError::input("empty batch"));
        }
        if let Some(&u) = us.iter().find(|&&u| u >= self.n_domains()) {
            return Err(GrdaError::input(format!("domain {u} outside 0..{}", self.n_domains())));
        }
        if let Some(x) = xs.iter().find(|x| x.len() != self.input_dim()) {
            return Err(GrdaError::dim(format!("input of width {}, expected {}", x.len(), self.input_dim())));
        }
        Ok(())
    }

    /// Encoder forward pass on the tape.
    pub fn encode_on(&self, tape: &mut Tape, xs: &[&[f64]], us: &[usize], trainable: bool) -> Result<Var> {
        self.check_inputs(xs, us)?;
        let b = xs.len();
        let x = Tensor::matrix(b, self.input_dim(), xs.concat())?;
        let k = self.embeddings.k();
        let z = Tensor::matrix(b, k, us.iter().flat_map(|&u| self.embeddings.row(u).iter().copied()).collect())?;
        let x = tape.constant(x);
        let z = tape.constant(z);
        let h = self.arch.raw.forward(tape, &self.store, x, trainable)?;
        let hz = tape.concat_cols(h, z)?;
        self.arch.joint.forward(tape, &self.store, hz, trainable)
    }

    /// Encodings as a `B x width` matrix.
    pub fn encode(&self, xs: &[&[f64]], us: &[usize]) -> Result<Tensor> {
        let mut tape = Tape::new();
        let e = self.encode_on(&mut tape, xs, us, false)?;
        Ok(tape.value(e).clone())
    }

    /// Encodings of every sample of `ds`, grouped by domain.
    pub fn encode_by_domain(&self, ds: &Dataset) -> Result<Vec<Vec<Vec<f64>>>> {
        let mut out = Vec::with_capacity(ds.n_domains());
        for u in 0..ds.n_domains() {
            let idx = ds.domain_indices(u);
            let xs: Vec<&[f64]> = idx.iter().map(|&i| ds.samples[i].x.as_slice()).collect();
            let e = self.encode(&xs, &vec![u; xs.len()])?;
            let w = e.shape()[1];
            out.push(e.data().chunks(w).map(<[f64]>::to_vec).collect());
        }
        Ok(out)
    }

    pub fn predictor_on(&self, tape: &mut Tape, e: Var, trainable: bool) -> Result<Var> {
        self.arch.predictor.forward(tape, &self.store, e, trainable)
    }

    pub fn adversary_on(&self, tape: &mut Tape, e: Var, trainable: bool) -> Result<Var> {
        let adv = self
            .arch
            .adversary
            .as_ref()
            .ok_or_else(|| GrdaError::input(format!("{} has no adversary", self.method)))?;
        adv.forward(tape, &self.store, e, trainable)
    }

    /// Raw predictor outputs (logits or regression values), `B x out`.
    pub fn forward_outputs(&self, xs: &[&[f64]], us: &[usize]) -> Result<Tensor> {
        let mut tape = Tape::new();
        let e = self.encode_on(&mut tape, xs, us, false)?;
        let out = self.predictor_on(&mut tape, e, false)?;
        Ok(tape.value(out).clone())
    }

    pub fn predict(&self, x: &[f64], u: usize) -> Result<Prediction> {
        Ok(self.predict_batch(&[x], &[u])?.remove(0))
    }

    pub fn predict_batch(&self, xs: &[&[f64]], us: &[usize]) -> Result<Vec<Prediction>> {
        let out = self.forward_outputs(xs, us)?;
        Ok((0..out.rows())
            .map(|r| {
                let row = out.row(r);
                match self.task {
                    TaskKind::Regression { .. } => Prediction::Real(row.to_vec()),
                    TaskKind::Classification { .. } => {
                        let probs = softmax(row);
                        let class = argmax(&probs);
                        Prediction::Class { class, probs }
                    }
                }
            })
            .collect())
    }

    /// Reconstructed node embeddings `ẑ` for a batch of encodings.
    pub fn reconstruct(&self, e: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let e = tape.constant(e.clone());
        let z = self.adversary_on(&mut tape, e, false)?;
        Ok(tape.value(z).clone())
    }
}

pub fn softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|v| v / z).collect()
}

/// First index of the maximum.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// `h_p` averaged over a labeled batch: softmax cross-entropy for classes,
/// mean squared error for real targets.
pub fn predictor_loss(model: &Model, tape: &mut Tape, batch: &[&Sample], trainable: bool) -> Result<Var> {
    let xs: Vec<&[f64]> = batch.iter().map(|s| s.x.as_slice()).collect();
    let us: Vec<usize> = batch.iter().map(|s| s.u).collect();
    let e = model.encode_on(tape, &xs, &us, trainable)?;
    let out = model.predictor_on(tape, e, trainable)?;
    predictor_loss_from(model.task, tape, out, batch)
}

pub(crate) fn predictor_loss_from(task: TaskKind, tape: &mut Tape, out: Var, batch: &[&Sample]) -> Result<Var> {
    let unlabeled = || GrdaError::input("unlabeled sample in predictor batch");
    match task {
        TaskKind::Classification { .. } => {
            let labels: Vec<usize> = batch
                .iter()
                .map(|s| s.y.as_ref().and_then(Target::class).ok_or_else(unlabeled))
                .collect::<Result<_>>()?;
            tape.softmax_cross_entropy(out, &labels)
        }
        TaskKind::Regression { dim } => {
            let mut t = Vec::with_capacity(batch.len() * dim);
            for s in batch {
                let y = s.y.as_ref().and_then(Target::real).ok_or_else(unlabeled)?;
                if y.len() != dim {
                    return Err(GrdaError::dim(format!("target of width {}, expected {dim}", y.len())));
                }
                t.extend_from_slice(y);
            }
            // Mean over samples of the squared L2 error, not over entries.
            let mse = tape.mse(out, Tensor::matrix(batch.len(), dim, t)?)?;
            Ok(tape.scale(mse, dim as f64))
        }
    }
}

/// Loss on one pair of reconstructions: BCE of `sigmoid(ẑ1ᵀẑ2)` against `a`.
pub fn discriminator_pair_loss(z1: &[f64], z2: &[f64], a: f64) -> Result<f64> {
    if z1.len() != z2.len() {
        return Err(GrdaError::dim(format!("pair of widths {} and {}", z1.len(), z2.len())));
    }
    let dot: f64 = z1.iter().zip(z2).map(|(p, q)| p * q).sum();
    Ok(bce_with_logit(dot, a))
}

/// Graph-discriminator loss over all ordered pairs `i != j` of the batch,
/// given reconstructions `zhat` (`B x k`). Returns the tape node.
pub fn pair_loss_on(tape: &mut Tape, zhat: Var, us: &[usize], adjacency: &dyn Fn(usize, usize) -> f64) -> Result<Var> {
    let b = us.len();
    if b < 2 {
        return Err(GrdaError::input("pair loss needs a batch of at least 2"));
    }
    let zt = tape.transpose(zhat)?;
    let gram = tape.matmul(zhat, zt)?;
    let mut targets = Vec::with_capacity(b * b);
    let mut weights = Vec::with_capacity(b * b);
    for i in 0..b {
        for j in 0..b {
            targets.push(if i == j { 0.0 } else { adjacency(us[i], us[j]) });
            weights.push(if i == j { 0.0 } else { 1.0 });
        }
    }
    tape.bce_with_logits(gram, Tensor::matrix(b, b, targets)?, Some(Tensor::matrix(b, b, weights)?))
}

/// Adversary loss on a batch of encodings `e`: the graph pair loss for GRDA,
/// domain cross-entropy for the baseline.
pub fn adversary_loss_on(
    model: &Model,
    tape: &mut Tape,
    e: Var,
    us: &[usize],
    graph: &crate::graph::DomainGraph,
    trainable: bool,
) -> Result<Var> {
    let out = model.adversary_on(tape, e, trainable)?;
    match model.method {
        Method::Grda => pair_loss_on(tape, out, us, &|i, j| graph.a(i, j)),
        Method::DannBaseline => tape.softmax_cross_entropy(out, us),
        Method::SourceOnly => Err(GrdaError::input("source_only has no adversary")),
    }
}
