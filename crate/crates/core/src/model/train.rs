use serde::{Deserialize, Serialize};

use super::{adversary_loss_on, argmax, predictor_loss, Method, Model};
use crate::data::{Dataset, Sample};
use crate::error::{GrdaError, Result};
use crate::graph::DomainGraph;
use crate::rng::SeededRng;
use crate::tensor::{Optimizer, Tape};

const LOSS_LIMIT: f64 = 1e6;

/// How the domains of a discriminator batch are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixturePolicy {
    /// Every slot picks a domain uniformly from all domains.
    Uniform,
    /// Slots pick uniformly from a random connected subgraph.
    Subgraph,
    /// A fair coin between the two, flipped per batch.
    Mixture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lambda_d: f64,
    pub batch_size: usize,
    pub lr: f64,
    pub lr_disc: f64,
    pub epochs: usize,
    pub seed: u64,
    pub disc_steps: usize,
    pub enc_steps: usize,
    pub hidden: usize,
    pub policy: MixturePolicy,
    /// Iterations per epoch; `0` means one pass over the pooled samples.
    pub iters_per_epoch: usize,
    /// Batch size of the end-of-epoch adversary evaluation.
    pub eval_batch: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda_d: 0.5,
            batch_size: 32,
            lr: 1e-4,
            lr_disc: 1e-4,
            epochs: 100,
            seed: 0,
            disc_steps: 1,
            enc_steps: 1,
            hidden: 64,
            policy: MixturePolicy::Mixture,
            iters_per_epoch: 0,
            eval_batch: 256,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(GrdaError::input(m));
        if !(self.lambda_d.is_finite() && self.lambda_d >= 0.0) {
            return bad(format!("lambda_d must be a non-negative number, got {}", self.lambda_d));
        }
        if self.batch_size < 2 {
            return bad(format!("batch_size must be at least 2, got {}", self.batch_size));
        }
        for (name, v) in [("lr", self.lr), ("lr_disc", self.lr_disc)] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.epochs == 0 || self.disc_steps == 0 || self.enc_steps == 0 || self.hidden == 0 {
            return bad("epochs, disc_steps, enc_steps and hidden must be positive".into());
        }
        if self.eval_batch < 2 {
            return bad(format!("eval_batch must be at least 2, got {}", self.eval_batch));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean predictor loss over the epoch's iterations.
    pub l_f: f64,
    /// Adversary loss on a fresh uniform batch at the end of the epoch.
    pub l_d: Option<f64>,
    /// Value of `l_d` at a perfectly aligned encoder.
    pub ceiling: f64,
    pub gap: Option<f64>,
    /// Domain-classifier accuracy on the evaluation batch (baseline only).
    pub adversary_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub records: Vec<EpochRecord>,
}

impl History {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Mean adversary loss over the last `fraction` of epochs (at least one).
    pub fn tail_mean_l_d(&self, fraction: f64) -> Option<f64> {
        let n = self.records.len();
        let take = ((n as f64 * fraction).ceil() as usize).clamp(1, n.max(1));
        let tail: Vec<f64> = self.records[n.saturating_sub(take)..].iter().filter_map(|r| r.l_d).collect();
        (!tail.is_empty()).then(|| tail.iter().sum::<f64>() / tail.len() as f64)
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
        let mut s = String::from("epoch,L_f,L_d,ceiling,gap\n");
        for r in &self.records {
            s.push_str(&format!("{},{:?},{},{:?},{}\n", r.epoch, r.l_f, opt(r.l_d), r.ceiling, opt(r.gap)));
        }
        s
    }

    /// Inverse of [`History::to_csv`]; adversary accuracy is not stored.
    pub fn from_csv(text: &str, path: &std::path::Path) -> Result<Self> {
        let err = |line: usize, message: String| GrdaError::Parse { path: path.to_path_buf(), line, message };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, "epoch,L_f,L_d,ceiling,gap")) => {}
            _ => return Err(err(1, "expected header epoch,L_f,L_d,ceiling,gap".into())),
        }
        let mut records = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(err(i + 1, format!("expected 5 fields, found {}", f.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| err(i + 1, format!("{s:?}: {e}")));
            let opt = |s: &str| if s.is_empty() { Ok(None) } else { num(s).map(Some) };
            records.push(EpochRecord {
                epoch: f[0].parse().map_err(|e| err(i + 1, format!("{:?}: {e}", f[0])))?,
                l_f: num(f[1])?,
                l_d: opt(f[2])?,
                ceiling: num(f[3])?,
                gap: opt(f[4])?,
                adversary_accuracy: None,
            });
        }
        Ok(History { records })
    }
}

/// Indices into a dataset's samples.
pub type Batch = Vec<usize>;

/// Domain of each of `size` slots under `policy`.
pub fn sample_domains(graph: &DomainGraph, policy: MixturePolicy, size: usize, rng: &mut SeededRng) -> Vec<usize> {
    let n = graph.n();
    let policy = match policy {
        MixturePolicy::Mixture if rng.bernoulli(0.5) => MixturePolicy::Subgraph,
        MixturePolicy::Mixture => MixturePolicy::Uniform,
        p => p,
    };
    let pool: Vec<usize> = match policy {
        MixturePolicy::Subgraph if n >= 2 => {
            let target = 2 + rng.below(n - 1);
            let nodes = graph.random_connected_subgraph(target, rng);
            if nodes.len() < 2 {
                (0..n).collect()
            } else {
                nodes
            }
        }
        _ => (0..n).collect(),
    };
    (0..size).map(|_| pool[rng.below(pool.len())]).collect()
}

fn guard(value: f64, what: &str) -> Result<f64> {
    if !value.is_finite() || value.abs() > LOSS_LIMIT {
        return Err(GrdaError::Divergence { epoch: 0, reason: format!("{what} = {value}") });
    }
    Ok(value)
}

fn gather<'a>(ds: &'a Dataset, batch: &[usize]) -> (Vec<&'a [f64]>, Vec<usize>) {
    (batch.iter().map(|&i| ds.samples[i].x.as_slice()).collect(), batch.iter().map(|&i| ds.samples[i].u).collect())
}

fn draw(by_domain: &[Vec<usize>], domains: &[usize], rng: &mut SeededRng) -> Batch {
    domains
        .iter()
        .map(|&u| {
            let pool = &by_domain[u];
            pool[rng.below(pool.len())]
        })
        .collect()
}

/// One adversary update with the encoder held fixed. Returns the loss
/// before the update.
pub fn train_step_disc(model: &mut Model, opt: &mut Optimizer, ds: &Dataset, batch: &[usize]) -> Result<f64> {
    let (xs, us) = gather(ds, batch);
    let mut tape = Tape::new();
    let e = model.encode_on(&mut tape, &xs, &us, false)?;
    let loss = adversary_loss_on(model, &mut tape, e, &us, &ds.graph, true)?;
    let value = guard(tape.value(loss).item(), "adversary loss")?;
    model.store.zero_grad();
    tape.backward_into(loss, &mut model.store)?;
    opt.step(&mut model.store)?;
    Ok(value)
}

/// One encoder and predictor update on `L_f - λ·L_d` with the adversary
/// held fixed. Returns `(L_f, L_d)` before the update; the adversary term
/// is skipped when `lambda_d` is zero or the model has no adversary.
pub fn train_step_enc_pred(
    model: &mut Model,
    opt: &mut Optimizer,
    ds: &Dataset,
    labeled: &[&Sample],
    disc_batch: &[usize],
    lambda_d: f64,
) -> Result<(f64, Option<f64>)> {
    let mut tape = Tape::new();
    let l_f = predictor_loss(model, &mut tape, labeled, true)?;
    let lf_value = guard(tape.value(l_f).item(), "predictor loss")?;
    let mut total = l_f;
    let mut ld_value = None;
    if lambda_d > 0.0 && model.arch.adversary.is_some() {
        let (xs, us) = gather(ds, disc_batch);
        let e = model.encode_on(&mut tape, &xs, &us, true)?;
        let l_d = adversary_loss_on(model, &mut tape, e, &us, &ds.graph, false)?;
        ld_value = Some(guard(tape.value(l_d).item(), "adversary loss")?);
        let scaled = tape.scale(l_d, -lambda_d);
        total = tape.add(total, scaled)?;
    }
    model.store.zero_grad();
    tape.backward_into(total, &mut model.store)?;
    opt.step(&mut model.store)?;
    Ok((lf_value, ld_value))
}

/// Alternating optimization state for one run.
pub struct Trainer<'a> {
    pub model: Model,
    pub history: History,
    ds: &'a Dataset,
    cfg: TrainConfig,
    opt_main: Optimizer,
    opt_adv: Option<Optimizer>,
    by_domain: Vec<Vec<usize>>,
    labeled: Vec<usize>,
    rng_labeled: SeededRng,
    rng_disc: SeededRng,
    rng_eval: SeededRng,
    ceiling: f64,
}

impl<'a> Trainer<'a> {
    pub fn new(model: Model, ds: &'a Dataset, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if model.n_domains() != ds.n_domains() {
            return Err(GrdaError::input(format!(
                "model has {} domain embeddings, dataset has {} domains",
                model.n_domains(),
                ds.n_domains()
            )));
        }
        if model.task != ds.task || model.input_dim() != ds.input_dim() {
            return Err(GrdaError::input("model and dataset disagree on task or input width"));
        }
        let labeled: Vec<usize> = (0..ds.samples.len()).filter(|&i| ds.samples[i].y.is_some()).collect();
        if labeled.is_empty() {
            return Err(GrdaError::input("dataset has no labeled samples"));
        }
        let by_domain: Vec<Vec<usize>> = (0..ds.n_domains()).map(|u| ds.domain_indices(u)).collect();
        let mut main_params = model.encoder_params();
        main_params.extend(model.predictor_params());
        let opt_main = Optimizer::adam(cfg.lr, main_params)?;
        let opt_adv = match model.arch.adversary {
            Some(_) => Some(Optimizer::adam(cfg.lr_disc, model.adversary_params())?),
            None => None,
        };
        let ceiling = match model.method {
            Method::DannBaseline => (ds.n_domains() as f64).ln(),
            _ => ds.graph.optimum_disc_loss(),
        };
        Ok(Self {
            model,
            history: History::default(),
            ds,
            cfg: cfg.clone(),
            opt_main,
            opt_adv,
            by_domain,
            labeled,
            rng_labeled: SeededRng::stream(cfg.seed, "batch-labeled"),
            rng_disc: SeededRng::stream(cfg.seed, "batch-disc"),
            rng_eval: SeededRng::stream(cfg.seed, "batch-eval"),
            ceiling,
        })
    }

    pub fn iters_per_epoch(&self) -> usize {
        if self.cfg.iters_per_epoch > 0 {
            self.cfg.iters_per_epoch
        } else {
            self.ds.samples.len().div_ceil(self.cfg.batch_size)
        }
    }

    pub fn disc_batch(&mut self) -> Batch {
        let domains = sample_domains(&self.ds.graph, self.cfg.policy, self.cfg.batch_size, &mut self.rng_disc);
        draw(&self.by_domain, &domains, &mut self.rng_disc)
    }

    pub fn labeled_batch(&mut self) -> Batch {
        (0..self.cfg.batch_size).map(|_| self.labeled[self.rng_labeled.below(self.labeled.len())]).collect()
    }

    /// One alternation: `disc_steps` adversary updates, then `enc_steps`
    /// encoder and predictor updates, all on the same adversary batch.
    pub fn iteration(&mut self) -> Result<f64> {
        let mut disc = Vec::new();
        if self.opt_adv.is_some() {
            disc = self.disc_batch();
            let opt = self.opt_adv.as_mut().expect("checked above");
            for _ in 0..self.cfg.disc_steps {
                train_step_disc(&mut self.model, opt, self.ds, &disc)?;
            }
        }
        let mut l_f = 0.0;
        for _ in 0..self.cfg.enc_steps {
            let idx = self.labeled_batch();
            let labeled: Vec<&Sample> = idx.iter().map(|&i| &self.ds.samples[i]).collect();
            let (lf, _) =
                train_step_enc_pred(&mut self.model, &mut self.opt_main, self.ds, &labeled, &disc, self.cfg.lambda_d)?;
            l_f += lf / self.cfg.enc_steps as f64;
        }
        Ok(l_f)
    }

    /// Adversary loss on a fresh batch with uniformly chosen domains, and
    /// the domain classifier's accuracy when there is one.
    pub fn evaluate_adversary(&mut self) -> Result<Option<(f64, Option<f64>)>> {
        if self.model.arch.adversary.is_none() {
            return Ok(None);
        }
        let domains = sample_domains(&self.ds.graph, MixturePolicy::Uniform, self.cfg.eval_batch, &mut self.rng_eval);
        let batch = draw(&self.by_domain, &domains, &mut self.rng_eval);
        let (xs, us) = gather(self.ds, &batch);
        let mut tape = Tape::new();
        let e = self.model.encode_on(&mut tape, &xs, &us, false)?;
        let loss = adversary_loss_on(&self.model, &mut tape, e, &us, &self.ds.graph, false)?;
        let acc = if self.model.method == Method::DannBaseline {
            let logits = self.model.adversary_on(&mut tape, e, false)?;
            let out = tape.value(logits);
            let hits = (0..out.rows()).filter(|&r| argmax(out.row(r)) == us[r]).count();
            Some(hits as f64 / us.len() as f64)
        } else {
            None
        };
        Ok(Some((tape.value(loss).item(), acc)))
    }

    pub fn run_epoch(&mut self) -> Result<&EpochRecord> {
        let epoch = self.history.len();
        let with_epoch = |e: GrdaError| match e {
            GrdaError::Divergence { reason, .. } => GrdaError::Divergence { epoch, reason },
            other => other,
        };
        let iters = self.iters_per_epoch();
        let mut l_f = 0.0;
        for _ in 0..iters {
            l_f += self.iteration().map_err(with_epoch)? / iters as f64;
        }
        let adv = self.evaluate_adversary()?;
        let l_d = adv.map(|a| a.0);
        if let Some(v) = l_d {
            guard(v, "adversary loss").map_err(with_epoch)?;
        }
        self.history.records.push(EpochRecord {
            epoch,
            l_f,
            l_d,
            ceiling: self.ceiling,
            gap: l_d.map(|v| (v - self.ceiling).abs()),
            adversary_accuracy: adv.and_then(|a| a.1),
        });
        Ok(self.history.records.last().expect("just pushed"))
    }

    pub fn finish(self) -> (Model, History) {
        (self.model, self.history)
    }
}

/// Runs `cfg.epochs` epochs of alternating optimization.
pub fn train(model: Model, ds: &Dataset, cfg: &TrainConfig) -> Result<(Model, History)> {
    let mut t = Trainer::new(model, ds, cfg)?;
    for _ in 0..cfg.epochs {
        t.run_epoch()?;
    }
    Ok(t.finish())
}
