use super::nn::{ParamId, ParamStore};
use super::scalar::{bce_with_logit, sigmoid};
use super::Tensor;
use crate::error::{GrdaError, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    MatMul(Var, Var),
    Transpose(Var),
    AddBias(Var, Var),
    Relu(Var),
    Sigmoid(Var),
    ConcatCols(Var, Var),
    Sum(Var),
    Mean(Var),
    Bce {
        logits: Var,
        targets: Tensor,
        weights: Option<Tensor>,
        denom: f64,
    },
    SoftmaxCe {
        logits: Var,
        labels: Vec<usize>,
        probs: Tensor,
    },
    Mse {
        pred: Var,
        target: Tensor,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Linear record of a forward computation. Nodes are appended in evaluation
/// order, so the index order is already topological.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    bindings: Vec<(ParamId, Var)>,
}

/// Gradients of one backward pass, indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    visited: usize,
}

impl Gradients {
    /// `None` for values that do not depend on any trainable leaf.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Number of nodes the backward sweep processed.
    pub fn visited(&self) -> usize {
        self.visited
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// A leaf that receives a gradient.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A leaf excluded from differentiation.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Record a parameter. When `trainable` is false the value enters as a
    /// constant and no gradient is routed back to the store.
    pub fn param(&mut self, store: &ParamStore, id: ParamId, trainable: bool) -> Var {
        let value = store.value(id).clone();
        if trainable {
            let v = self.leaf(value);
            self.bindings.push((id, v));
            v
        } else {
            self.constant(value)
        }
    }

    pub(crate) fn bindings(&self) -> &[(ParamId, Var)] {
        &self.bindings
    }

    /// Copy of `v`'s value cut off from the graph.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.value(v).clone();
        self.constant(value)
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(GrdaError::dim(format!("{what}: shapes {sa:?} and {sb:?}")));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b));
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "sub")?;
        let (va, vb) = (self.value(a), self.value(b));
        let data = va.data().iter().zip(vb.data()).map(|(x, y)| x - y).collect();
        let out = Tensor::new(va.shape().to_vec(), data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Sub(a, b), rg))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        let (va, vb) = (self.value(a), self.value(b));
        let data = va.data().iter().zip(vb.data()).map(|(x, y)| x * y).collect();
        let out = Tensor::new(va.shape().to_vec(), data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).map(|x| x * c);
        let rg = self.rg(a);
        self.push(out, Op::Scale(a, c), rg)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::MatMul(a, b), rg))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).transpose()?;
        let rg = self.rg(a);
        Ok(self.push(out, Op::Transpose(a), rg))
    }

    /// `x[m x n] + bias[n]`, the bias repeated over rows.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (m, n) = self.value(x).dims2()?;
        let b = self.value(bias);
        if b.numel() != n {
            return Err(GrdaError::dim(format!(
                "bias of {} values for {n} columns",
                b.numel()
            )));
        }
        let mut data = self.value(x).data().to_vec();
        for row in data.chunks_mut(n) {
            for (o, bv) in row.iter_mut().zip(b.data()) {
                *o += bv;
            }
        }
        let out = Tensor::matrix(m, n, data)?;
        let rg = self.rg(x) || self.rg(bias);
        Ok(self.push(out, Op::AddBias(x, bias), rg))
    }

    /// `max(0, x)`; the subgradient at 0 is 0.
    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| if x > 0.0 { x } else { 0.0 });
        let rg = self.rg(a);
        self.push(out, Op::Relu(a), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        let rg = self.rg(a);
        self.push(out, Op::Sigmoid(a), rg)
    }

    /// `[a | b]` for matrices with equal row counts.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ra, ca) = self.value(a).dims2()?;
        let (rb, cb) = self.value(b).dims2()?;
        if ra != rb {
            return Err(GrdaError::dim(format!("concat of {ra} and {rb} rows")));
        }
        let mut data = Vec::with_capacity(ra * (ca + cb));
        for i in 0..ra {
            data.extend_from_slice(self.value(a).row(i));
            data.extend_from_slice(self.value(b).row(i));
        }
        let out = Tensor::matrix(ra, ca + cb, data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::ConcatCols(a, b), rg))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        let rg = self.rg(a);
        self.push(Tensor::scalar(s), Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let s = v.data().iter().sum::<f64>() / v.numel() as f64;
        let rg = self.rg(a);
        self.push(Tensor::scalar(s), Op::Mean(a), rg)
    }

    /// Weighted mean of elementwise binary cross-entropy with logits.
    /// `targets` lie in [0, 1]; `weights`, when given, are non-negative and
    /// not all zero (a zero weight masks an entry out).
    pub fn bce_with_logits(
        &mut self,
        logits: Var,
        targets: Tensor,
        weights: Option<Tensor>,
    ) -> Result<Var> {
        let lv = self.value(logits);
        if !lv.same_shape(&targets) {
            return Err(GrdaError::dim(format!(
                "bce targets {:?} for logits {:?}",
                targets.shape(),
                lv.shape()
            )));
        }
        if targets.data().iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(GrdaError::input("bce targets must lie in [0, 1]"));
        }
        let denom = match &weights {
            Some(w) => {
                if !w.same_shape(&targets) {
                    return Err(GrdaError::dim("bce weights shape"));
                }
                let s: f64 = w.data().iter().sum();
                if s <= 0.0 || w.data().iter().any(|x| *x < 0.0) {
                    return Err(GrdaError::input("bce weights must be non-negative with positive sum"));
                }
                s
            }
            None => lv.numel() as f64,
        };
        let mut total = 0.0;
        for (i, (&l, &t)) in lv.data().iter().zip(targets.data()).enumerate() {
            let w = weights.as_ref().map_or(1.0, |w| w.data()[i]);
            if w != 0.0 {
                total += w * bce_with_logit(l, t);
            }
        }
        let rg = self.rg(logits);
        Ok(self.push(
            Tensor::scalar(total / denom),
            Op::Bce {
                logits,
                targets,
                weights,
                denom,
            },
            rg,
        ))
    }

    /// Mean over rows of `-log softmax(logits_r)[label_r]`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let (m, c) = self.value(logits).dims2()?;
        if labels.len() != m {
            return Err(GrdaError::dim(format!("{} labels for {m} rows", labels.len())));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= c) {
            return Err(GrdaError::input(format!("label {bad} out of range for {c} classes")));
        }
        let lv = self.value(logits);
        let mut probs = Vec::with_capacity(m * c);
        let mut total = 0.0;
        for (r, &label) in labels.iter().enumerate() {
            let row = lv.row(r);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = row.iter().map(|x| (x - max).exp()).sum();
            let log_z = max + z.ln();
            total += log_z - row[label];
            probs.extend(row.iter().map(|x| (x - log_z).exp()));
        }
        let probs = Tensor::matrix(m, c, probs)?;
        let rg = self.rg(logits);
        Ok(self.push(
            Tensor::scalar(total / m as f64),
            Op::SoftmaxCe {
                logits,
                labels: labels.to_vec(),
                probs,
            },
            rg,
        ))
    }

    /// Mean of squared elementwise differences.
    pub fn mse(&mut self, pred: Var, target: Tensor) -> Result<Var> {
        let pv = self.value(pred);
        if !pv.same_shape(&target) {
            return Err(GrdaError::dim(format!(
                "mse target {:?} for prediction {:?}",
                target.shape(),
                pv.shape()
            )));
        }
        let s: f64 = pv
            .data()
            .iter()
            .zip(target.data())
            .map(|(p, t)| (p - t) * (p - t))
            .sum();
        let n = pv.numel() as f64;
        let rg = self.rg(pred);
        Ok(self.push(Tensor::scalar(s / n), Op::Mse { pred, target }, rg))
    }

    /// Reverse sweep from a one-element `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if !self.value(loss).is_scalar() {
            return Err(GrdaError::input(format!(
                "backward needs a scalar root, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        let mut visited = 0;
        if self.rg(loss) {
            grads[loss.0] = Some(Tensor::full(self.value(loss).shape(), 1.0));
        }
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            visited += 1;
            let node = &self.nodes[i];
            self.propagate(node, &g, &mut grads)?;
            grads[i] = Some(g);
        }
        Ok(Gradients { grads, visited })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
        if !self.rg(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&g),
            slot => *slot = Some(g),
        }
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                if self.rg(*a) {
                    let d = g.data().iter().zip(vb.data()).map(|(x, y)| x * y).collect();
                    self.accumulate(grads, *a, Tensor::new(g.shape().to_vec(), d)?);
                }
                if self.rg(*b) {
                    let d = g.data().iter().zip(va.data()).map(|(x, y)| x * y).collect();
                    self.accumulate(grads, *b, Tensor::new(g.shape().to_vec(), d)?);
                }
            }
            Op::Scale(a, c) => self.accumulate(grads, *a, g.map(|x| x * c)),
            Op::MatMul(a, b) => {
                if self.rg(*a) {
                    let d = g.matmul(&self.value(*b).transpose()?)?;
                    self.accumulate(grads, *a, d);
                }
                if self.rg(*b) {
                    let d = self.value(*a).transpose()?.matmul(g)?;
                    self.accumulate(grads, *b, d);
                }
            }
            Op::Transpose(a) => self.accumulate(grads, *a, g.transpose()?),
            Op::AddBias(x, bias) => {
                self.accumulate(grads, *x, g.clone());
                if self.rg(*bias) {
                    let (_, n) = g.dims2()?;
                    let mut db = vec![0.0; n];
                    for row in g.data().chunks(n) {
                        for (d, v) in db.iter_mut().zip(row) {
                            *d += v;
                        }
                    }
                    let shape = self.value(*bias).shape().to_vec();
                    self.accumulate(grads, *bias, Tensor::new(shape, db)?);
                }
            }
            Op::Relu(a) => {
                let d = g
                    .data()
                    .iter()
                    .zip(self.value(*a).data())
                    .map(|(gv, x)| if *x > 0.0 { *gv } else { 0.0 })
                    .collect();
                self.accumulate(grads, *a, Tensor::new(g.shape().to_vec(), d)?);
            }
            Op::Sigmoid(a) => {
                let d = g
                    .data()
                    .iter()
                    .zip(node.value.data())
                    .map(|(gv, s)| gv * s * (1.0 - s))
                    .collect();
                self.accumulate(grads, *a, Tensor::new(g.shape().to_vec(), d)?);
            }
            Op::ConcatCols(a, b) => {
                let ca = self.value(*a).cols();
                let cb = self.value(*b).cols();
                let rows = g.rows();
                let mut da = Vec::with_capacity(rows * ca);
                let mut db = Vec::with_capacity(rows * cb);
                for r in 0..rows {
                    let row = g.row(r);
                    da.extend_from_slice(&row[..ca]);
                    db.extend_from_slice(&row[ca..]);
                }
                self.accumulate(grads, *a, Tensor::matrix(rows, ca, da)?);
                self.accumulate(grads, *b, Tensor::matrix(rows, cb, db)?);
            }
            Op::Sum(a) => {
                let gv = g.item();
                self.accumulate(grads, *a, Tensor::full(self.value(*a).shape(), gv));
            }
            Op::Mean(a) => {
                let v = self.value(*a);
                let gv = g.item() / v.numel() as f64;
                self.accumulate(grads, *a, Tensor::full(v.shape(), gv));
            }
            Op::Bce {
                logits,
                targets,
                weights,
                denom,
            } => {
                let scale = g.item() / denom;
                let lv = self.value(*logits);
                let d = lv
                    .data()
                    .iter()
                    .zip(targets.data())
                    .enumerate()
                    .map(|(i, (&l, &t))| {
                        let w = weights.as_ref().map_or(1.0, |w| w.data()[i]);
                        scale * w * (sigmoid(l) - t)
                    })
                    .collect();
                self.accumulate(grads, *logits, Tensor::new(lv.shape().to_vec(), d)?);
            }
            Op::SoftmaxCe {
                logits,
                labels,
                probs,
            } => {
                let (m, c) = probs.dims2()?;
                let scale = g.item() / m as f64;
                let mut d = probs.data().to_vec();
                for (r, &label) in labels.iter().enumerate() {
                    d[r * c + label] -= 1.0;
                }
                for v in &mut d {
                    *v *= scale;
                }
                self.accumulate(grads, *logits, Tensor::matrix(m, c, d)?);
            }
            Op::Mse { pred, target } => {
                let pv = self.value(*pred);
                let scale = 2.0 * g.item() / pv.numel() as f64;
                let d = pv
                    .data()
                    .iter()
                    .zip(target.data())
                    .map(|(p, t)| scale * (p - t))
                    .collect();
                self.accumulate(grads, *pred, Tensor::new(pv.shape().to_vec(), d)?);
            }
        }
        Ok(())
    }

    /// Backward pass whose parameter gradients are added into `store`.
    pub fn backward_into(&self, loss: Var, store: &mut ParamStore) -> Result<Gradients> {
        let grads = self.backward(loss)?;
        store.accumulate_grads(self, &grads)?;
        Ok(grads)
    }
}
