use serde::{Deserialize, Serialize};

use super::tape::{Gradients, Tape, Var};
use super::Tensor;
use crate::error::{GrdaError, Result};
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
}

/// Owner of every trainable tensor of a model. Gradients accumulate here
/// across backward passes until [`ParamStore::zero_grad`] is called.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let grad = Tensor::zeros(value.shape());
        self.params.push(Param {
            name: name.into(),
            value,
            grad,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].grad
    }

    pub(crate) fn param_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.params[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    /// Replace a value, keeping its shape.
    pub fn set_value(&mut self, id: ParamId, value: Tensor) -> Result<()> {
        let p = &mut self.params[id.0];
        if !p.value.same_shape(&value) {
            return Err(GrdaError::dim(format!(
                "parameter {} has shape {:?}, got {:?}",
                p.name,
                p.value.shape(),
                value.shape()
            )));
        }
        p.value = value;
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.data_mut().fill(0.0);
        }
    }

    pub fn accumulate_grads(&mut self, tape: &Tape, grads: &Gradients) -> Result<()> {
        for &(id, var) in tape.bindings() {
            if let Some(g) = grads.get(var) {
                let p = &mut self.params[id.0];
                if !p.grad.same_shape(g) {
                    return Err(GrdaError::dim(format!("gradient shape for {}", p.name)));
                }
                p.grad.add_assign(g);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl Linear {
    /// Weights and biases uniform on `(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        fan_in: usize,
        fan_out: usize,
        rng: &mut SeededRng,
    ) -> Self {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let w: Vec<f64> = (0..fan_in * fan_out)
            .map(|_| rng.uniform_range(-bound, bound))
            .collect();
        let b: Vec<f64> = (0..fan_out).map(|_| rng.uniform_range(-bound, bound)).collect();
        let weight = store.add(
            format!("{name}.weight"),
            Tensor::matrix(fan_in, fan_out, w).expect("weight shape"),
        );
        let bias = store.add(format!("{name}.bias"), Tensor::vector(b));
        Self {
            weight,
            bias,
            fan_in,
            fan_out,
        }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var, trainable: bool) -> Result<Var> {
        let w = tape.param(store, self.weight, trainable);
        let b = tape.param(store, self.bias, trainable);
        let h = tape.matmul(x, w)?;
        tape.add_bias(h, b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Identity,
}

/// Stack of fully connected layers with ReLU between them and `output`
/// applied after the last one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub output: Activation,
}

impl Mlp {
    /// `widths` lists every layer boundary, input first: `[in, h1, ..., out]`.
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        widths: &[usize],
        output: Activation,
        rng: &mut SeededRng,
    ) -> Self {
        assert!(widths.len() >= 2, "an MLP needs at least one layer");
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(store, &format!("{name}.{i}"), w[0], w[1], rng))
            .collect();
        Self { layers, output }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].fan_in
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].fan_out
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        self.layers.iter().flat_map(|l| [l.weight, l.bias]).collect()
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var, trainable: bool) -> Result<Var> {
        let mut h = x;
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(tape, store, h, trainable)?;
            if i < last || self.output == Activation::Relu {
                h = tape.relu(h);
            }
        }
        Ok(h)
    }
}
