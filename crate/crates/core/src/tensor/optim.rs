use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::nn::{ParamId, ParamStore};
use super::Tensor;
use crate::error::{GrdaError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adam_default() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
struct Moments {
    m: Tensor,
    v: Tensor,
}

/// First-order optimizer over a fixed subset of a [`ParamStore`].
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    params: Vec<ParamId>,
    t: u64,
    moments: BTreeMap<ParamId, Moments>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, params: Vec<ParamId>) -> Result<Self> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(GrdaError::input(format!("learning rate must be positive, got {lr}")));
        }
        Ok(Self {
            kind,
            lr,
            params,
            t: 0,
            moments: BTreeMap::new(),
        })
    }

    pub fn sgd(lr: f64, params: Vec<ParamId>) -> Result<Self> {
        Self::new(OptimizerKind::Sgd, lr, params)
    }

    pub fn adam(lr: f64, params: Vec<ParamId>) -> Result<Self> {
        Self::new(OptimizerKind::adam_default(), lr, params)
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn params(&self) -> &[ParamId] {
        &self.params
    }

    /// Apply one update from the gradients accumulated in `store`. Only the
    /// parameters this optimizer was built with are touched.
    pub fn step(&mut self, store: &mut ParamStore) -> Result<()> {
        self.t += 1;
        for &id in &self.params {
            let p = store.param_mut(id);
            if !p.value.same_shape(&p.grad) {
                return Err(GrdaError::dim(format!("gradient shape for {}", p.name)));
            }
            match self.kind {
                OptimizerKind::Sgd => {
                    for (w, g) in p.value.data_mut().iter_mut().zip(p.grad.data()) {
                        *w -= self.lr * g;
                    }
                }
                OptimizerKind::Adam { beta1, beta2, eps } => {
                    let mo = self.moments.entry(id).or_insert_with(|| Moments {
                        m: Tensor::zeros(p.value.shape()),
                        v: Tensor::zeros(p.value.shape()),
                    });
                    let bc1 = 1.0 - beta1.powi(self.t as i32);
                    let bc2 = 1.0 - beta2.powi(self.t as i32);
                    let grad = p.grad.data();
                    let m = mo.m.data_mut();
                    let v = mo.v.data_mut();
                    for (i, w) in p.value.data_mut().iter_mut().enumerate() {
                        let g = grad[i];
                        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                        let m_hat = m[i] / bc1;
                        let v_hat = v[i] / bc2;
                        *w -= self.lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn one_param(value: f64, grad: f64) -> (ParamStore, ParamId) {
        let mut store = ParamStore::new();
        let id = store.add("p", Tensor::scalar(value));
        store.param_mut(id).grad = Tensor::scalar(grad);
        (store, id)
    }

    #[test]
    fn sgd_step() {
        let (mut store, id) = one_param(1.0, 2.0);
        Optimizer::sgd(0.1, vec![id]).unwrap().step(&mut store).unwrap();
        assert_abs_diff_eq!(store.value(id).item(), 0.8, epsilon = 1e-15);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        // m̂ = g, v̂ = g², so the step is lr * g / (|g| + eps) ≈ lr.
        let (mut store, id) = one_param(1.0, 1.0);
        let lr = 0.01;
        Optimizer::adam(lr, vec![id]).unwrap().step(&mut store).unwrap();
        let expected = 1.0 - lr * 1.0 / (1.0 + 1e-8);
        assert_abs_diff_eq!(store.value(id).item(), expected, epsilon = 1e-15);
        assert_abs_diff_eq!(store.value(id).item(), 1.0 - lr, epsilon = 1e-9);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        for opt in [Optimizer::sgd(0.5, vec![]), Optimizer::adam(0.5, vec![])] {
            let (mut store, id) = one_param(3.0, 0.0);
            let mut opt = opt.unwrap();
            opt.params.push(id);
            opt.step(&mut store).unwrap();
            opt.step(&mut store).unwrap();
            assert_eq!(store.value(id).item(), 3.0);
        }
    }

    #[test]
    fn rejects_bad_learning_rate() {
        assert!(Optimizer::sgd(-1.0, vec![]).is_err());
        assert!(Optimizer::adam(0.0, vec![]).is_err());
        assert!(Optimizer::adam(f64::NAN, vec![]).is_err());
    }

    #[test]
    fn untouched_params_keep_their_values() {
        let mut store = ParamStore::new();
        let a = store.add("a", Tensor::vector(vec![1.0, 2.0]));
        let b = store.add("b", Tensor::vector(vec![3.0, 4.0]));
        store.param_mut(a).grad = Tensor::vector(vec![1.0, 1.0]);
        store.param_mut(b).grad = Tensor::vector(vec![1.0, 1.0]);
        Optimizer::adam(0.1, vec![a]).unwrap().step(&mut store).unwrap();
        assert_eq!(store.value(b).data(), &[3.0, 4.0]);
        assert_ne!(store.value(a).data(), &[1.0, 2.0]);
    }
}
