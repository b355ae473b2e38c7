//! Gradient-descent updates over a ParamStore: plain SGD or Adam. The caller
//! supplies gradients of a loss to minimize; ascent objectives negate before
//! accumulation.

use std::collections::HashMap;

use super::ParamStore;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step_count: u64,
    moments: HashMap<String, (Vec<f64>, Vec<f64>)>,
}

impl Optimizer {
    pub fn sgd(lr: f64) -> Self {
        Optimizer {
            kind: OptimizerKind::Sgd,
            lr,
            beta1: 0.0,
            beta2: 0.0,
            eps: 0.0,
            step_count: 0,
            moments: HashMap::new(),
        }
    }

    pub fn adam(lr: f64) -> Self {
        Optimizer {
            kind: OptimizerKind::Adam,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step_count: 0,
            moments: HashMap::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Apply one update from the accumulated gradients, then zero them and
    /// bump the step counter. A non-finite gradient leaves every parameter
    /// untouched (the stale gradients are cleared so training can continue).
    pub fn step(&mut self, params: &mut ParamStore) -> Result<()> {
        let mut bad_tensor: Option<String> = None;
        for (name, t) in params.iter_mut() {
            if t.grad.iter().any(|g| !g.is_finite()) {
                bad_tensor = Some(name.to_string());
                break;
            }
        }
        if let Some(name) = bad_tensor {
            params.zero_grads();
            return Err(Error::Numeric(format!(
                "non-finite gradient in '{name}'; update skipped"
            )));
        }
        self.step_count += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (_, t) in params.iter_mut() {
                    for (p, &g) in t.data.iter_mut().zip(&t.grad) {
                        *p -= self.lr * g;
                    }
                }
            }
            OptimizerKind::Adam => {
                let t_step = self.step_count as i32;
                let bc1 = 1.0 - self.beta1.powi(t_step);
                let bc2 = 1.0 - self.beta2.powi(t_step);
                for (name, t) in params.iter_mut() {
                    let (m, v) = self
                        .moments
                        .entry(name.to_string())
                        .or_insert_with(|| (vec![0.0; t.len()], vec![0.0; t.len()]));
                    for i in 0..t.len() {
                        let g = t.grad[i];
                        m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                        v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                        let m_hat = m[i] / bc1;
                        let v_hat = v[i] / bc2;
                        t.data[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
                    }
                }
            }
        }
        params.zero_grads();
        Ok(())
    }
}
