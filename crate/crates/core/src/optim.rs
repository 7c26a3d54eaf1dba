//! Parameter update rules.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Gradients, NumArray, ParamSet};

/// Adaptive moment estimation (minimizing).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Option<NumArray>>,
    v: Vec<Option<NumArray>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Descends along `grads`; parameters without a gradient are untouched.
    pub fn step(&mut self, params: &mut ParamSet, grads: &Gradients) {
        if self.m.len() < params.len() {
            self.m.resize(params.len(), None);
            self.v.resize(params.len(), None);
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for (id, g) in grads.iter() {
            let p = params.get_mut(id);
            let m = self.m[id.0].get_or_insert_with(|| NumArray::zeros(g.shape()));
            let v = self.v[id.0].get_or_insert_with(|| NumArray::zeros(g.shape()));
            for (((w, gi), mi), vi) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *w -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

/// Plain step `params += rate · grads`.
pub fn ascend(params: &mut ParamSet, grads: &Gradients, rate: f64) {
    for (id, g) in grads.iter() {
        params.get_mut(id).add_scaled(g, rate);
    }
}
