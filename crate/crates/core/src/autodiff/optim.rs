use serde::{Deserialize, Serialize};

use super::ParamStore;
use crate::error::{Error, Result};

/// Adam with β = (0.9, 0.999), ε = 1e−8.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn init(&self, params: &ParamStore) -> AdamState {
        AdamState {
            step: 0,
            m: params.tensors().iter().map(|t| vec![0.0; t.len()]).collect(),
            v: params.tensors().iter().map(|t| vec![0.0; t.len()]).collect(),
        }
    }

    /// One update. Rejects non-finite gradients before touching anything.
    pub fn step(&self, params: &mut ParamStore, grads: &[Vec<f64>], state: &mut AdamState) -> Result<()> {
        if grads.len() != params.len() || state.m.len() != params.len() {
            return Err(Error::shape(
                "adam_step",
                format!("{} params, {} grads", params.len(), grads.len()),
            ));
        }
        for (id, g) in params.ids().zip(grads) {
            if g.len() != params.get(id).len() {
                return Err(Error::shape(
                    "adam_step",
                    format!("`{}`: {} vs {}", params.name(id), params.get(id).len(), g.len()),
                ));
            }
            if let Some(pos) = g.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "gradient of `{}` at element {pos}",
                    params.name(id)
                )));
            }
        }
        state.step += 1;
        let t = state.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for ((p, g), (m, v)) in params
            .tensors_mut()
            .iter_mut()
            .zip(grads)
            .zip(state.m.iter_mut().zip(state.v.iter_mut()))
        {
            for (((w, &gi), mi), vi) in p.data_mut().iter_mut().zip(g).zip(m).zip(v) {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
                let mhat = *mi / c1;
                let vhat = *vi / c2;
                *w -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

/// First/second moment buffers, one per parameter tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}
