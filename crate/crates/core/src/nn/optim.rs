//! Adaptive-moment optimizer with decoupled weight decay.
//!
//! ```text
//! θ ← θ·(1 − lr·λ)
//! m ← β₁m + (1 − β₁)g        v ← β₂v + (1 − β₂)g²
//! θ ← θ − lr·m̂/(√v̂ + ε)      m̂ = m/(1 − β₁ᵗ), v̂ = v/(1 − β₂ᵗ)
//! ```
//!
//! Decay applies to every parameter tensor, biases included.

use crate::error::{Error, Result};
use crate::nn::model::{Network, ParamTensors};

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new<P: ParamTensors + ?Sized>(params: &P) -> Self {
        let shapes: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
        AdamState {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    /// One update of `params` in place. Nothing is modified when a gradient is
    /// non-finite or the shapes disagree.
    pub fn update(
        &mut self,
        mut params: Vec<&mut [f64]>,
        grads: Vec<&[f64]>,
        lr: f64,
        weight_decay: f64,
        epoch: usize,
    ) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::DimensionMismatch {
                expected: self.m.len(),
                found: params.len().min(grads.len()),
            });
        }
        for ((p, g), m) in params.iter().zip(&grads).zip(&self.m) {
            if p.len() != m.len() || g.len() != m.len() {
                return Err(Error::DimensionMismatch {
                    expected: m.len(),
                    found: p.len().min(g.len()),
                });
            }
        }
        if grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite {
                epoch,
                what: "gradient",
            });
        }
        self.step += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let bc1 = 1.0 - b1.powi(self.step as i32);
        let bc2 = 1.0 - b2.powi(self.step as i32);
        let decay = 1.0 - lr * weight_decay;
        for (((p, g), m), v) in params.iter_mut().zip(&grads).zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = b1 * m[i] + (1.0 - b1) * gi;
                v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] = p[i] * decay - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Applies one optimizer step to `model` using `grads`.
pub fn optimizer_step<N: Network>(
    model: &mut N,
    grads: &N::Grad,
    state: &mut AdamState,
    learning_rate: f64,
    weight_decay: f64,
    epoch: usize,
) -> Result<()> {
    state.update(model.tensors_mut(), grads.tensors(), learning_rate, weight_decay, epoch)
}
