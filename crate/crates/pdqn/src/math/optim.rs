//! Plain SGD and the shared-statistics RMSProp step used by the
//! asynchronous trainer.

use super::mlp::{Gradients, MlpParams, MlpSpec};
use super::MathError;

/// `params -= lr * grads`. Errors on a non-finite learning rate or any
/// non-finite updated parameter.
pub fn sgd_step(params: &mut MlpParams, grads: &Gradients, lr: f64) -> Result<(), MathError> {
    if !lr.is_finite() {
        return Err(MathError::NonFinite {
            context: "sgd learning rate",
        });
    }
    params.add_scaled(grads, -lr)
}

/// RMSProp with element-wise second-moment statistics:
/// `v <- rho * v + (1 - rho) * g^2`, then `p -= lr * g / sqrt(v + eps)`.
#[derive(Clone, Debug)]
pub struct RmsProp {
    v: Gradients,
    rho: f64,
    eps: f64,
}

impl RmsProp {
    pub fn new(spec: &MlpSpec, rho: f64, eps: f64) -> Result<Self, MathError> {
        if !(0.0..1.0).contains(&rho) {
            return Err(MathError::InvalidHyperparameter(format!(
                "rmsprop rho must be in [0, 1), got {rho}"
            )));
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(MathError::InvalidHyperparameter(format!(
                "rmsprop eps must be positive, got {eps}"
            )));
        }
        Ok(Self {
            v: Gradients::zeros(spec),
            rho,
            eps,
        })
    }

    pub fn step(
        &mut self,
        params: &mut MlpParams,
        grads: &Gradients,
        lr: f64,
    ) -> Result<(), MathError> {
        if !lr.is_finite() {
            return Err(MathError::NonFinite {
                context: "rmsprop learning rate",
            });
        }
        for l in 0..self.v.weights.len() {
            update_slice(
                &mut self.v.weights[l],
                &grads.weights[l],
                self.rho,
            );
            update_slice(&mut self.v.biases[l], &grads.biases[l], self.rho);
        }
        // Scaled gradient applied through the same guarded update as SGD.
        let mut scaled = grads.clone();
        for l in 0..scaled.weights.len() {
            scale_slice(&mut scaled.weights[l], &self.v.weights[l], self.eps);
            scale_slice(&mut scaled.biases[l], &self.v.biases[l], self.eps);
        }
        params.add_scaled(&scaled, -lr)
    }

    /// Second-moment statistics, exposed for checkpointing.
    pub fn stats(&self) -> &Gradients {
        &self.v
    }

    pub fn set_stats(&mut self, v: Gradients) {
        self.v = v;
    }
}

fn update_slice(v: &mut [f64], g: &[f64], rho: f64) {
    assert_eq!(v.len(), g.len(), "rmsprop stats shape must match gradients");
    for (vi, gi) in v.iter_mut().zip(g) {
        *vi = rho * *vi + (1.0 - rho) * gi * gi;
    }
}

fn scale_slice(g: &mut [f64], v: &[f64], eps: f64) {
    for (gi, vi) in g.iter_mut().zip(v) {
        *gi /= (vi + eps).sqrt();
    }
}
