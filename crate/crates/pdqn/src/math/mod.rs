//! Numerical core: a small `f64` MLP engine with explicit forward caches and
//! hand-written backprop, plain SGD and RMSProp steps, linear schedules, and
//! a central-finite-difference gradient oracle used to verify every analytic
//! gradient in the crate.

mod fd;
mod mlp;
mod optim;
mod schedule;

pub use fd::finite_diff_grad;
pub use mlp::{
    backward, backward_input_into, backward_into, forward, forward_into, Activation,
    ForwardCache, Gradients, MlpParams, MlpSpec,
};
pub use optim::{sgd_step, RmsProp};
pub use schedule::Schedule;

use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum MathError {
    #[error("{context}: expected length {expected}, got {got}")]
    ShapeMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
}
