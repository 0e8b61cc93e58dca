//! Networks over the hybrid action space and their training losses.
//!
//! [`QNetwork`] scores every discrete head from `(state, x_all)` in one
//! pass, optionally through a dueling value/advantage head. [`ParamActor`]
//! maps a state to the full parameter vector `x_all`, applying per-block
//! output transforms (unit-circle normalization for direction pairs).
//! The loss functions return analytic gradients that are held to the
//! finite-difference oracle by the gradcheck suite.

mod actor;
mod loss;
mod q;
mod transform;

pub use actor::{ActorScratch, ParamActor};
pub use loss::{greedy_action, q_loss_grad, theta_loss_grad, QSample};
pub use q::{QNetwork, QScratch};
pub use transform::{bounds_penalty, bounds_penalty_grad, clamp_blocks, transform_backward, transform_blocks};

use crate::math::MathError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error(transparent)]
    Math(#[from] MathError),
    #[error("availability mask has no usable head")]
    AllMasked,
    #[error("availability mask length {got} does not match {expected} heads")]
    MaskLength { expected: usize, got: usize },
    #[error("non-finite target value in Q loss batch")]
    NonFiniteTarget,
}
