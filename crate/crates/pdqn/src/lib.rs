//! Deep reinforcement learning on hybrid discrete-continuous action spaces.
//!
//! The crate implements P-DQN: a single Q-network scores every discrete head
//! given the full continuous parameter vector, while a deterministic actor
//! proposes those parameters. Training is available in a replay-buffer
//! variant ([`agent::PdqnAgent`]) and an asynchronous n-step variant
//! ([`distributed::run_async`]), alongside two baselines (a discretized DQN
//! and DDPG on the relaxed joint space) and a point-mass goal environment.
//!
//! Everything numeric is `f64` and hand-rolled on flat vectors: the math is
//! small enough that a dedicated tensor library would cost more in opacity
//! than it saves in code, and gradient checks against central finite
//! differences keep the backward passes honest.

pub mod agent;
pub mod distributed;
pub mod env;
pub mod harness;
pub mod math;
pub mod net;
pub mod replay;
pub mod space;

pub use agent::{Agent, AnyAgent};
pub use env::Environment;
pub use space::{ActionSpaceSpec, HybridAction};
