//! Training and evaluation harness: run configuration, CSV logging,
//! checkpoints, the training loops, and the numerical gradient checker.

pub mod checkpoint;
pub mod config;
pub mod evaluate;
pub mod gradcheck;
pub mod logging;
pub mod train;

pub use checkpoint::{read_checkpoint, write_checkpoint, NamedTensor};
pub use config::RunConfig;
pub use evaluate::{evaluate_agent, evaluate_policy, EvalReport};
pub use gradcheck::{run_gradcheck, GradcheckReport};
pub use train::{run_training, TrainSummary};

use crate::agent::AgentError;
use crate::distributed::DistError;
use crate::env::EnvError;
use crate::math::MathError;
use crate::net::NetError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Math(#[from] MathError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
