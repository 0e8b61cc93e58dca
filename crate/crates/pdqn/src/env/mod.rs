//! Episodic environments over hybrid action spaces.

pub mod bandit;
pub mod goal;

pub use bandit::{BanditEnv, MaskedBanditEnv};
pub use goal::{GoalEnv, Integrator};

use crate::space::{ActionSpaceSpec, HybridAction};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("episode already finished; call reset")]
    EpisodeFinished,
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("head {head} is masked this episode")]
    MaskedHead { head: usize },
    #[error("unknown environment name {0:?} (expected goal, bandit or masked-bandit)")]
    UnknownName(String),
}

/// Outcome of one environment step. `mask` is the availability mask that
/// applies to the *next* action (for terminal steps: the next episode's
/// first action). `goal` is set on the terminal step of a successful
/// episode.
#[derive(Clone, Debug)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub terminal: bool,
    pub goal: bool,
    pub mask: Vec<bool>,
}

pub trait Environment {
    /// Stable name used in configs and checkpoints.
    fn name(&self) -> &'static str;

    fn space(&self) -> &ActionSpaceSpec;

    fn obs_dim(&self) -> usize;

    /// Starts a new episode, returning the first observation and the
    /// availability mask for the first action.
    fn reset(&mut self) -> (Vec<f64>, Vec<bool>);

    fn step(&mut self, action: &HybridAction) -> Result<StepResult, EnvError>;
}

/// Builds an environment by its config-file name.
pub fn make_env(
    name: &str,
    seed: u64,
    integrator: Integrator,
) -> Result<Box<dyn Environment>, EnvError> {
    match name {
        "goal" => Ok(Box::new(GoalEnv::new(seed, integrator))),
        "bandit" => Ok(Box::new(BanditEnv::new())),
        "masked-bandit" => Ok(Box::new(MaskedBanditEnv::new())),
        other => Err(EnvError::UnknownName(other.to_string())),
    }
}
