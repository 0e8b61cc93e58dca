//! Learning agents: P-DQN and the two baselines, behind one trait the
//! training harness drives step by step.

mod ddpg;
mod dqn;
mod explore;
mod pdqn;

pub use ddpg::{relax_space, DdpgAgent, DdpgConfig, RelaxedSpace};
pub use dqn::{discretize_goal_space, DqnAgent, DqnConfig};
pub use explore::{sample_block_params, sample_uniform_hybrid};
pub use pdqn::{
    compute_target, PdqnAgent, PdqnConfig, DEFAULT_ACTOR_HIDDEN, DEFAULT_Q_HIDDEN,
};

use crate::math::MathError;
use crate::net::NetError;
use crate::replay::ReplayError;
use crate::space::{ActionSpaceSpec, HybridAction};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Math(#[from] MathError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error("availability mask has no usable head")]
    AllMasked,
    #[error("record called without a pending action; call act first")]
    NoPendingAction,
    #[error("invalid agent configuration: {0}")]
    InvalidConfig(String),
}

/// Losses from one learning step. `loss_theta` is NaN for agents without
/// an actor (the discretized DQN baseline).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepLosses {
    pub loss_q: f64,
    pub loss_theta: f64,
}

/// A step-driven agent. The expected cycle per environment step is
/// `act` -> env step -> `record` -> `learn`; `greedy` is the
/// exploration-free policy used for evaluation and leaves training state
/// untouched.
pub trait Agent {
    fn space(&self) -> &ActionSpaceSpec;

    /// Epsilon-greedy action for the current observation; the agent keeps
    /// the pair internally until `record` completes the transition.
    fn act(&mut self, obs: &[f64], mask: &[bool]) -> Result<HybridAction, AgentError>;

    /// Completes the pending transition and advances the step counter.
    fn record(
        &mut self,
        reward: f64,
        next_obs: &[f64],
        terminal: bool,
        next_mask: &[bool],
    ) -> Result<(), AgentError>;

    /// Runs one learning update; `None` while the replay buffer warms up.
    fn learn(&mut self) -> Result<Option<StepLosses>, AgentError>;

    /// Greedy policy (no exploration, no recording).
    fn greedy(&mut self, obs: &[f64], mask: &[bool]) -> Result<HybridAction, AgentError>;

    /// Completed environment steps.
    fn step_count(&self) -> u64;

    /// Current schedule values, for logging.
    fn epsilon(&self) -> f64;
    fn lr_omega(&self) -> f64;
    fn lr_theta(&self) -> f64;
}

/// Concrete agent dispatch used by the harness (construction, checkpoints
/// and evaluation need to know the variant).
#[derive(Clone)]
pub enum AnyAgent {
    Pdqn(PdqnAgent),
    Dqn8(DqnAgent),
    DdpgRelaxed(DdpgAgent),
}

impl AnyAgent {
    pub fn kind(&self) -> &'static str {
        match self {
            AnyAgent::Pdqn(_) => "pdqn",
            AnyAgent::Dqn8(_) => "dqn8",
            AnyAgent::DdpgRelaxed(_) => "ddpg-relaxed",
        }
    }

    fn inner(&self) -> &dyn Agent {
        match self {
            AnyAgent::Pdqn(a) => a,
            AnyAgent::Dqn8(a) => a,
            AnyAgent::DdpgRelaxed(a) => a,
        }
    }

    fn inner_mut(&mut self) -> &mut dyn Agent {
        match self {
            AnyAgent::Pdqn(a) => a,
            AnyAgent::Dqn8(a) => a,
            AnyAgent::DdpgRelaxed(a) => a,
        }
    }
}

impl Agent for AnyAgent {
    fn space(&self) -> &ActionSpaceSpec {
        self.inner().space()
    }

    fn act(&mut self, obs: &[f64], mask: &[bool]) -> Result<HybridAction, AgentError> {
        self.inner_mut().act(obs, mask)
    }

    fn record(
        &mut self,
        reward: f64,
        next_obs: &[f64],
        terminal: bool,
        next_mask: &[bool],
    ) -> Result<(), AgentError> {
        self.inner_mut().record(reward, next_obs, terminal, next_mask)
    }

    fn learn(&mut self) -> Result<Option<StepLosses>, AgentError> {
        self.inner_mut().learn()
    }

    fn greedy(&mut self, obs: &[f64], mask: &[bool]) -> Result<HybridAction, AgentError> {
        self.inner_mut().greedy(obs, mask)
    }

    fn step_count(&self) -> u64 {
        self.inner().step_count()
    }

    fn epsilon(&self) -> f64 {
        self.inner().epsilon()
    }

    fn lr_omega(&self) -> f64 {
        self.inner().lr_omega()
    }

    fn lr_theta(&self) -> f64 {
        self.inner().lr_theta()
    }
}

/// Seed-stream derivation so one experiment seed gives every component an
/// independent, reproducible stream.
pub mod seeds {
    pub const Q_INIT: u64 = 1;
    pub const ACTOR_INIT: u64 = 2;
    pub const AGENT_RNG: u64 = 3;
    pub const ENV: u64 = 4;
    pub const EVAL_ENV: u64 = 5;
    /// Base for per-worker streams in the asynchronous trainer.
    pub const WORKER_RNG: u64 = 100;
    /// Base for per-worker environment streams.
    pub const WORKER_ENV: u64 = 200;

    /// Splits `seed` into the given stream.
    pub fn derive(seed: u64, stream: u64) -> u64 {
        seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(stream)
    }
}
