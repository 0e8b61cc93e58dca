//! Flat `key = value` run configuration.
//!
//! One assignment per line, `#` starts a comment, keys may appear at most
//! once. Unknown keys and malformed values are rejected with the line
//! number so typos never silently fall back to defaults.

use super::HarnessError;
use crate::agent::{
    seeds, AnyAgent, DdpgAgent, DdpgConfig, DqnAgent, DqnConfig, PdqnAgent, PdqnConfig,
};
use crate::distributed::{AsyncConfig, AsyncOptimizer};
use crate::env::{make_env, Environment, Integrator};
use crate::math::Schedule;
use std::collections::HashSet;
use std::path::Path;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub env: String,
    pub agent: String,
    pub total_steps: u64,
    pub seed: u64,
    pub gamma: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub warmup: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Zero means "anneal over `total_steps`".
    pub epsilon_horizon: u64,
    pub lr_start: f64,
    pub lr_end: f64,
    /// Zero means "anneal over `total_steps`".
    pub lr_horizon: u64,
    /// Actor stepsize as a multiple of the Q stepsize.
    pub beta_multiplier: f64,
    pub penalty_weight: f64,
    pub dueling: bool,
    pub q_hidden: Vec<usize>,
    pub actor_hidden: Vec<usize>,
    /// Zero disables the target network.
    pub target_sync: u64,
    pub simultaneous_updates: bool,
    /// Number of discrete pull directions for the dqn8 baseline.
    pub directions: usize,
    pub eval_interval: u64,
    pub eval_trials: usize,
    pub integrator: Integrator,
    /// Zero runs the sequential replay agent; one or more runs the
    /// asynchronous n-step trainer with that many workers.
    pub workers: usize,
    pub tmax: usize,
    /// RMSProp decay for the asynchronous trainer.
    pub rho: f64,
    pub eps_rms: f64,
    /// Server-side optimizer for the asynchronous trainer.
    pub async_optimizer: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env: String::new(),
            agent: "pdqn".into(),
            total_steps: 100_000,
            seed: 0,
            gamma: 0.95,
            batch_size: 32,
            replay_capacity: 10_000,
            warmup: 500,
            epsilon_start: 1.0,
            epsilon_end: 0.1,
            epsilon_horizon: 0,
            lr_start: 0.1,
            lr_end: 0.0,
            lr_horizon: 0,
            beta_multiplier: 0.1,
            penalty_weight: 1.0,
            dueling: true,
            q_hidden: vec![64, 32, 32],
            actor_hidden: vec![64, 32],
            target_sync: 0,
            simultaneous_updates: false,
            directions: 8,
            eval_interval: 5_000,
            eval_trials: 100,
            integrator: Integrator::Exact,
            workers: 0,
            tmax: 20,
            rho: 0.9,
            eps_rms: 1e-8,
            async_optimizer: "rmsprop".into(),
        }
    }
}

fn parse_as<T: std::str::FromStr>(value: &str, line: usize, key: &str) -> Result<T, HarnessError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| HarnessError::Config {
        line,
        message: format!("bad value for {key}: {e}"),
    })
}

fn parse_bool(value: &str, line: usize, key: &str) -> Result<bool, HarnessError> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(HarnessError::Config {
            line,
            message: format!("bad value for {key}: expected true or false, got {other}"),
        }),
    }
}

fn parse_list(value: &str, line: usize, key: &str) -> Result<Vec<usize>, HarnessError> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|part| parse_as(part.trim(), line, key))
        .collect()
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut cfg = Self::default();
        let mut seen = HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| HarnessError::Config {
                line,
                message: format!("expected key = value, got {content:?}"),
            })?;
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(HarnessError::Config {
                    line,
                    message: format!("duplicate key {key}"),
                });
            }
            match key {
                "env" => cfg.env = value.to_string(),
                "agent" => cfg.agent = value.to_string(),
                "total_steps" => cfg.total_steps = parse_as(value, line, key)?,
                "seed" => cfg.seed = parse_as(value, line, key)?,
                "gamma" => cfg.gamma = parse_as(value, line, key)?,
                "batch_size" => cfg.batch_size = parse_as(value, line, key)?,
                "replay_capacity" => cfg.replay_capacity = parse_as(value, line, key)?,
                "warmup" => cfg.warmup = parse_as(value, line, key)?,
                "epsilon_start" => cfg.epsilon_start = parse_as(value, line, key)?,
                "epsilon_end" => cfg.epsilon_end = parse_as(value, line, key)?,
                "epsilon_horizon" => cfg.epsilon_horizon = parse_as(value, line, key)?,
                "lr_start" => cfg.lr_start = parse_as(value, line, key)?,
                "lr_end" => cfg.lr_end = parse_as(value, line, key)?,
                "lr_horizon" => cfg.lr_horizon = parse_as(value, line, key)?,
                "beta_multiplier" => cfg.beta_multiplier = parse_as(value, line, key)?,
                "penalty_weight" => cfg.penalty_weight = parse_as(value, line, key)?,
                "dueling" => cfg.dueling = parse_bool(value, line, key)?,
                "q_hidden" => cfg.q_hidden = parse_list(value, line, key)?,
                "actor_hidden" => cfg.actor_hidden = parse_list(value, line, key)?,
                "target_sync" => cfg.target_sync = parse_as(value, line, key)?,
                "simultaneous_updates" => {
                    cfg.simultaneous_updates = parse_bool(value, line, key)?
                }
                "directions" => cfg.directions = parse_as(value, line, key)?,
                "eval_interval" => cfg.eval_interval = parse_as(value, line, key)?,
                "eval_trials" => cfg.eval_trials = parse_as(value, line, key)?,
                "integrator" => {
                    cfg.integrator = match value {
                        "exact" => Integrator::Exact,
                        "euler" => Integrator::Euler,
                        other => {
                            return Err(HarnessError::Config {
                                line,
                                message: format!(
                                    "bad value for integrator: expected exact or euler, got {other}"
                                ),
                            })
                        }
                    }
                }
                "workers" => cfg.workers = parse_as(value, line, key)?,
                "tmax" => cfg.tmax = parse_as(value, line, key)?,
                "rho" => cfg.rho = parse_as(value, line, key)?,
                "eps_rms" => cfg.eps_rms = parse_as(value, line, key)?,
                "async_optimizer" => cfg.async_optimizer = value.to_string(),
                other => {
                    return Err(HarnessError::Config {
                        line,
                        message: format!("unknown key {other}"),
                    })
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |message: String| Err(HarnessError::InvalidConfig(message));
        match self.env.as_str() {
            "goal" | "bandit" | "masked-bandit" => {}
            "" => return fail("env is required".into()),
            other => return fail(format!("unknown env {other}")),
        }
        match self.agent.as_str() {
            "pdqn" | "dqn8" | "ddpg-relaxed" => {}
            other => return fail(format!("unknown agent {other}")),
        }
        if !(self.gamma >= 0.0 && self.gamma <= 1.0) {
            return fail(format!("gamma must lie in [0, 1], got {}", self.gamma));
        }
        for (name, v) in [
            ("epsilon_start", self.epsilon_start),
            ("epsilon_end", self.epsilon_end),
        ] {
            if !(v >= 0.0 && v <= 1.0) {
                return fail(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        for (name, v) in [
            ("lr_start", self.lr_start),
            ("lr_end", self.lr_end),
            ("beta_multiplier", self.beta_multiplier),
            ("penalty_weight", self.penalty_weight),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return fail(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        if self.total_steps == 0 {
            return fail("total_steps must be positive".into());
        }
        if self.batch_size == 0 {
            return fail("batch_size must be positive".into());
        }
        if self.replay_capacity < self.batch_size {
            return fail(format!(
                "replay_capacity {} is smaller than batch_size {}",
                self.replay_capacity, self.batch_size
            ));
        }
        if self.eval_interval == 0 {
            return fail("eval_interval must be positive".into());
        }
        if self.eval_trials == 0 {
            return fail("eval_trials must be positive".into());
        }
        if self.directions == 0 {
            return fail("directions must be positive".into());
        }
        if self.workers > 0 {
            if self.agent != "pdqn" {
                return fail(format!(
                    "the asynchronous trainer only supports agent pdqn, got {}",
                    self.agent
                ));
            }
            if self.tmax == 0 {
                return fail("tmax must be positive".into());
            }
            if !(self.rho >= 0.0 && self.rho < 1.0) {
                return fail(format!("rho must lie in [0, 1), got {}", self.rho));
            }
            if !(self.eps_rms > 0.0 && self.eps_rms.is_finite()) {
                return fail(format!("eps_rms must be positive, got {}", self.eps_rms));
            }
            match self.async_optimizer.as_str() {
                "rmsprop" | "sgd" => {}
                other => return fail(format!("unknown async_optimizer {other}")),
            }
        }
        Ok(())
    }

    pub fn epsilon_schedule(&self) -> Result<Schedule, HarnessError> {
        let horizon = if self.epsilon_horizon == 0 {
            self.total_steps
        } else {
            self.epsilon_horizon
        };
        Ok(Schedule::linear(
            self.epsilon_start,
            self.epsilon_end,
            horizon,
        )?)
    }

    pub fn alpha_schedule(&self) -> Result<Schedule, HarnessError> {
        let horizon = if self.lr_horizon == 0 {
            self.total_steps
        } else {
            self.lr_horizon
        };
        Ok(Schedule::linear(self.lr_start, self.lr_end, horizon)?)
    }

    pub fn beta_schedule(&self) -> Result<Schedule, HarnessError> {
        Ok(self.alpha_schedule()?.scaled(self.beta_multiplier)?)
    }

    /// The training environment on the run's env seed stream.
    pub fn build_env(&self) -> Result<Box<dyn Environment>, HarnessError> {
        Ok(make_env(
            &self.env,
            seeds::derive(self.seed, seeds::ENV),
            self.integrator,
        )?)
    }

    /// A fresh evaluation environment; the fixed stream makes every
    /// evaluation see the same episode sequence.
    pub fn build_eval_env(&self) -> Result<Box<dyn Environment>, HarnessError> {
        Ok(make_env(
            &self.env,
            seeds::derive(self.seed, seeds::EVAL_ENV),
            self.integrator,
        )?)
    }

    pub fn build_agent(&self) -> Result<AnyAgent, HarnessError> {
        let env = self.build_env()?;
        let space = env.space().clone();
        let obs_dim = env.obs_dim();
        let agent = match self.agent.as_str() {
            "pdqn" => {
                let cfg = PdqnConfig {
                    gamma: self.gamma,
                    alpha: self.alpha_schedule()?,
                    beta: self.beta_schedule()?,
                    epsilon: self.epsilon_schedule()?,
                    batch_size: self.batch_size,
                    replay_capacity: self.replay_capacity,
                    warmup: self.warmup,
                    penalty_weight: self.penalty_weight,
                    dueling: self.dueling,
                    q_hidden: self.q_hidden.clone(),
                    actor_hidden: self.actor_hidden.clone(),
                    target_sync: (self.target_sync > 0).then_some(self.target_sync),
                    simultaneous_updates: self.simultaneous_updates,
                    seed: self.seed,
                };
                AnyAgent::Pdqn(PdqnAgent::new(obs_dim, space, cfg)?)
            }
            "dqn8" => {
                let cfg = DqnConfig {
                    gamma: self.gamma,
                    alpha: self.alpha_schedule()?,
                    epsilon: self.epsilon_schedule()?,
                    batch_size: self.batch_size,
                    replay_capacity: self.replay_capacity,
                    warmup: self.warmup,
                    dueling: self.dueling,
                    q_hidden: self.q_hidden.clone(),
                    directions: self.directions,
                    seed: self.seed,
                };
                AnyAgent::Dqn8(DqnAgent::new(obs_dim, space, cfg)?)
            }
            "ddpg-relaxed" => {
                let cfg = DdpgConfig {
                    gamma: self.gamma,
                    alpha: self.alpha_schedule()?,
                    beta: self.beta_schedule()?,
                    epsilon: self.epsilon_schedule()?,
                    batch_size: self.batch_size,
                    replay_capacity: self.replay_capacity,
                    warmup: self.warmup,
                    penalty_weight: self.penalty_weight,
                    q_hidden: self.q_hidden.clone(),
                    actor_hidden: self.actor_hidden.clone(),
                    seed: self.seed,
                };
                AnyAgent::DdpgRelaxed(DdpgAgent::new(obs_dim, space, cfg)?)
            }
            other => return Err(HarnessError::InvalidConfig(format!("unknown agent {other}"))),
        };
        Ok(agent)
    }

    pub fn async_config(&self) -> Result<AsyncConfig, HarnessError> {
        let optimizer = match self.async_optimizer.as_str() {
            "sgd" => AsyncOptimizer::Sgd,
            _ => AsyncOptimizer::RmsProp {
                rho: self.rho,
                eps: self.eps_rms,
            },
        };
        Ok(AsyncConfig {
            workers: self.workers,
            t_max: self.tmax,
            total_steps: self.total_steps,
            gamma: self.gamma,
            alpha: self.alpha_schedule()?,
            beta: self.beta_schedule()?,
            epsilon: self.epsilon_schedule()?,
            penalty_weight: self.penalty_weight,
            optimizer,
            eval_interval: Some(self.eval_interval),
            seed: self.seed,
        })
    }
}
