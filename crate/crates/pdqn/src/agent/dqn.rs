//! Discretized DQN baseline: the goal space's continuous pull direction is
//! replaced by a fixed fan of compass directions, reducing the problem to
//! a plain discrete Q-learner over `directions + 1` actions.

use super::{seeds, Agent, AgentError, StepLosses};
use crate::env::goal::{HEAD_BRAKE, HEAD_PULL};
use crate::math::{sgd_step, Gradients, Schedule};
use crate::net::{q_loss_grad, QNetwork, QSample, QScratch};
use crate::replay::ReplayBuffer;
use crate::space::{ActionSpaceSpec, BlockKind, HybridAction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Expands a goal-shaped space (brake head plus one direction-pair head)
/// into a discrete action table: entries `0..directions` pull along the
/// angles `2 pi i / directions`, and the final entry brakes.
pub fn discretize_goal_space(
    space: &ActionSpaceSpec,
    directions: usize,
) -> Result<Vec<HybridAction>, AgentError> {
    let shape_ok = space.num_heads() == 2
        && space.layout().block(HEAD_BRAKE).dim == 0
        && matches!(
            space.layout().block(HEAD_PULL).kind,
            BlockKind::DirectionPair
        );
    if !shape_ok {
        return Err(AgentError::InvalidConfig(
            "discretization expects a brake head and a direction-pair pull head".into(),
        ));
    }
    if directions == 0 {
        return Err(AgentError::InvalidConfig(
            "need at least one pull direction".into(),
        ));
    }
    let mut table = Vec::with_capacity(directions + 1);
    for i in 0..directions {
        let angle = std::f64::consts::TAU * i as f64 / directions as f64;
        table.push(HybridAction::new(HEAD_PULL, vec![angle.cos(), angle.sin()]));
    }
    // Brake ignores its parameters; store a valid unit vector anyway.
    table.push(HybridAction::new(HEAD_BRAKE, vec![1.0, 0.0]));
    Ok(table)
}

#[derive(Clone, Debug)]
pub struct DqnConfig {
    pub gamma: f64,
    pub alpha: Schedule,
    pub epsilon: Schedule,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub warmup: usize,
    pub dueling: bool,
    pub q_hidden: Vec<usize>,
    pub directions: usize,
    pub seed: u64,
}

impl DqnConfig {
    pub fn defaults(total_steps: u64) -> Self {
        Self {
            gamma: 0.95,
            alpha: Schedule::linear(1e-3, 0.0, total_steps.max(1)).expect("valid schedule"),
            epsilon: Schedule::linear(1.0, 0.1, 30_000).expect("valid schedule"),
            batch_size: 32,
            replay_capacity: 10_000,
            warmup: 500,
            dueling: true,
            q_hidden: super::pdqn::DEFAULT_Q_HIDDEN.to_vec(),
            directions: 8,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
struct DqnTransition {
    state: Vec<f64>,
    action_idx: usize,
    reward: f64,
    next_state: Vec<f64>,
    terminal: bool,
    /// Per-head mask of the next state, translated to table entries at use.
    next_mask: Vec<bool>,
}

#[derive(Clone)]
pub struct DqnAgent {
    space: ActionSpaceSpec,
    cfg: DqnConfig,
    table: Vec<HybridAction>,
    q: QNetwork,
    buffer: ReplayBuffer<DqnTransition>,
    steps: u64,
    rng: ChaCha8Rng,
    pending: Option<(Vec<f64>, usize)>,
    scratch: QScratch,
    grads: Gradients,
}

impl DqnAgent {
    pub fn new(
        obs_dim: usize,
        space: ActionSpaceSpec,
        cfg: DqnConfig,
    ) -> Result<Self, AgentError> {
        if !(cfg.gamma >= 0.0 && cfg.gamma <= 1.0) {
            return Err(AgentError::InvalidConfig(format!(
                "gamma must lie in [0, 1], got {}",
                cfg.gamma
            )));
        }
        let table = discretize_goal_space(&space, cfg.directions)?;
        let q = QNetwork::new(
            obs_dim,
            0,
            table.len(),
            &cfg.q_hidden,
            cfg.dueling,
            seeds::derive(cfg.seed, seeds::Q_INIT),
        )?;
        let rng = ChaCha8Rng::seed_from_u64(seeds::derive(cfg.seed, seeds::AGENT_RNG));
        let grads = Gradients::zeros(q.spec());
        Ok(Self {
            buffer: ReplayBuffer::new(cfg.replay_capacity),
            table,
            space,
            q,
            steps: 0,
            rng,
            pending: None,
            scratch: QScratch::new(),
            grads,
            cfg,
        })
    }

    pub fn q(&self) -> &QNetwork {
        &self.q
    }

    pub fn q_mut(&mut self) -> &mut QNetwork {
        &mut self.q
    }

    pub fn config(&self) -> &DqnConfig {
        &self.cfg
    }

    pub fn table(&self) -> &[HybridAction] {
        &self.table
    }

    /// Restores the step counter after loading saved parameters; the agent
    /// RNG restarts on a stream derived from the step.
    pub fn set_steps(&mut self, steps: u64) {
        self.steps = steps;
        self.rng = ChaCha8Rng::seed_from_u64(seeds::derive(
            seeds::derive(self.cfg.seed, seeds::AGENT_RNG),
            steps,
        ));
    }

    fn entry_usable(&self, idx: usize, head_mask: &[bool]) -> bool {
        head_mask[self.table[idx].head]
    }

    fn greedy_index(&mut self, obs: &[f64], head_mask: &[bool]) -> Result<usize, AgentError> {
        self.q.forward(obs, &[], &mut self.scratch)?;
        let mut best: Option<(usize, f64)> = None;
        for idx in 0..self.table.len() {
            if !self.entry_usable(idx, head_mask) {
                continue;
            }
            let value = self.scratch.q()[idx];
            if best.map_or(true, |(_, b)| value > b) {
                best = Some((idx, value));
            }
        }
        best.map(|(idx, _)| idx).ok_or(AgentError::AllMasked)
    }

    fn warmup_len(&self) -> usize {
        self.cfg.warmup.max(self.cfg.batch_size)
    }
}

impl Agent for DqnAgent {
    fn space(&self) -> &ActionSpaceSpec {
        &self.space
    }

    fn act(&mut self, obs: &[f64], mask: &[bool]) -> Result<HybridAction, AgentError> {
        let eps = self.cfg.epsilon.value(self.steps);
        let u: f64 = self.rng.random();
        let idx = if u < eps {
            let usable: Vec<usize> = (0..self.table.len())
                .filter(|&i| self.entry_usable(i, mask))
                .collect();
            if usable.is_empty() {
                return Err(AgentError::AllMasked);
            }
            usable[self.rng.random_range(0..usable.len())]
        } else {
            self.greedy_index(obs, mask)?
        };
        self.pending = Some((obs.to_vec(), idx));
        Ok(self.table[idx].clone())
    }

    fn record(
        &mut self,
        reward: f64,
        next_obs: &[f64],
        terminal: bool,
        next_mask: &[bool],
    ) -> Result<(), AgentError> {
        let (state, action_idx) = self.pending.take().ok_or(AgentError::NoPendingAction)?;
        self.buffer.push(DqnTransition {
            state,
            action_idx,
            reward,
            next_state: next_obs.to_vec(),
            terminal,
            next_mask: next_mask.to_vec(),
        });
        self.steps += 1;
        Ok(())
    }

    fn learn(&mut self) -> Result<Option<StepLosses>, AgentError> {
        if self.buffer.len() < self.warmup_len() {
            return Ok(None);
        }
        let batch = self.buffer.sample(self.cfg.batch_size, &mut self.rng)?;
        let weight = 1.0 / batch.len() as f64;
        let mut targets = Vec::with_capacity(batch.len());
        for tr in &batch {
            let y = if tr.terminal {
                tr.reward
            } else {
                self.q.forward(&tr.next_state, &[], &mut self.scratch)?;
                let best = (0..self.table.len())
                    .filter(|&i| tr.next_mask[self.table[i].head])
                    .map(|i| self.scratch.q()[i])
                    .fold(f64::NEG_INFINITY, f64::max);
                assert!(
                    best > f64::NEG_INFINITY,
                    "non-terminal transition with an all-masked next state"
                );
                tr.reward + self.cfg.gamma * best
            };
            targets.push(y);
        }
        let samples: Vec<QSample> = batch
            .iter()
            .zip(&targets)
            .map(|(tr, &target)| QSample {
                state: &tr.state,
                head: tr.action_idx,
                x_all: &[],
                target,
            })
            .collect();
        self.grads.clear();
        let loss_q = q_loss_grad(&self.q, &samples, weight, &mut self.grads, &mut self.scratch)?;
        drop(samples);
        let alpha = self.cfg.alpha.value(self.steps);
        sgd_step(&mut self.q.params, &self.grads, alpha)?;
        Ok(Some(StepLosses {
            loss_q,
            loss_theta: f64::NAN,
        }))
    }

    fn greedy(&mut self, obs: &[f64], mask: &[bool]) -> Result<HybridAction, AgentError> {
        let idx = self.greedy_index(obs, mask)?;
        Ok(self.table[idx].clone())
    }

    fn step_count(&self) -> u64 {
        self.steps
    }

    fn epsilon(&self) -> f64 {
        self.cfg.epsilon.value(self.steps)
    }

    fn lr_omega(&self) -> f64 {
        self.cfg.alpha.value(self.steps)
    }

    fn lr_theta(&self) -> f64 {
        f64::NAN
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Environment, GoalEnv, Integrator};

    #[test]
    fn table_covers_compass_plus_brake() {
        let env = GoalEnv::new(0, Integrator::Exact);
        let table = discretize_goal_space(env.space(), 8).unwrap();
        assert_eq!(table.len(), 9);
        // Entry 0 pulls east, entry 2 pulls north, entry 4 west.
        assert_eq!(table[0].head, HEAD_PULL);
        assert!((table[0].params[0] - 1.0).abs() < 1e-15);
        assert!(table[0].params[1].abs() < 1e-15);
        assert!(table[2].params[0].abs() < 1e-15);
        assert!((table[2].params[1] - 1.0).abs() < 1e-15);
        assert!((table[4].params[0] + 1.0).abs() < 1e-15);
        assert_eq!(table[8].head, HEAD_BRAKE);
        // Every entry is executable.
        let mut env = GoalEnv::new(1, Integrator::Exact);
        for entry in &table {
            env.reset_to([0.0, 0.0], [0.5, 0.5]);
            env.step(entry).unwrap();
        }
    }

    #[test]
    fn rejects_non_goal_spaces() {
        let env = crate::env::BanditEnv::new();
        assert!(discretize_goal_space(env.space(), 8).is_err());
    }

    #[test]
    fn trains_and_reproduces_deterministically() {
        let run = || {
            let mut env = GoalEnv::new(3, Integrator::Exact);
            let mut cfg = DqnConfig::defaults(1000);
            cfg.q_hidden = vec![16, 8];
            cfg.batch_size = 4;
            cfg.warmup = 8;
            let mut agent = DqnAgent::new(env.obs_dim(), env.space().clone(), cfg).unwrap();
            let (mut obs, mut mask) = env.reset();
            let mut sink = Vec::new();
            for _ in 0..80 {
                let a = agent.act(&obs, &mask).unwrap();
                let r = env.step(&a).unwrap();
                agent
                    .record(r.reward, &r.observation, r.terminal, &r.mask)
                    .unwrap();
                if let Some(l) = agent.learn().unwrap() {
                    assert!(l.loss_q.is_finite());
                    assert!(l.loss_theta.is_nan(), "no actor loss for DQN");
                    sink.push(l.loss_q);
                }
                if r.terminal {
                    let (o, m) = env.reset();
                    obs = o;
                    mask = m;
                } else {
                    obs = r.observation;
                    mask = r.mask;
                }
            }
            sink
        };
        assert_eq!(run(), run());
    }
}
