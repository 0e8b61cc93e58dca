//! DDPG baseline on the relaxed joint space.
//!
//! The hybrid space is relaxed into one continuous vector
//! `(f_1..f_K, x_all)`: the actor emits head preferences `f` alongside all
//! parameters, the executed head is `argmax_k f_k`, and a single-output
//! critic scores the whole joint vector. Exploration draws the entire
//! joint vector uniformly so the baseline explores exactly as widely as
//! the hybrid agents.

use super::explore::sample_block_params;
use super::{seeds, Agent, AgentError, StepLosses};
use crate::math::{sgd_step, Gradients, Schedule};
use crate::net::{
    clamp_blocks, q_loss_grad, theta_loss_grad, ActorScratch, ParamActor, QNetwork, QSample,
    QScratch,
};
use crate::replay::ReplayBuffer;
use crate::space::{ActionSpaceSpec, HybridAction, ParamBlock, ParamLayout};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The relaxed continuous view of a hybrid space: `K` free head-preference
/// coordinates followed by the original parameter blocks.
#[derive(Clone, Debug)]
pub struct RelaxedSpace {
    base_heads: usize,
    joint_layout: ParamLayout,
}

impl RelaxedSpace {
    pub fn base_heads(&self) -> usize {
        self.base_heads
    }

    /// Layout of the joint vector `(f, x_all)`.
    pub fn joint_layout(&self) -> &ParamLayout {
        &self.joint_layout
    }

    pub fn total_dim(&self) -> usize {
        self.joint_layout.total_dim()
    }

    /// Splits a joint vector into `(f, x_all)`.
    pub fn split<'a>(&self, joint: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        joint.split_at(self.base_heads)
    }
}

/// Builds the relaxed view: one free scalar block per head, then the
/// original blocks (so direction pairs keep their unit-circle transform
/// and bounded blocks their clamping and penalty).
pub fn relax_space(space: &ActionSpaceSpec) -> RelaxedSpace {
    let mut blocks = vec![ParamBlock::free(1); space.num_heads()];
    blocks.extend(space.layout().blocks().map(|(_, b)| b.clone()));
    RelaxedSpace {
        base_heads: space.num_heads(),
        joint_layout: ParamLayout::new(blocks).expect("relaxed layout is valid"),
    }
}

#[derive(Clone, Debug)]
pub struct DdpgConfig {
    pub gamma: f64,
    /// Critic stepsize schedule.
    pub alpha: Schedule,
    /// Actor stepsize schedule.
    pub beta: Schedule,
    pub epsilon: Schedule,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub warmup: usize,
    pub penalty_weight: f64,
    pub q_hidden: Vec<usize>,
    pub actor_hidden: Vec<usize>,
    pub seed: u64,
}

impl DdpgConfig {
    pub fn defaults(total_steps: u64) -> Self {
        let lr = Schedule::linear(1e-3, 0.0, total_steps.max(1)).expect("valid schedule");
        Self {
            gamma: 0.95,
            alpha: lr,
            beta: lr,
            epsilon: Schedule::linear(1.0, 0.1, 30_000).expect("valid schedule"),
            batch_size: 32,
            replay_capacity: 10_000,
            warmup: 500,
            penalty_weight: 1.0,
            q_hidden: super::pdqn::DEFAULT_Q_HIDDEN.to_vec(),
            actor_hidden: super::pdqn::DEFAULT_ACTOR_HIDDEN.to_vec(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
struct DdpgTransition {
    state: Vec<f64>,
    /// Joint `(f, x_all)` vector exactly as executed.
    joint: Vec<f64>,
    reward: f64,
    next_state: Vec<f64>,
    terminal: bool,
}

#[derive(Clone)]
pub struct DdpgAgent {
    space: ActionSpaceSpec,
    relaxed: RelaxedSpace,
    cfg: DdpgConfig,
    critic: QNetwork,
    actor: ParamActor,
    buffer: ReplayBuffer<DdpgTransition>,
    steps: u64,
    rng: ChaCha8Rng,
    pending: Option<(Vec<f64>, Vec<f64>)>,
    q_scratch: QScratch,
    actor_scratch: ActorScratch,
    critic_grads: Gradients,
    actor_grads: Gradients,
}

impl DdpgAgent {
    pub fn new(
        obs_dim: usize,
        space: ActionSpaceSpec,
        cfg: DdpgConfig,
    ) -> Result<Self, AgentError> {
        if !(cfg.gamma >= 0.0 && cfg.gamma <= 1.0) {
            return Err(AgentError::InvalidConfig(format!(
                "gamma must lie in [0, 1], got {}",
                cfg.gamma
            )));
        }
        let relaxed = relax_space(&space);
        let critic = QNetwork::new(
            obs_dim,
            relaxed.total_dim(),
            1,
            &cfg.q_hidden,
            false,
            seeds::derive(cfg.seed, seeds::Q_INIT),
        )?;
        let actor = ParamActor::new(
            obs_dim,
            relaxed.joint_layout().clone(),
            &cfg.actor_hidden,
            seeds::derive(cfg.seed, seeds::ACTOR_INIT),
        )?;
        let rng = ChaCha8Rng::seed_from_u64(seeds::derive(cfg.seed, seeds::AGENT_RNG));
        let critic_grads = Gradients::zeros(critic.spec());
        let actor_grads = Gradients::zeros(actor.spec());
        Ok(Self {
            buffer: ReplayBuffer::new(cfg.replay_capacity),
            space,
            relaxed,
            critic,
            actor,
            steps: 0,
            rng,
            pending: None,
            q_scratch: QScratch::new(),
            actor_scratch: ActorScratch::new(),
            critic_grads,
            actor_grads,
            cfg,
        })
    }

    pub fn critic(&self) -> &QNetwork {
        &self.critic
    }

    pub fn critic_mut(&mut self) -> &mut QNetwork {
        &mut self.critic
    }

    pub fn actor(&self) -> &ParamActor {
        &self.actor
    }

    pub fn actor_mut(&mut self) -> &mut ParamActor {
        &mut self.actor
    }

    pub fn config(&self) -> &DdpgConfig {
        &self.cfg
    }

    pub fn relaxed(&self) -> &RelaxedSpace {
        &self.relaxed
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

    fn warmup_len(&self) -> usize {
        self.cfg.warmup.max(self.cfg.batch_size)
    }

    /// Executed action from a joint vector: the usable head with the
    /// highest preference, carrying the parameter part.
    fn execute(&self, joint: &[f64], mask: &[bool]) -> Result<HybridAction, AgentError> {
        let (f, x_all) = self.relaxed.split(joint);
        let mut best: Option<(usize, f64)> = None;
        for (k, &usable) in mask.iter().enumerate() {
            if !usable {
                continue;
            }
            if best.map_or(true, |(_, b)| f[k] > b) {
                best = Some((k, f[k]));
            }
        }
        let (head, _) = best.ok_or(AgentError::AllMasked)?;
        Ok(HybridAction::new(head, x_all.to_vec()))
    }

    fn joint_greedy(&mut self, obs: &[f64]) -> Result<Vec<f64>, AgentError> {
        self.actor.forward(obs, &mut self.actor_scratch)?;
        let mut joint = self.actor_scratch.x().to_vec();
        clamp_blocks(self.relaxed.joint_layout(), &mut joint);
        Ok(joint)
    }
}

impl Agent for DdpgAgent {
    fn space(&self) -> &ActionSpaceSpec {
        &self.space
    }

    fn act(&mut self, obs: &[f64], mask: &[bool]) -> Result<HybridAction, AgentError> {
        let eps = self.cfg.epsilon.value(self.steps);
        let u: f64 = self.rng.random();
        let joint = if u < eps {
            let mut joint = Vec::with_capacity(self.relaxed.total_dim());
            sample_block_params(self.relaxed.joint_layout(), &mut self.rng, &mut joint);
            joint
        } else {
            self.joint_greedy(obs)?
        };
        let action = self.execute(&joint, mask)?;
        self.pending = Some((obs.to_vec(), joint));
        Ok(action)
    }

    fn record(
        &mut self,
        reward: f64,
        next_obs: &[f64],
        terminal: bool,
        _next_mask: &[bool],
    ) -> Result<(), AgentError> {
        let (state, joint) = self.pending.take().ok_or(AgentError::NoPendingAction)?;
        self.buffer.push(DdpgTransition {
            state,
            joint,
            reward,
            next_state: next_obs.to_vec(),
            terminal,
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

        // Critic targets bootstrap through the actor's next-state proposal.
        let mut targets = Vec::with_capacity(batch.len());
        for tr in &batch {
            let y = if tr.terminal {
                tr.reward
            } else {
                self.actor.forward(&tr.next_state, &mut self.actor_scratch)?;
                self.critic.forward(
                    &tr.next_state,
                    self.actor_scratch.x(),
                    &mut self.q_scratch,
                )?;
                tr.reward + self.cfg.gamma * self.q_scratch.q()[0]
            };
            targets.push(y);
        }
        let samples: Vec<QSample> = batch
            .iter()
            .zip(&targets)
            .map(|(tr, &target)| QSample {
                state: &tr.state,
                head: 0,
                x_all: &tr.joint,
                target,
            })
            .collect();
        self.critic_grads.clear();
        let loss_q = q_loss_grad(
            &self.critic,
            &samples,
            weight,
            &mut self.critic_grads,
            &mut self.q_scratch,
        )?;
        drop(samples);
        let alpha = self.cfg.alpha.value(self.steps);
        sgd_step(&mut self.critic.params, &self.critic_grads, alpha)?;

        // Deterministic policy gradient: ascend Q(s, mu(s)) through the
        // updated critic. With a single critic output this is exactly the
        // hybrid actor loss restricted to one head.
        let states: Vec<&[f64]> = batch.iter().map(|tr| tr.state.as_slice()).collect();
        self.actor_grads.clear();
        let loss_theta = theta_loss_grad(
            &self.actor,
            &self.critic,
            &states,
            weight,
            self.cfg.penalty_weight,
            None,
            &mut self.actor_grads,
            &mut self.actor_scratch,
            &mut self.q_scratch,
        )?;
        let beta = self.cfg.beta.value(self.steps);
        sgd_step(&mut self.actor.params, &self.actor_grads, beta)?;

        Ok(Some(StepLosses { loss_q, loss_theta }))
    }

    fn greedy(&mut self, obs: &[f64], mask: &[bool]) -> Result<HybridAction, AgentError> {
        let joint = self.joint_greedy(obs)?;
        self.execute(&joint, mask)
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
        self.cfg.beta.value(self.steps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{BanditEnv, Environment, GoalEnv, Integrator};

    #[test]
    fn relaxed_space_shapes() {
        let env = GoalEnv::new(0, Integrator::Exact);
        let relaxed = relax_space(env.space());
        // Two preference scalars plus the two direction coordinates.
        assert_eq!(relaxed.base_heads(), 2);
        assert_eq!(relaxed.total_dim(), 4);
        let (f, x) = relaxed.split(&[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(f, &[0.1, 0.2]);
        assert_eq!(x, &[0.3, 0.4]);
    }

    #[test]
    fn executed_head_is_argmax_preference_over_usable() {
        let env = BanditEnv::new();
        let cfg = small_cfg();
        let agent = DdpgAgent::new(env.obs_dim(), env.space().clone(), cfg).unwrap();
        let joint = vec![0.2, 0.9, 0.0, 0.0];
        assert_eq!(agent.execute(&joint, &[true, true]).unwrap().head, 1);
        assert_eq!(agent.execute(&joint, &[true, false]).unwrap().head, 0);
        assert!(matches!(
            agent.execute(&joint, &[false, false]),
            Err(AgentError::AllMasked)
        ));
    }

    fn small_cfg() -> DdpgConfig {
        let mut cfg = DdpgConfig::defaults(1000);
        cfg.q_hidden = vec![16, 8];
        cfg.actor_hidden = vec![16];
        cfg.batch_size = 4;
        cfg.warmup = 8;
        cfg
    }

    #[test]
    fn trains_on_goal_env_deterministically() {
        let run = || {
            let mut env = GoalEnv::new(7, Integrator::Exact);
            let mut agent =
                DdpgAgent::new(env.obs_dim(), env.space().clone(), small_cfg()).unwrap();
            let (mut obs, mut mask) = env.reset();
            let mut sink = Vec::new();
            for _ in 0..60 {
                let a = agent.act(&obs, &mask).unwrap();
                let norm = (a.params[0].powi(2) + a.params[1].powi(2)).sqrt();
                assert!(
                    (norm - 1.0).abs() < 1e-9,
                    "direction part stays unit-norm, got {norm}"
                );
                let r = env.step(&a).unwrap();
                agent
                    .record(r.reward, &r.observation, r.terminal, &r.mask)
                    .unwrap();
                if let Some(l) = agent.learn().unwrap() {
                    assert!(l.loss_q.is_finite() && l.loss_theta.is_finite());
                    sink.push((l.loss_q, l.loss_theta));
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

    #[test]
    fn stored_joint_vector_is_clamped_as_executed() {
        let env = BanditEnv::new();
        let mut cfg = small_cfg();
        cfg.epsilon = crate::math::Schedule::constant(0.0).unwrap();
        cfg.actor_hidden = vec![];
        let mut agent = DdpgAgent::new(env.obs_dim(), env.space().clone(), cfg).unwrap();
        let spec = agent.actor().spec().clone();
        // Joint raw output (f0, f1, x0, x1) = (0.5, -0.5, 9, -9): the x
        // part must be clamped to the unit box, preferences left alone.
        agent.actor_mut().params = crate::math::MlpParams::from_raw(
            &spec,
            vec![vec![0.0, 0.0, 0.0, 0.0]],
            vec![vec![0.5, -0.5, 9.0, -9.0]],
        )
        .unwrap();
        let a = agent.act(&[0.0], &[true, true]).unwrap();
        assert_eq!(a.head, 0);
        assert_eq!(a.params, vec![1.0, -1.0]);
        let (_, joint) = agent.pending.as_ref().unwrap().clone();
        assert_eq!(joint, vec![0.5, -0.5, 1.0, -1.0]);
    }
}
