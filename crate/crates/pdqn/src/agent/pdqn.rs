//! The replay-buffer P-DQN agent.
//!
//! One Q network scores all discrete heads given the actor's full
//! parameter vector; the actor is trained to push every head's Q value up
//! while the Q network regresses on one-step bootstrapped targets. Both
//! are updated by plain SGD on every environment step once the replay
//! buffer has warmed up.

use super::explore::sample_uniform_hybrid;
use super::{seeds, Agent, AgentError, StepLosses};
use crate::math::{sgd_step, Gradients, Schedule};
use crate::net::{
    greedy_action, q_loss_grad, theta_loss_grad, ActorScratch, NetError, ParamActor, QNetwork,
    QSample, QScratch,
};
use crate::replay::{ReplayBuffer, Transition};
use crate::space::{ActionSpaceSpec, HybridAction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Default hidden sizes for the Q network.
pub const DEFAULT_Q_HIDDEN: [usize; 3] = [64, 32, 32];
/// Default hidden sizes for the parameter actor.
pub const DEFAULT_ACTOR_HIDDEN: [usize; 2] = [64, 32];

#[derive(Clone, Debug)]
pub struct PdqnConfig {
    pub gamma: f64,
    /// Q-network stepsize schedule.
    pub alpha: Schedule,
    /// Actor stepsize schedule.
    pub beta: Schedule,
    pub epsilon: Schedule,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Training starts once the buffer holds `max(batch_size, warmup)`
    /// transitions.
    pub warmup: usize,
    pub penalty_weight: f64,
    pub dueling: bool,
    pub q_hidden: Vec<usize>,
    pub actor_hidden: Vec<usize>,
    /// When set, bootstrap targets come from a frozen copy of the Q network
    /// refreshed every this many steps. Off by default: the one-network
    /// update is the reference behavior.
    pub target_sync: Option<u64>,
    /// Compute both gradients against the pre-update parameters and apply
    /// them together. By default the Q step is applied first and the actor
    /// gradient is taken against the updated Q network.
    pub simultaneous_updates: bool,
    pub seed: u64,
}

impl PdqnConfig {
    /// Reference hyperparameters; the stepsize anneals to zero over
    /// `total_steps` environment steps.
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
            dueling: true,
            q_hidden: DEFAULT_Q_HIDDEN.to_vec(),
            actor_hidden: DEFAULT_ACTOR_HIDDEN.to_vec(),
            target_sync: None,
            simultaneous_updates: false,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<(), AgentError> {
        if !(self.gamma >= 0.0 && self.gamma <= 1.0) {
            return Err(AgentError::InvalidConfig(format!(
                "gamma must lie in [0, 1], got {}",
                self.gamma
            )));
        }
        if self.batch_size == 0 {
            return Err(AgentError::InvalidConfig("batch_size must be positive".into()));
        }
        if !(self.penalty_weight >= 0.0 && self.penalty_weight.is_finite()) {
            return Err(AgentError::InvalidConfig(format!(
                "penalty_weight must be finite and non-negative, got {}",
                self.penalty_weight
            )));
        }
        Ok(())
    }
}

/// One-step bootstrapped target: `y = r` on terminal transitions, else
/// `y = r + gamma * max_k Q(s', k, x(s'))` over usable heads of the next
/// state's mask.
///
/// Panics if a non-terminal transition has no usable head; environments
/// guarantee at least one.
#[allow(clippy::too_many_arguments)]
pub fn compute_target(
    q: &QNetwork,
    actor: &ParamActor,
    reward: f64,
    next_state: &[f64],
    terminal: bool,
    next_mask: &[bool],
    gamma: f64,
    q_scratch: &mut QScratch,
    actor_scratch: &mut ActorScratch,
) -> Result<f64, NetError> {
    if terminal {
        return Ok(reward);
    }
    actor.forward(next_state, actor_scratch)?;
    q.forward(next_state, actor_scratch.x(), q_scratch)?;
    let best = next_mask
        .iter()
        .enumerate()
        .filter(|(_, &usable)| usable)
        .map(|(k, _)| q_scratch.q()[k])
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(
        best > f64::NEG_INFINITY,
        "non-terminal transition with an all-masked next state"
    );
    Ok(reward + gamma * best)
}

#[derive(Clone)]
pub struct PdqnAgent {
    space: ActionSpaceSpec,
    cfg: PdqnConfig,
    q: QNetwork,
    actor: ParamActor,
    target_q: Option<QNetwork>,
    buffer: ReplayBuffer<Transition>,
    steps: u64,
    rng: ChaCha8Rng,
    pending: Option<(Vec<f64>, HybridAction)>,
    q_scratch: QScratch,
    actor_scratch: ActorScratch,
    q_grads: Gradients,
    actor_grads: Gradients,
}

impl PdqnAgent {
    pub fn new(
        obs_dim: usize,
        space: ActionSpaceSpec,
        cfg: PdqnConfig,
    ) -> Result<Self, AgentError> {
        cfg.validate()?;
        let q = QNetwork::new(
            obs_dim,
            space.total_param_dim(),
            space.num_heads(),
            &cfg.q_hidden,
            cfg.dueling,
            seeds::derive(cfg.seed, seeds::Q_INIT),
        )?;
        let actor = ParamActor::new(
            obs_dim,
            space.layout().clone(),
            &cfg.actor_hidden,
            seeds::derive(cfg.seed, seeds::ACTOR_INIT),
        )?;
        let target_q = cfg.target_sync.map(|_| q.clone());
        let rng = ChaCha8Rng::seed_from_u64(seeds::derive(cfg.seed, seeds::AGENT_RNG));
        let q_grads = Gradients::zeros(q.spec());
        let actor_grads = Gradients::zeros(actor.spec());
        Ok(Self {
            buffer: ReplayBuffer::new(cfg.replay_capacity),
            space,
            q,
            actor,
            target_q,
            steps: 0,
            rng,
            pending: None,
            q_scratch: QScratch::new(),
            actor_scratch: ActorScratch::new(),
            q_grads,
            actor_grads,
            cfg,
        })
    }

    fn warmup_len(&self) -> usize {
        self.cfg.warmup.max(self.cfg.batch_size)
    }

    pub fn q(&self) -> &QNetwork {
        &self.q
    }

    pub fn q_mut(&mut self) -> &mut QNetwork {
        &mut self.q
    }

    pub fn actor(&self) -> &ParamActor {
        &self.actor
    }

    pub fn actor_mut(&mut self) -> &mut ParamActor {
        &mut self.actor
    }

    pub fn config(&self) -> &PdqnConfig {
        &self.cfg
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer.len()
    }

    pub fn target_q(&self) -> Option<&QNetwork> {
        self.target_q.as_ref()
    }

    pub fn target_q_mut(&mut self) -> Option<&mut QNetwork> {
        self.target_q.as_mut()
    }

    /// Restores the step counter after loading saved parameters. The agent
    /// RNG restarts on a stream derived from the step, so resumed runs are
    /// deterministic but not bitwise continuations of the original.
    pub fn set_steps(&mut self, steps: u64) {
        self.steps = steps;
        self.rng = ChaCha8Rng::seed_from_u64(seeds::derive(
            seeds::derive(self.cfg.seed, seeds::AGENT_RNG),
            steps,
        ));
    }
}

impl Agent for PdqnAgent {
    fn space(&self) -> &ActionSpaceSpec {
        &self.space
    }

    fn act(&mut self, obs: &[f64], mask: &[bool]) -> Result<HybridAction, AgentError> {
        let eps = self.cfg.epsilon.value(self.steps);
        let u: f64 = self.rng.random();
        let action = if u < eps {
            sample_uniform_hybrid(&self.space, mask, &mut self.rng)?
        } else {
            greedy_action(
                &self.q,
                &self.actor,
                obs,
                mask,
                &mut self.q_scratch,
                &mut self.actor_scratch,
            )?
        };
        self.pending = Some((obs.to_vec(), action.clone()));
        Ok(action)
    }

    fn record(
        &mut self,
        reward: f64,
        next_obs: &[f64],
        terminal: bool,
        next_mask: &[bool],
    ) -> Result<(), AgentError> {
        let (state, action) = self.pending.take().ok_or(AgentError::NoPendingAction)?;
        self.buffer.push(Transition {
            state,
            action,
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

        let bootstrap = self.target_q.as_ref().unwrap_or(&self.q);
        let mut targets = Vec::with_capacity(batch.len());
        for tr in &batch {
            targets.push(compute_target(
                bootstrap,
                &self.actor,
                tr.reward,
                &tr.next_state,
                tr.terminal,
                &tr.next_mask,
                self.cfg.gamma,
                &mut self.q_scratch,
                &mut self.actor_scratch,
            )?);
        }

        let samples: Vec<QSample> = batch
            .iter()
            .zip(&targets)
            .map(|(tr, &target)| QSample {
                state: &tr.state,
                head: tr.action.head,
                x_all: &tr.action.params,
                target,
            })
            .collect();
        self.q_grads.clear();
        let loss_q = q_loss_grad(
            &self.q,
            &samples,
            weight,
            &mut self.q_grads,
            &mut self.q_scratch,
        )?;
        drop(samples);

        let alpha = self.cfg.alpha.value(self.steps);
        let beta = self.cfg.beta.value(self.steps);
        let states: Vec<&[f64]> = batch.iter().map(|tr| tr.state.as_slice()).collect();

        let loss_theta;
        if self.cfg.simultaneous_updates {
            // Both gradients against the pre-update networks.
            self.actor_grads.clear();
            loss_theta = theta_loss_grad(
                &self.actor,
                &self.q,
                &states,
                weight,
                self.cfg.penalty_weight,
                None,
                &mut self.actor_grads,
                &mut self.actor_scratch,
                &mut self.q_scratch,
            )?;
            sgd_step(&mut self.q.params, &self.q_grads, alpha)?;
            sgd_step(&mut self.actor.params, &self.actor_grads, beta)?;
        } else {
            // Reference order: the Q step lands first and the actor
            // gradient is taken against the updated Q network.
            sgd_step(&mut self.q.params, &self.q_grads, alpha)?;
            self.actor_grads.clear();
            loss_theta = theta_loss_grad(
                &self.actor,
                &self.q,
                &states,
                weight,
                self.cfg.penalty_weight,
                None,
                &mut self.actor_grads,
                &mut self.actor_scratch,
                &mut self.q_scratch,
            )?;
            sgd_step(&mut self.actor.params, &self.actor_grads, beta)?;
        }

        if let (Some(interval), Some(target)) = (self.cfg.target_sync, self.target_q.as_mut()) {
            if self.steps % interval.max(1) == 0 {
                target.params = self.q.params.clone();
            }
        }

        Ok(Some(StepLosses { loss_q, loss_theta }))
    }

    fn greedy(&mut self, obs: &[f64], mask: &[bool]) -> Result<HybridAction, AgentError> {
        Ok(greedy_action(
            &self.q,
            &self.actor,
            obs,
            mask,
            &mut self.q_scratch,
            &mut self.actor_scratch,
        )?)
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
    use crate::env::{BanditEnv, Environment, MaskedBanditEnv};
    use crate::math::MlpParams;
    use crate::space::{ParamBlock, ParamLayout};

    fn bandit_cfg() -> PdqnConfig {
        let mut cfg = PdqnConfig::defaults(10_000);
        cfg.q_hidden = vec![16, 8];
        cfg.actor_hidden = vec![16];
        cfg.batch_size = 4;
        cfg.warmup = 8;
        cfg
    }

    #[test]
    fn target_is_reward_on_terminal_transitions() {
        let env = BanditEnv::new();
        let cfg = bandit_cfg();
        let agent = PdqnAgent::new(env.obs_dim(), env.space().clone(), cfg).unwrap();
        let mut qsc = QScratch::new();
        let mut asc = ActorScratch::new();
        let y = compute_target(
            agent.q(),
            agent.actor(),
            0.7,
            &[0.0],
            true,
            &[true, true],
            0.9,
            &mut qsc,
            &mut asc,
        )
        .unwrap();
        assert_eq!(y, 0.7);
    }

    #[test]
    fn target_bootstraps_only_usable_heads() {
        let env = BanditEnv::new();
        let agent = PdqnAgent::new(env.obs_dim(), env.space().clone(), bandit_cfg()).unwrap();
        let mut qsc = QScratch::new();
        let mut asc = ActorScratch::new();
        let next = [0.0];
        agent.actor().forward(&next, &mut asc).unwrap();
        agent.q().forward(&next, asc.x(), &mut qsc).unwrap();
        let (q0, q1) = (qsc.q()[0], qsc.q()[1]);
        for (mask, expect) in [
            ([true, false], q0),
            ([false, true], q1),
            ([true, true], q0.max(q1)),
        ] {
            let y = compute_target(
                agent.q(),
                agent.actor(),
                0.25,
                &next,
                false,
                &mask,
                0.5,
                &mut qsc,
                &mut asc,
            )
            .unwrap();
            assert_eq!(y, 0.25 + 0.5 * expect, "mask {mask:?}");
        }
    }

    #[test]
    fn learn_waits_for_warmup() {
        let mut env = BanditEnv::new();
        let mut agent = PdqnAgent::new(env.obs_dim(), env.space().clone(), bandit_cfg()).unwrap();
        // warmup = max(batch 4, warmup 8) = 8 transitions.
        for i in 0..12 {
            let (obs, mask) = env.reset();
            let a = agent.act(&obs, &mask).unwrap();
            let r = env.step(&a).unwrap();
            agent
                .record(r.reward, &r.observation, r.terminal, &r.mask)
                .unwrap();
            let out = agent.learn().unwrap();
            if i < 7 {
                assert!(out.is_none(), "no update before warmup (i = {i})");
            } else {
                let losses = out.expect("updates after warmup");
                assert!(losses.loss_q.is_finite());
                assert!(losses.loss_theta.is_finite());
            }
        }
    }

    #[test]
    fn same_seed_reproduces_actions_and_losses() {
        let run = || {
            let mut env = BanditEnv::new();
            let mut agent =
                PdqnAgent::new(env.obs_dim(), env.space().clone(), bandit_cfg()).unwrap();
            let mut trace = Vec::new();
            for _ in 0..60 {
                let (obs, mask) = env.reset();
                let a = agent.act(&obs, &mask).unwrap();
                let r = env.step(&a).unwrap();
                agent
                    .record(r.reward, &r.observation, r.terminal, &r.mask)
                    .unwrap();
                if let Some(l) = agent.learn().unwrap() {
                    trace.push((a.head, a.params.clone(), l.loss_q, l.loss_theta));
                }
            }
            trace
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn stored_actions_are_clamped_at_execution() {
        // Force the greedy path (epsilon = 0) with an actor whose raw
        // output sits far outside the box; the recorded transition must
        // carry the clamped parameters.
        let env = BanditEnv::new();
        let mut cfg = bandit_cfg();
        cfg.epsilon = Schedule::constant(0.0).unwrap();
        cfg.actor_hidden = vec![];
        let mut agent = PdqnAgent::new(env.obs_dim(), env.space().clone(), cfg).unwrap();
        let spec = agent.actor().spec().clone();
        agent.actor_mut().params = MlpParams::from_raw(
            &spec,
            vec![vec![0.0, 0.0]],
            vec![vec![5.0, -7.0]],
        )
        .unwrap();
        let a = agent.act(&[0.0], &[true, true]).unwrap();
        assert_eq!(a.params, vec![1.0, -1.0]);
    }

    #[test]
    fn exploration_respects_masks() {
        let mut env = MaskedBanditEnv::new();
        let mut cfg = bandit_cfg();
        cfg.epsilon = Schedule::constant(1.0).unwrap();
        let mut agent = PdqnAgent::new(env.obs_dim(), env.space().clone(), cfg).unwrap();
        for _ in 0..50 {
            let (obs, mask) = env.reset();
            let a = agent.act(&obs, &mask).unwrap();
            assert!(mask[a.head]);
            let r = env.step(&a).unwrap();
            agent
                .record(r.reward, &r.observation, r.terminal, &r.mask)
                .unwrap();
        }
    }

    #[test]
    fn record_without_act_errors() {
        let env = BanditEnv::new();
        let mut agent =
            PdqnAgent::new(env.obs_dim(), env.space().clone(), bandit_cfg()).unwrap();
        assert!(matches!(
            agent.record(0.0, &[0.0], true, &[true, true]),
            Err(AgentError::NoPendingAction)
        ));
    }

    #[test]
    fn rejects_invalid_gamma() {
        let layout = ParamLayout::new(vec![ParamBlock::free(1)]).unwrap();
        let space = ActionSpaceSpec::new(vec!["x".into()], layout).unwrap();
        let mut cfg = PdqnConfig::defaults(100);
        cfg.gamma = 1.5;
        assert!(matches!(
            PdqnAgent::new(1, space, cfg),
            Err(AgentError::InvalidConfig(_))
        ));
    }
}
