//! Asynchronous n-step P-DQN: workers roll out short segments against
//! parameter snapshots, accumulate raw gradient sums over the segment, and
//! apply them through a shared parameter server.
//!
//! Unlike the replay agent, both gradients of a segment are computed
//! against the *same* snapshot pair; staleness is part of the algorithm.
//! The server counts every environment step exactly once in a global
//! counter `N`, and stepsizes are indexed by `N` at apply time.

use crate::agent::{sample_uniform_hybrid, seeds, AgentError};
use crate::env::{Environment, EnvError};
use crate::math::{sgd_step, Gradients, MathError, MlpParams, RmsProp, Schedule};
use crate::net::{
    greedy_action, q_loss_grad, theta_loss_grad, ActorScratch, NetError, ParamActor, QNetwork,
    QSample, QScratch,
};
use crate::space::HybridAction;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DistError {
    #[error(transparent)]
    Math(#[from] MathError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("worker {worker} failed: {message}")]
    WorkerFailed { worker: usize, message: String },
    #[error("invalid async configuration: {0}")]
    InvalidConfig(String),
}

/// Optimizer applied by the parameter server. RMSProp keeps one shared
/// second-moment vector per network, updated under the server lock.
#[derive(Clone, Copy, Debug)]
pub enum AsyncOptimizer {
    Sgd,
    RmsProp { rho: f64, eps: f64 },
}

#[derive(Clone, Debug)]
pub struct AsyncConfig {
    /// Number of rollout workers (threads).
    pub workers: usize,
    /// Maximum segment length between synchronizations.
    pub t_max: usize,
    /// Global environment-step budget; workers stop at the first
    /// synchronization at or past this count.
    pub total_steps: u64,
    pub gamma: f64,
    /// Q-network stepsize, indexed by the global step at apply time.
    pub alpha: Schedule,
    /// Actor stepsize.
    pub beta: Schedule,
    pub epsilon: Schedule,
    pub penalty_weight: f64,
    pub optimizer: AsyncOptimizer,
    /// When set, the server records parameter snapshots each time the
    /// global counter crosses a multiple of this interval (capped at
    /// `total_steps`), for offline evaluation.
    pub eval_interval: Option<u64>,
    pub seed: u64,
}

impl AsyncConfig {
    fn validate(&self) -> Result<(), DistError> {
        if self.workers == 0 {
            return Err(DistError::InvalidConfig("need at least one worker".into()));
        }
        if self.t_max == 0 {
            return Err(DistError::InvalidConfig("t_max must be positive".into()));
        }
        if !(self.gamma >= 0.0 && self.gamma <= 1.0) {
            return Err(DistError::InvalidConfig(format!(
                "gamma must lie in [0, 1], got {}",
                self.gamma
            )));
        }
        if let Some(iv) = self.eval_interval {
            if iv == 0 {
                return Err(DistError::InvalidConfig(
                    "eval interval must be positive".into(),
                ));
            }
        }
        Ok(())
    }
}

/// One step of a rollout segment.
#[derive(Clone, Debug)]
pub struct SegmentStep {
    pub state: Vec<f64>,
    pub action: HybridAction,
    pub reward: f64,
}

/// Backward-recursive n-step returns: `y_i = r_i + gamma * y_{i+1}` with
/// `y_n = bootstrap`. `out[i]` is the target for step `i`.
pub fn nstep_targets(rewards: &[f64], bootstrap: f64, gamma: f64, out: &mut Vec<f64>) {
    out.clear();
    out.resize(rewards.len(), 0.0);
    let mut y = bootstrap;
    for i in (0..rewards.len()).rev() {
        y = rewards[i] + gamma * y;
        out[i] = y;
    }
}

/// Bootstrap value for a segment's final state: zero when terminal, else
/// the best usable-head Q value at the actor's proposal, both evaluated on
/// the snapshot networks.
pub fn segment_bootstrap(
    q: &QNetwork,
    actor: &ParamActor,
    final_state: &[f64],
    terminal: bool,
    final_mask: &[bool],
    q_scratch: &mut QScratch,
    actor_scratch: &mut ActorScratch,
) -> Result<f64, NetError> {
    if terminal {
        return Ok(0.0);
    }
    actor.forward(final_state, actor_scratch)?;
    q.forward(final_state, actor_scratch.x(), q_scratch)?;
    let best = final_mask
        .iter()
        .enumerate()
        .filter(|(_, &usable)| usable)
        .map(|(k, _)| q_scratch.q()[k])
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(
        best > f64::NEG_INFINITY,
        "non-terminal segment end with an all-masked state"
    );
    Ok(best)
}

/// Accumulates a segment's raw gradient sums against the snapshot pair
/// `(q, actor)`. Both `d_q` and `d_actor` are cleared first. Returns the
/// summed losses and the per-step targets.
#[allow(clippy::too_many_arguments)]
pub fn segment_grads(
    q: &QNetwork,
    actor: &ParamActor,
    steps: &[SegmentStep],
    final_state: &[f64],
    terminal: bool,
    final_mask: &[bool],
    gamma: f64,
    penalty_weight: f64,
    d_q: &mut Gradients,
    d_actor: &mut Gradients,
    q_scratch: &mut QScratch,
    actor_scratch: &mut ActorScratch,
) -> Result<(f64, f64, Vec<f64>), DistError> {
    let bootstrap = segment_bootstrap(
        q,
        actor,
        final_state,
        terminal,
        final_mask,
        q_scratch,
        actor_scratch,
    )?;
    let mut targets = Vec::new();
    let rewards: Vec<f64> = steps.iter().map(|s| s.reward).collect();
    nstep_targets(&rewards, bootstrap, gamma, &mut targets);

    d_q.clear();
    let samples: Vec<QSample> = steps
        .iter()
        .zip(&targets)
        .map(|(s, &target)| QSample {
            state: &s.state,
            head: s.action.head,
            x_all: &s.action.params,
            target,
        })
        .collect();
    let loss_q = q_loss_grad(q, &samples, 1.0, d_q, q_scratch)?;
    drop(samples);

    d_actor.clear();
    let states: Vec<&[f64]> = steps.iter().map(|s| s.state.as_slice()).collect();
    let loss_theta = theta_loss_grad(
        actor,
        q,
        &states,
        1.0,
        penalty_weight,
        None,
        d_actor,
        actor_scratch,
        q_scratch,
    )?;
    Ok((loss_q, loss_theta, targets))
}

/// Parameters recorded when the global counter crossed an eval interval.
#[derive(Clone, Debug)]
pub struct EvalMark {
    pub step: u64,
    pub q_params: MlpParams,
    pub actor_params: MlpParams,
}

enum ServerOptimizer {
    Sgd,
    RmsProp { q: RmsProp, actor: RmsProp },
}

struct ServerState {
    q: QNetwork,
    actor: ParamActor,
    optimizer: ServerOptimizer,
    n_step: u64,
    version: u64,
    eval_marks: Vec<EvalMark>,
}

/// Shared parameter server: consistent snapshots and atomic gradient
/// application with a single global step counter.
pub struct ParameterServer {
    state: Mutex<ServerState>,
    eval_interval: Option<u64>,
    eval_cap: u64,
}

impl ParameterServer {
    pub fn new(
        q: QNetwork,
        actor: ParamActor,
        optimizer: AsyncOptimizer,
        eval_interval: Option<u64>,
        eval_cap: u64,
    ) -> Result<Self, DistError> {
        let optimizer = match optimizer {
            AsyncOptimizer::Sgd => ServerOptimizer::Sgd,
            AsyncOptimizer::RmsProp { rho, eps } => ServerOptimizer::RmsProp {
                q: RmsProp::new(q.spec(), rho, eps)?,
                actor: RmsProp::new(actor.spec(), rho, eps)?,
            },
        };
        Ok(Self {
            state: Mutex::new(ServerState {
                q,
                actor,
                optimizer,
                n_step: 0,
                version: 0,
                eval_marks: Vec::new(),
            }),
            eval_interval,
            eval_cap,
        })
    }

    /// A consistent `(q, actor, global step)` snapshot; parameters are
    /// never torn across versions.
    pub fn snapshot(&self) -> (QNetwork, ParamActor, u64) {
        let state = self.state.lock().expect("server lock");
        (state.q.clone(), state.actor.clone(), state.n_step)
    }

    pub fn n_step(&self) -> u64 {
        self.state.lock().expect("server lock").n_step
    }

    pub fn version(&self) -> u64 {
        self.state.lock().expect("server lock").version
    }

    /// Counts `steps` new environment steps, applies the gradient pair at
    /// the post-count stepsizes, and records eval marks for every interval
    /// multiple crossed. Returns the new global step count.
    pub fn apply(
        &self,
        d_q: &Gradients,
        d_actor: &Gradients,
        steps: u64,
        alpha: &Schedule,
        beta: &Schedule,
    ) -> Result<u64, DistError> {
        let mut state = self.state.lock().expect("server lock");
        let before = state.n_step;
        state.n_step = before + steps;
        let n = state.n_step;
        let lr_q = alpha.value(n);
        let lr_actor = beta.value(n);
        let state = &mut *state;
        match &mut state.optimizer {
            ServerOptimizer::Sgd => {
                sgd_step(&mut state.q.params, d_q, lr_q)?;
                sgd_step(&mut state.actor.params, d_actor, lr_actor)?;
            }
            ServerOptimizer::RmsProp { q, actor } => {
                q.step(&mut state.q.params, d_q, lr_q)?;
                actor.step(&mut state.actor.params, d_actor, lr_actor)?;
            }
        }
        state.version += 1;
        if let Some(interval) = self.eval_interval {
            let mut mark = (before / interval + 1) * interval;
            while mark <= n && mark <= self.eval_cap {
                state.eval_marks.push(EvalMark {
                    step: mark,
                    q_params: state.q.params.clone(),
                    actor_params: state.actor.params.clone(),
                });
                mark += interval;
            }
        }
        Ok(n)
    }

    fn into_outcome(self, logs: Vec<WorkerLogRow>) -> AsyncOutcome {
        let state = self.state.into_inner().expect("server lock");
        AsyncOutcome {
            q: state.q,
            actor: state.actor,
            n_steps: state.n_step,
            eval_marks: state.eval_marks,
            logs,
        }
    }
}

/// One environment step as logged by a worker. Global steps are assigned
/// in contiguous blocks when the segment is applied, so rows merge into a
/// single totally-ordered log.
#[derive(Clone, Debug)]
pub struct WorkerLogRow {
    pub global_step: u64,
    pub worker: usize,
    pub episode: u64,
    pub ep_len: u32,
    pub ep_reward: f64,
    pub reward: f64,
    /// Segment losses (sums), repeated on every row of the segment.
    pub loss_q: f64,
    pub loss_theta: f64,
    pub epsilon: f64,
    pub lr_omega: f64,
    pub lr_theta: f64,
}

pub struct AsyncOutcome {
    pub q: QNetwork,
    pub actor: ParamActor,
    pub n_steps: u64,
    /// Per-step rows from all workers, sorted by global step.
    pub logs: Vec<WorkerLogRow>,
    pub eval_marks: Vec<EvalMark>,
}

struct WorkerCtx<'a> {
    id: usize,
    cfg: &'a AsyncConfig,
    server: &'a ParameterServer,
    stop: &'a AtomicBool,
}

fn worker_loop(
    ctx: WorkerCtx,
    mut env: Box<dyn Environment>,
) -> Result<Vec<WorkerLogRow>, DistError> {
    let space = env.space().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(
        ctx.cfg.seed,
        seeds::WORKER_RNG + ctx.id as u64,
    ));
    let mut q_scratch = QScratch::new();
    let mut actor_scratch = ActorScratch::new();
    let mut d_q: Option<Gradients> = None;
    let mut d_actor: Option<Gradients> = None;
    let mut logs = Vec::new();
    let mut segment: Vec<SegmentStep> = Vec::with_capacity(ctx.cfg.t_max);

    let (mut obs, mut mask) = env.reset();
    let mut episode: u64 = 0;
    let mut ep_len: u32 = 0;
    let mut ep_reward: f64 = 0.0;

    loop {
        if ctx.stop.load(Ordering::Relaxed) {
            break;
        }
        let (q_snap, actor_snap, n_now) = ctx.server.snapshot();
        if n_now >= ctx.cfg.total_steps {
            break;
        }
        let eps = ctx.cfg.epsilon.value(n_now);
        let d_q = d_q.get_or_insert_with(|| Gradients::zeros(q_snap.spec()));
        let d_actor = d_actor.get_or_insert_with(|| Gradients::zeros(actor_snap.spec()));

        segment.clear();
        let mut terminal = false;
        let seg_first_len = ep_len;
        let seg_first_reward = ep_reward;
        let seg_episode = episode;
        for _ in 0..ctx.cfg.t_max {
            let u: f64 = rng.random();
            let action = if u < eps {
                sample_uniform_hybrid(&space, &mask, &mut rng)?
            } else {
                greedy_action(
                    &q_snap,
                    &actor_snap,
                    &obs,
                    &mask,
                    &mut q_scratch,
                    &mut actor_scratch,
                )?
            };
            let result = env.step(&action)?;
            segment.push(SegmentStep {
                state: std::mem::take(&mut obs),
                action,
                reward: result.reward,
            });
            ep_len += 1;
            ep_reward += result.reward;
            obs = result.observation;
            mask = result.mask;
            if result.terminal {
                terminal = true;
                break;
            }
        }

        let (loss_q, loss_theta, _targets) = segment_grads(
            &q_snap,
            &actor_snap,
            &segment,
            &obs,
            terminal,
            &mask,
            ctx.cfg.gamma,
            ctx.cfg.penalty_weight,
            d_q,
            d_actor,
            &mut q_scratch,
            &mut actor_scratch,
        )?;
        let n_after = ctx.server.apply(
            d_q,
            d_actor,
            segment.len() as u64,
            &ctx.cfg.alpha,
            &ctx.cfg.beta,
        )?;
        let lr_omega = ctx.cfg.alpha.value(n_after);
        let lr_theta = ctx.cfg.beta.value(n_after);

        let base = n_after - segment.len() as u64;
        let mut row_len = seg_first_len;
        let mut row_reward = seg_first_reward;
        for (i, step) in segment.iter().enumerate() {
            row_len += 1;
            row_reward += step.reward;
            logs.push(WorkerLogRow {
                global_step: base + i as u64 + 1,
                worker: ctx.id,
                episode: seg_episode,
                ep_len: row_len,
                ep_reward: row_reward,
                reward: step.reward,
                loss_q,
                loss_theta,
                epsilon: eps,
                lr_omega,
                lr_theta,
            });
        }

        if terminal {
            let (o, m) = env.reset();
            obs = o;
            mask = m;
            episode += 1;
            ep_len = 0;
            ep_reward = 0.0;
        }
    }
    Ok(logs)
}

/// Runs asynchronous training from the given initial networks. The
/// environment factory is invoked once per worker inside its thread;
/// worker `i` uses the seed streams `WORKER_RNG + i` and (by convention of
/// the factory) `WORKER_ENV + i`. Any worker error or panic aborts the
/// whole run.
pub fn run_async<F>(
    cfg: &AsyncConfig,
    q0: QNetwork,
    actor0: ParamActor,
    env_factory: F,
) -> Result<AsyncOutcome, DistError>
where
    F: Fn(usize) -> Box<dyn Environment> + Sync,
{
    cfg.validate()?;
    let server = ParameterServer::new(
        q0,
        actor0,
        cfg.optimizer,
        cfg.eval_interval,
        cfg.total_steps,
    )?;
    let stop = AtomicBool::new(false);
    let results: Vec<Result<Vec<WorkerLogRow>, DistError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..cfg.workers)
            .map(|id| {
                let server = &server;
                let stop = &stop;
                let env_factory = &env_factory;
                scope.spawn(move || {
                    let ctx = WorkerCtx {
                        id,
                        cfg,
                        server,
                        stop,
                    };
                    let out = worker_loop(ctx, env_factory(id));
                    if out.is_err() {
                        stop.store(true, Ordering::Relaxed);
                    }
                    out
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked; aborting run"))
            .collect()
    });

    let mut logs = Vec::new();
    for (worker, result) in results.into_iter().enumerate() {
        match result {
            Ok(rows) => logs.extend(rows),
            Err(e) => {
                return Err(DistError::WorkerFailed {
                    worker,
                    message: e.to_string(),
                })
            }
        }
    }
    logs.sort_by_key(|row| row.global_step);
    Ok(server.into_outcome(logs))
}
