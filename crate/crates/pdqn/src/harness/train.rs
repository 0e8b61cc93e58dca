//! The training entry point: sequential replay training or the
//! asynchronous n-step trainer, with CSV logs, periodic evaluation, and
//! checkpoints in one output directory.
//!
//! Evaluation runs at step zero and every `eval_interval` steps on a
//! dedicated environment stream, so a completed run holds exactly
//! `total_steps / eval_interval + 1` eval rows. A checkpoint is written at
//! every evaluation and at the end of the run.

use super::checkpoint::{agent_tensors, read_checkpoint, restore_agent, write_checkpoint};
use super::evaluate::{evaluate_agent, evaluate_nets, EvalReport};
use super::logging::{CsvLogger, TrainRow, EVAL_HEADER, TRAIN_HEADER};
use super::{HarnessError, RunConfig};
use crate::agent::{seeds, Agent, AnyAgent};
use crate::distributed::run_async;
use crate::env::make_env;
use std::path::Path;
use std::time::{Duration, Instant};

#[derive(Clone, Copy, Debug)]
pub struct TrainSummary {
    pub steps: u64,
    pub final_eval: EvalReport,
    pub wall: Duration,
}

pub fn run_training(
    cfg: &RunConfig,
    out_dir: &Path,
    resume: bool,
) -> Result<TrainSummary, HarnessError> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    if cfg.workers > 0 {
        if resume {
            return Err(HarnessError::InvalidConfig(
                "the asynchronous trainer does not support --resume".into(),
            ));
        }
        train_async(cfg, out_dir)
    } else {
        train_sequential(cfg, out_dir, resume)
    }
}

fn eval_now(cfg: &RunConfig, agent: &mut AnyAgent, step: u64) -> Result<EvalReport, HarnessError> {
    let mut env = cfg.build_eval_env()?;
    let report = evaluate_agent(agent, env.as_mut(), cfg.eval_trials, step)?;
    log::info!(
        "eval step {} mean_reward {:.4} goal_rate {:.3} mean_len {:.1}",
        report.step,
        report.mean_reward,
        report.goal_rate,
        report.mean_len
    );
    Ok(report)
}

fn train_sequential(
    cfg: &RunConfig,
    out_dir: &Path,
    resume: bool,
) -> Result<TrainSummary, HarnessError> {
    let start = Instant::now();
    let ckpt_path = out_dir.join("checkpoint.bin");
    let mut agent = cfg.build_agent()?;
    let space = agent.space().clone();
    let mut start_step = 0;
    if resume {
        let tensors = read_checkpoint(&ckpt_path, Some(&space))?;
        start_step = restore_agent(&mut agent, &tensors)?;
        log::info!("resumed from {} at step {start_step}", ckpt_path.display());
        if start_step >= cfg.total_steps {
            return Err(HarnessError::InvalidConfig(format!(
                "checkpoint is already at step {start_step} of {}",
                cfg.total_steps
            )));
        }
    }
    let mut train_log = CsvLogger::open(&out_dir.join("train.csv"), TRAIN_HEADER, resume)?;
    let mut eval_log = CsvLogger::open(&out_dir.join("eval.csv"), EVAL_HEADER, resume)?;

    let mut env = cfg.build_env()?;
    let (mut obs, mut mask) = env.reset();
    let mut episode: u64 = 0;
    let mut ep_len: u32 = 0;
    let mut ep_reward: f64 = 0.0;
    let mut last_eval: Option<EvalReport> = None;

    if !resume {
        let report = eval_now(cfg, &mut agent, 0)?;
        eval_log.eval_row(&report)?;
        write_checkpoint(&ckpt_path, &space, &agent_tensors(&agent))?;
        last_eval = Some(report);
    }

    for step in start_step + 1..=cfg.total_steps {
        let epsilon = agent.epsilon();
        let action = agent.act(&obs, &mask)?;
        let result = env.step(&action)?;
        agent.record(result.reward, &result.observation, result.terminal, &result.mask)?;
        let losses = agent.learn()?;
        ep_len += 1;
        ep_reward += result.reward;
        train_log.train_row(&TrainRow {
            step,
            episode,
            ep_len,
            ep_reward,
            loss_q: losses.map_or(f64::NAN, |l| l.loss_q),
            loss_theta: losses.map_or(f64::NAN, |l| l.loss_theta),
            epsilon,
            lr_omega: agent.lr_omega(),
            lr_theta: agent.lr_theta(),
        })?;
        if result.terminal {
            let (o, m) = env.reset();
            obs = o;
            mask = m;
            episode += 1;
            ep_len = 0;
            ep_reward = 0.0;
        } else {
            obs = result.observation;
            mask = result.mask;
        }
        if step % cfg.eval_interval == 0 {
            let report = eval_now(cfg, &mut agent, step)?;
            eval_log.eval_row(&report)?;
            write_checkpoint(&ckpt_path, &space, &agent_tensors(&agent))?;
            last_eval = Some(report);
        }
    }
    train_log.flush()?;
    eval_log.flush()?;
    write_checkpoint(&ckpt_path, &space, &agent_tensors(&agent))?;

    let final_eval = match last_eval {
        Some(report) if report.step == cfg.total_steps => report,
        _ => eval_now(cfg, &mut agent, cfg.total_steps)?,
    };
    Ok(TrainSummary {
        steps: cfg.total_steps,
        final_eval,
        wall: start.elapsed(),
    })
}

fn train_async(cfg: &RunConfig, out_dir: &Path) -> Result<TrainSummary, HarnessError> {
    let start = Instant::now();
    let ckpt_path = out_dir.join("checkpoint.bin");
    // The initial networks come from a regular agent so parameter
    // initialization matches the sequential trainer seed for seed.
    let mut agent = cfg.build_agent()?;
    let space = agent.space().clone();
    let (q0, actor0) = match &agent {
        AnyAgent::Pdqn(a) => (a.q().clone(), a.actor().clone()),
        _ => unreachable!("validate() restricts the async trainer to pdqn"),
    };
    // Fail now if the environment cannot be built, rather than inside a
    // worker thread.
    drop(make_env(
        &cfg.env,
        seeds::derive(cfg.seed, seeds::WORKER_ENV),
        cfg.integrator,
    )?);

    let mut train_log = CsvLogger::open(&out_dir.join("train.csv"), TRAIN_HEADER, false)?;
    let mut eval_log = CsvLogger::open(&out_dir.join("eval.csv"), EVAL_HEADER, false)?;
    {
        let mut env = cfg.build_eval_env()?;
        let report = evaluate_nets(&q0, &actor0, env.as_mut(), cfg.eval_trials, 0)?;
        eval_log.eval_row(&report)?;
    }

    let async_cfg = cfg.async_config()?;
    let env_name = cfg.env.clone();
    let integrator = cfg.integrator;
    let seed = cfg.seed;
    let outcome = run_async(&async_cfg, q0, actor0, move |id| {
        make_env(
            &env_name,
            seeds::derive(seed, seeds::WORKER_ENV + id as u64),
            integrator,
        )
        .expect("environment construction was checked before the run")
    })?;

    for row in &outcome.logs {
        train_log.train_row(&TrainRow {
            step: row.global_step,
            episode: row.episode,
            ep_len: row.ep_len,
            ep_reward: row.ep_reward,
            loss_q: row.loss_q,
            loss_theta: row.loss_theta,
            epsilon: row.epsilon,
            lr_omega: row.lr_omega,
            lr_theta: row.lr_theta,
        })?;
    }
    let mut final_eval = None;
    {
        let mut q = outcome.q.clone();
        let mut actor = outcome.actor.clone();
        for mark in &outcome.eval_marks {
            q.params = mark.q_params.clone();
            actor.params = mark.actor_params.clone();
            let mut env = cfg.build_eval_env()?;
            let report = evaluate_nets(&q, &actor, env.as_mut(), cfg.eval_trials, mark.step)?;
            log::info!(
                "eval step {} mean_reward {:.4} goal_rate {:.3} mean_len {:.1}",
                report.step,
                report.mean_reward,
                report.goal_rate,
                report.mean_len
            );
            eval_log.eval_row(&report)?;
            if mark.step == cfg.total_steps {
                final_eval = Some(report);
            }
        }
    }
    train_log.flush()?;
    eval_log.flush()?;

    // Checkpoint the final parameters through a regular agent so the eval
    // command can load them like any other run.
    if let AnyAgent::Pdqn(a) = &mut agent {
        a.q_mut().params = outcome.q.params.clone();
        a.actor_mut().params = outcome.actor.params.clone();
        a.set_steps(outcome.n_steps);
    }
    write_checkpoint(&ckpt_path, &space, &agent_tensors(&agent))?;

    let final_eval = match final_eval {
        Some(report) => report,
        None => {
            let mut env = cfg.build_eval_env()?;
            evaluate_nets(
                &outcome.q,
                &outcome.actor,
                env.as_mut(),
                cfg.eval_trials,
                outcome.n_steps,
            )?
        }
    };
    Ok(TrainSummary {
        steps: outcome.n_steps,
        final_eval,
        wall: start.elapsed(),
    })
}
