//! Greedy-policy evaluation.

use super::HarnessError;
use crate::agent::{Agent, AnyAgent};
use crate::env::Environment;
use crate::net::{greedy_action, ActorScratch, ParamActor, QNetwork, QScratch};
use crate::space::HybridAction;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalReport {
    pub step: u64,
    pub trials: usize,
    pub mean_reward: f64,
    /// Fraction of episodes that ended in the goal condition; always zero
    /// for environments without one.
    pub goal_rate: f64,
    pub mean_len: f64,
}

/// Runs `trials` episodes under `policy` with no learning or exploration.
pub fn evaluate_policy<P>(
    env: &mut dyn Environment,
    trials: usize,
    mut policy: P,
) -> Result<EvalReport, HarnessError>
where
    P: FnMut(&[f64], &[bool]) -> Result<HybridAction, HarnessError>,
{
    assert!(trials > 0, "evaluation needs at least one trial");
    let mut total_reward = 0.0;
    let mut goals = 0usize;
    let mut total_len = 0u64;
    for _ in 0..trials {
        let (mut obs, mut mask) = env.reset();
        loop {
            let action = policy(&obs, &mask)?;
            let result = env.step(&action)?;
            total_reward += result.reward;
            total_len += 1;
            if result.terminal {
                goals += result.goal as usize;
                break;
            }
            obs = result.observation;
            mask = result.mask;
        }
    }
    Ok(EvalReport {
        step: 0,
        trials,
        mean_reward: total_reward / trials as f64,
        goal_rate: goals as f64 / trials as f64,
        mean_len: total_len as f64 / trials as f64,
    })
}

pub fn evaluate_agent(
    agent: &mut AnyAgent,
    env: &mut dyn Environment,
    trials: usize,
    step: u64,
) -> Result<EvalReport, HarnessError> {
    let mut report = evaluate_policy(env, trials, |obs, mask| Ok(agent.greedy(obs, mask)?))?;
    report.step = step;
    Ok(report)
}

/// Evaluates raw P-DQN networks, used for the asynchronous trainer's
/// interval snapshots.
pub fn evaluate_nets(
    q: &QNetwork,
    actor: &ParamActor,
    env: &mut dyn Environment,
    trials: usize,
    step: u64,
) -> Result<EvalReport, HarnessError> {
    let mut q_scratch = QScratch::new();
    let mut actor_scratch = ActorScratch::new();
    let mut report = evaluate_policy(env, trials, |obs, mask| {
        Ok(greedy_action(
            q,
            actor,
            obs,
            mask,
            &mut q_scratch,
            &mut actor_scratch,
        )?)
    })?;
    report.step = step;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{BanditEnv, GoalEnv, Integrator};

    #[test]
    fn scripted_bandit_policy_scores_its_known_reward() {
        let mut env = BanditEnv::new();
        // Head 0 at its optimum pays exactly 1.0 every episode.
        let report = evaluate_policy(&mut env, 25, |_, _| {
            Ok(HybridAction {
                head: 0,
                params: vec![0.3, 0.0],
            })
        })
        .unwrap();
        assert_eq!(report.trials, 25);
        assert!((report.mean_reward - 1.0).abs() < 1e-12);
        assert_eq!(report.mean_len, 1.0);
        assert_eq!(report.goal_rate, 0.0, "bandit has no goal condition");
    }

    #[test]
    fn braking_forever_times_out_every_goal_episode() {
        let mut env = GoalEnv::new(11, Integrator::Exact);
        let report = evaluate_policy(&mut env, 3, |_, _| {
            Ok(HybridAction {
                head: 0,
                params: vec![],
            })
        })
        .unwrap();
        assert_eq!(report.mean_len, 200.0);
        assert_eq!(report.goal_rate, 0.0);
        // The point never moves, so per-episode reward telescopes to zero.
        assert!(report.mean_reward.abs() < 1e-9);
    }

    #[test]
    fn agent_and_net_evaluation_agree_for_pdqn() {
        let cfg = crate::harness::RunConfig {
            env: "goal".into(),
            q_hidden: vec![8],
            actor_hidden: vec![8],
            eval_trials: 5,
            ..Default::default()
        };
        let mut agent = cfg.build_agent().unwrap();
        let (q, actor) = match &agent {
            AnyAgent::Pdqn(a) => (a.q().clone(), a.actor().clone()),
            _ => unreachable!(),
        };
        let mut env1 = cfg.build_eval_env().unwrap();
        let mut env2 = cfg.build_eval_env().unwrap();
        let via_agent = evaluate_agent(&mut agent, env1.as_mut(), 5, 7).unwrap();
        let via_nets = evaluate_nets(&q, &actor, env2.as_mut(), 5, 7).unwrap();
        assert_eq!(via_agent, via_nets);
    }
}
