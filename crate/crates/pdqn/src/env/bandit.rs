//! One-step diagnostic bandits over a two-head hybrid space.
//!
//! Head `k` pays `c_k - (x_k - b_k)^2` and the episode ends immediately,
//! so the optimal policy and Q values are known in closed form: play head 0
//! at `x_0 = 0.3` for a reward of exactly `c_0 = 1`. The masked variant
//! alternates which head is usable by episode parity and rejects masked
//! actions outright.

use super::{EnvError, Environment, StepResult};
use crate::space::{ActionSpaceSpec, HybridAction, ParamBlock, ParamLayout};

/// Peak payoff per head.
pub const PAYOFFS: [f64; 2] = [1.0, 0.5];
/// Optimal parameter per head.
pub const OPTIMA: [f64; 2] = [0.3, -0.2];

fn bandit_space() -> ActionSpaceSpec {
    let layout = ParamLayout::new(vec![
        ParamBlock::bounded(vec![-1.0], vec![1.0]),
        ParamBlock::bounded(vec![-1.0], vec![1.0]),
    ])
    .expect("static layout is valid");
    ActionSpaceSpec::new(vec!["arm0".into(), "arm1".into()], layout)
        .expect("static space is valid")
}

fn bandit_observe() -> Vec<f64> {
    vec![0.0]
}

fn check_action(space: &ActionSpaceSpec, action: &HybridAction) -> Result<f64, EnvError> {
    if action.head >= space.num_heads() {
        return Err(EnvError::InvalidAction(format!(
            "head {} out of range",
            action.head
        )));
    }
    if action.params.len() != space.total_param_dim() {
        return Err(EnvError::InvalidAction(format!(
            "parameter vector has length {}, expected {}",
            action.params.len(),
            space.total_param_dim()
        )));
    }
    let x = action.own_block(space.layout())[0];
    if !(-1.0..=1.0).contains(&x) {
        return Err(EnvError::InvalidAction(format!(
            "parameter {x} outside [-1, 1]; executed actions must be clamped"
        )));
    }
    Ok(x)
}

fn bandit_reward(head: usize, x: f64) -> f64 {
    let d = x - OPTIMA[head];
    PAYOFFS[head] - d * d
}

/// Unmasked two-arm bandit; every episode is a single step.
pub struct BanditEnv {
    space: ActionSpaceSpec,
    alive: bool,
}

impl BanditEnv {
    #[allow(clippy::new_without_default)]
    pub fn new() -> Self {
        Self {
            space: bandit_space(),
            alive: false,
        }
    }
}

impl Environment for BanditEnv {
    fn name(&self) -> &'static str {
        "bandit"
    }

    fn space(&self) -> &ActionSpaceSpec {
        &self.space
    }

    fn obs_dim(&self) -> usize {
        1
    }

    fn reset(&mut self) -> (Vec<f64>, Vec<bool>) {
        self.alive = true;
        (bandit_observe(), vec![true, true])
    }

    fn step(&mut self, action: &HybridAction) -> Result<StepResult, EnvError> {
        if !self.alive {
            return Err(EnvError::EpisodeFinished);
        }
        let x = check_action(&self.space, action)?;
        self.alive = false;
        Ok(StepResult {
            observation: bandit_observe(),
            reward: bandit_reward(action.head, x),
            terminal: true,
            goal: false,
            mask: vec![true, true],
        })
    }
}

/// Bandit variant where even episodes allow only head 0 and odd episodes
/// only head 1. The step result carries the mask of the *next* episode.
pub struct MaskedBanditEnv {
    space: ActionSpaceSpec,
    episode: u64,
    resets: u64,
    alive: bool,
}

impl MaskedBanditEnv {
    #[allow(clippy::new_without_default)]
    pub fn new() -> Self {
        Self {
            space: bandit_space(),
            episode: 0,
            resets: 0,
            alive: false,
        }
    }

    fn mask_for(episode: u64) -> Vec<bool> {
        let usable = (episode % 2) as usize;
        let mut mask = vec![false, false];
        mask[usable] = true;
        mask
    }
}

impl Environment for MaskedBanditEnv {
    fn name(&self) -> &'static str {
        "masked-bandit"
    }

    fn space(&self) -> &ActionSpaceSpec {
        &self.space
    }

    fn obs_dim(&self) -> usize {
        1
    }

    fn reset(&mut self) -> (Vec<f64>, Vec<bool>) {
        self.episode = self.resets;
        self.resets += 1;
        self.alive = true;
        (bandit_observe(), Self::mask_for(self.episode))
    }

    fn step(&mut self, action: &HybridAction) -> Result<StepResult, EnvError> {
        if !self.alive {
            return Err(EnvError::EpisodeFinished);
        }
        let x = check_action(&self.space, action)?;
        if !Self::mask_for(self.episode)[action.head] {
            return Err(EnvError::MaskedHead { head: action.head });
        }
        self.alive = false;
        Ok(StepResult {
            observation: bandit_observe(),
            reward: bandit_reward(action.head, x),
            terminal: true,
            goal: false,
            mask: Self::mask_for(self.episode + 1),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rewards_match_closed_form() {
        let mut env = BanditEnv::new();
        env.reset();
        let r = env
            .step(&HybridAction::new(0, vec![0.3, 0.0]))
            .unwrap();
        assert_eq!(r.reward, 1.0);
        assert!(r.terminal);
        env.reset();
        let r = env.step(&HybridAction::new(0, vec![0.0, 0.0])).unwrap();
        assert!((r.reward - 0.91).abs() < 1e-15);
        env.reset();
        let r = env.step(&HybridAction::new(1, vec![0.0, -0.2])).unwrap();
        assert_eq!(r.reward, 0.5);
    }

    #[test]
    fn episodes_are_single_step() {
        let mut env = BanditEnv::new();
        env.reset();
        env.step(&HybridAction::new(0, vec![0.0, 0.0])).unwrap();
        assert!(matches!(
            env.step(&HybridAction::new(0, vec![0.0, 0.0])),
            Err(EnvError::EpisodeFinished)
        ));
    }

    #[test]
    fn out_of_range_parameters_are_rejected() {
        let mut env = BanditEnv::new();
        env.reset();
        assert!(matches!(
            env.step(&HybridAction::new(0, vec![1.5, 0.0])),
            Err(EnvError::InvalidAction(_))
        ));
    }

    #[test]
    fn mask_alternates_by_episode_parity() {
        let mut env = MaskedBanditEnv::new();
        for episode in 0..6u64 {
            let (_, mask) = env.reset();
            let usable = (episode % 2) as usize;
            assert_eq!(mask[usable], true);
            assert_eq!(mask[1 - usable], false);
            let r = env
                .step(&HybridAction::new(usable, vec![0.0, 0.0]))
                .unwrap();
            assert_eq!(r.mask, MaskedBanditEnv::mask_for(episode + 1));
        }
    }

    #[test]
    fn masked_head_is_rejected() {
        let mut env = MaskedBanditEnv::new();
        let (_, mask) = env.reset();
        assert_eq!(mask, vec![true, false]);
        assert!(matches!(
            env.step(&HybridAction::new(1, vec![0.0, 0.0])),
            Err(EnvError::MaskedHead { head: 1 })
        ));
        // The episode is still live: the usable head works.
        env.step(&HybridAction::new(0, vec![0.0, 0.0])).unwrap();
    }
}
