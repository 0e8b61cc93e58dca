//! Point-mass goal environment on the square plate `[-1, 1]^2`.
//!
//! The agent either *pulls* (unit force in a chosen direction for one time
//! step) or *brakes* (cuts current speed by a fixed decrement, position
//! unchanged). An episode succeeds when the mass rests inside the goal
//! circle: distance below the goal radius with speed at numerical zero.
//! Leaving the plate or exceeding the step budget ends the episode without
//! the success bonus. The per-step reward is the decrease in distance to
//! the target, plus one on success.

use super::{EnvError, Environment, StepResult};
use crate::space::{ActionSpaceSpec, HybridAction, ParamBlock, ParamLayout};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const PLATE_HALF_WIDTH: f64 = 1.0;
pub const GOAL_RADIUS: f64 = 0.1;
pub const TIME_STEP: f64 = 0.1;
pub const BRAKE_DECREMENT: f64 = 0.1;
pub const MAX_EPISODE_STEPS: u32 = 200;
/// Speeds at or below this count as standing still for the goal test.
pub const STOP_SPEED: f64 = 1e-9;
/// Targets are drawn from this sub-square so the goal circle never leaves
/// the plate.
pub const TARGET_HALF_WIDTH: f64 = 0.9;

pub const HEAD_BRAKE: usize = 0;
pub const HEAD_PULL: usize = 1;

/// Kinematic update used for the pull action.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Integrator {
    /// Exact constant-force integration over one time step:
    /// `p' = p + v dt + F dt^2 / 2`, `v' = v + F dt`.
    Exact,
    /// First-order Euler: `p' = p + v dt`, then `v' = v + F dt`.
    Euler,
}

pub struct GoalEnv {
    space: ActionSpaceSpec,
    rng: ChaCha8Rng,
    integrator: Integrator,
    pos: [f64; 2],
    vel: [f64; 2],
    target: [f64; 2],
    steps: u32,
    alive: bool,
}

fn goal_space() -> ActionSpaceSpec {
    let layout = ParamLayout::new(vec![ParamBlock::empty(), ParamBlock::direction_pair()])
        .expect("static layout is valid");
    ActionSpaceSpec::new(vec!["brake".into(), "pull".into()], layout)
        .expect("static space is valid")
}

impl GoalEnv {
    pub fn new(seed: u64, integrator: Integrator) -> Self {
        Self {
            space: goal_space(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            integrator,
            pos: [0.0; 2],
            vel: [0.0; 2],
            target: [0.0; 2],
            steps: 0,
            alive: false,
        }
    }

    /// Starts an episode from explicit positions (velocity zero), for
    /// reproducible rollouts and analysis. Positions must lie on the plate.
    pub fn reset_to(&mut self, pos: [f64; 2], target: [f64; 2]) -> (Vec<f64>, Vec<bool>) {
        assert!(
            pos.iter()
                .chain(target.iter())
                .all(|c| c.abs() <= PLATE_HALF_WIDTH),
            "positions must lie on the plate"
        );
        self.pos = pos;
        self.target = target;
        self.vel = [0.0; 2];
        self.steps = 0;
        self.alive = true;
        (self.observe(), self.mask())
    }

    fn distance(&self) -> f64 {
        let dx = self.pos[0] - self.target[0];
        let dy = self.pos[1] - self.target[1];
        (dx * dx + dy * dy).sqrt()
    }

    fn speed(&self) -> f64 {
        (self.vel[0] * self.vel[0] + self.vel[1] * self.vel[1]).sqrt()
    }

    fn observe(&self) -> Vec<f64> {
        let d = self.distance();
        vec![
            self.pos[0],
            self.pos[1],
            self.vel[0],
            self.vel[1],
            self.target[0],
            self.target[1],
            d,
            if d < GOAL_RADIUS { 1.0 } else { 0.0 },
        ]
    }

    fn mask(&self) -> Vec<bool> {
        vec![true; self.space.num_heads()]
    }

    pub fn target(&self) -> [f64; 2] {
        self.target
    }
}

impl Environment for GoalEnv {
    fn name(&self) -> &'static str {
        "goal"
    }

    fn space(&self) -> &ActionSpaceSpec {
        &self.space
    }

    fn obs_dim(&self) -> usize {
        8
    }

    fn reset(&mut self) -> (Vec<f64>, Vec<bool>) {
        // Rejection-sample so no episode starts already inside the goal.
        loop {
            for c in &mut self.pos {
                *c = self.rng.random_range(-PLATE_HALF_WIDTH..=PLATE_HALF_WIDTH);
            }
            for c in &mut self.target {
                *c = self
                    .rng
                    .random_range(-TARGET_HALF_WIDTH..=TARGET_HALF_WIDTH);
            }
            if self.distance() >= GOAL_RADIUS {
                break;
            }
        }
        self.vel = [0.0; 2];
        self.steps = 0;
        self.alive = true;
        (self.observe(), self.mask())
    }

    fn step(&mut self, action: &HybridAction) -> Result<StepResult, EnvError> {
        if !self.alive {
            return Err(EnvError::EpisodeFinished);
        }
        let distance_before = self.distance();
        match action.head {
            HEAD_BRAKE => {
                let speed = self.speed();
                if speed <= BRAKE_DECREMENT {
                    self.vel = [0.0; 2];
                } else {
                    let scale = (speed - BRAKE_DECREMENT) / speed;
                    self.vel[0] *= scale;
                    self.vel[1] *= scale;
                }
            }
            HEAD_PULL => {
                let dir = action.own_block(self.space.layout());
                let norm = (dir[0] * dir[0] + dir[1] * dir[1]).sqrt();
                if (norm - 1.0).abs() > 1e-6 {
                    return Err(EnvError::InvalidAction(format!(
                        "pull direction must be a unit vector, |dir| = {norm}"
                    )));
                }
                match self.integrator {
                    Integrator::Exact => {
                        for i in 0..2 {
                            self.pos[i] += self.vel[i] * TIME_STEP
                                + 0.5 * dir[i] * TIME_STEP * TIME_STEP;
                            self.vel[i] += dir[i] * TIME_STEP;
                        }
                    }
                    Integrator::Euler => {
                        for i in 0..2 {
                            self.pos[i] += self.vel[i] * TIME_STEP;
                            self.vel[i] += dir[i] * TIME_STEP;
                        }
                    }
                }
            }
            other => {
                return Err(EnvError::InvalidAction(format!(
                    "head {other} out of range for the goal space"
                )));
            }
        }
        self.steps += 1;
        let distance_after = self.distance();
        let at_goal = distance_after < GOAL_RADIUS && self.speed() <= STOP_SPEED;
        let out = self.pos.iter().any(|c| c.abs() > PLATE_HALF_WIDTH);
        let timeout = self.steps >= MAX_EPISODE_STEPS;
        let terminal = at_goal || out || timeout;
        let reward = distance_before - distance_after + if at_goal { 1.0 } else { 0.0 };
        if terminal {
            self.alive = false;
        }
        Ok(StepResult {
            observation: self.observe(),
            reward,
            terminal,
            goal: at_goal,
            mask: self.mask(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pull(dir: [f64; 2]) -> HybridAction {
        HybridAction::new(HEAD_PULL, vec![dir[0], dir[1]])
    }

    fn brake() -> HybridAction {
        HybridAction::new(HEAD_BRAKE, vec![0.0, 0.0])
    }

    #[test]
    fn pull_from_rest_matches_closed_form() {
        // n pulls of unit force east from rest: v = 0.1 n, x = 0.005 n^2.
        let mut env = GoalEnv::new(0, Integrator::Exact);
        env.reset_to([0.0, 0.0], [-0.5, -0.5]);
        for n in 1..=10 {
            let r = env.step(&pull([1.0, 0.0])).unwrap();
            let expect_x = 0.005 * (n as f64) * (n as f64);
            let expect_v = 0.1 * n as f64;
            assert!((r.observation[0] - expect_x).abs() < 1e-12, "x at n={n}");
            assert!((r.observation[2] - expect_v).abs() < 1e-12, "v at n={n}");
            assert_eq!(r.observation[1], 0.0);
            assert_eq!(r.observation[3], 0.0);
        }
    }

    #[test]
    fn euler_integrator_drops_half_step_term() {
        let mut env = GoalEnv::new(0, Integrator::Euler);
        env.reset_to([0.0, 0.0], [-0.5, -0.5]);
        let r = env.step(&pull([1.0, 0.0])).unwrap();
        // First Euler step moves nothing (velocity was zero).
        assert_eq!(r.observation[0], 0.0);
        assert!((r.observation[2] - 0.1).abs() < 1e-15);
        let r = env.step(&pull([1.0, 0.0])).unwrap();
        // Second step moves by v*dt = 0.01.
        assert!((r.observation[0] - 0.01).abs() < 1e-15);
    }

    #[test]
    fn brake_reduces_speed_and_clamps_at_zero() {
        let mut env = GoalEnv::new(0, Integrator::Exact);
        env.reset_to([0.0, 0.0], [0.9, 0.9]);
        // Build diagonal speed 0.1 * sqrt(2) ~ 0.1414.
        env.step(&pull([1.0, 0.0])).unwrap();
        env.step(&pull([0.0, 1.0])).unwrap();
        let r = env.step(&brake()).unwrap();
        let speed = (r.observation[2].powi(2) + r.observation[3].powi(2)).sqrt();
        assert!((speed - (0.1f64 * 2.0f64.sqrt() - 0.1)).abs() < 1e-12);
        // Direction is preserved by braking.
        assert!((r.observation[2] - r.observation[3]).abs() < 1e-12);
        let before = [r.observation[0], r.observation[1]];
        let r = env.step(&brake()).unwrap();
        assert_eq!(
            (r.observation[2], r.observation[3]),
            (0.0, 0.0),
            "speed below the decrement clamps to zero"
        );
        assert_eq!(
            [r.observation[0], r.observation[1]], before,
            "braking never moves the mass"
        );
    }

    #[test]
    fn success_requires_rest_inside_goal() {
        let mut env = GoalEnv::new(0, Integrator::Exact);
        env.reset_to([0.1049, 0.0], [0.0, 0.0]);
        // Pull toward the target: lands inside the circle but still moving.
        let r = env.step(&pull([-1.0, 0.0])).unwrap();
        assert!(r.observation[6] < GOAL_RADIUS);
        assert_eq!(r.observation[7], 1.0, "inside-goal indicator");
        assert!(!r.terminal, "still moving, not a success yet");
        // Brake to rest: success with the +1 bonus on top of zero movement.
        let r = env.step(&brake()).unwrap();
        assert!(r.terminal && r.goal);
        assert!((r.reward - 1.0).abs() < 1e-15);
        assert!(matches!(env.step(&brake()), Err(EnvError::EpisodeFinished)));
    }

    #[test]
    fn leaving_the_plate_terminates_without_bonus() {
        let mut env = GoalEnv::new(0, Integrator::Exact);
        env.reset_to([0.0, 0.0], [-0.5, -0.5]);
        let mut last = None;
        for n in 1..=15 {
            let r = env.step(&pull([1.0, 0.0])).unwrap();
            if n < 15 {
                assert!(!r.terminal, "still on the plate at n={n}");
            }
            last = Some(r);
        }
        // x = 0.005 * 225 = 1.125 > 1 on step 15.
        let last = last.unwrap();
        assert!(last.terminal && !last.goal);
        assert!(last.observation[0] > PLATE_HALF_WIDTH);
    }

    #[test]
    fn episode_times_out_after_the_step_budget() {
        let mut env = GoalEnv::new(0, Integrator::Exact);
        env.reset_to([0.5, 0.5], [-0.5, -0.5]);
        for n in 1..=MAX_EPISODE_STEPS {
            let r = env.step(&brake()).unwrap();
            assert_eq!(r.reward, 0.0, "braking at rest changes nothing");
            assert_eq!(r.terminal, n == MAX_EPISODE_STEPS);
            assert!(!r.goal);
        }
    }

    #[test]
    fn reward_telescopes_to_distance_decrease_plus_bonus() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut env = GoalEnv::new(12, Integrator::Exact);
        for _ in 0..50 {
            let (obs, _) = env.reset();
            let d0 = obs[6];
            let mut total = 0.0;
            let (goal, d_end);
            loop {
                let action = if rng.random_bool(0.5) {
                    let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                    pull([angle.cos(), angle.sin()])
                } else {
                    brake()
                };
                let r = env.step(&action).unwrap();
                total += r.reward;
                if r.terminal {
                    goal = r.goal;
                    d_end = r.observation[6];
                    break;
                }
            }
            let expect = d0 - d_end + if goal { 1.0 } else { 0.0 };
            assert!((total - expect).abs() < 1e-9, "telescoped {total} vs {expect}");
        }
    }

    #[test]
    fn rejects_bad_actions() {
        let mut env = GoalEnv::new(0, Integrator::Exact);
        env.reset_to([0.0, 0.0], [0.5, 0.5]);
        let err = env.step(&HybridAction::new(HEAD_PULL, vec![2.0, 0.0]));
        assert!(matches!(err, Err(EnvError::InvalidAction(_))));
        let err = env.step(&HybridAction::new(7, vec![1.0, 0.0]));
        assert!(matches!(err, Err(EnvError::InvalidAction(_))));
    }

    #[test]
    fn reset_never_starts_inside_goal() {
        let mut env = GoalEnv::new(99, Integrator::Exact);
        for _ in 0..2000 {
            let (obs, mask) = env.reset();
            assert!(obs[6] >= GOAL_RADIUS);
            assert_eq!(obs[7], 0.0);
            assert_eq!(mask, vec![true, true]);
        }
    }
}
