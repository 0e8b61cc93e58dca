//! Numerical verification of every analytic gradient path against central
//! finite differences.
//!
//! Each seed draws a random network shape, action layout, batch, and mask
//! pattern, then checks the Q loss gradient (in its dueling, non-dueling,
//! state-only, and single-head critic forms) and the actor loss gradient
//! (with bound penalties and head masks). ReLU networks are only piecewise
//! differentiable, so coordinates whose finite difference is not
//! self-consistent across two step sizes sit next to a kink and are
//! excluded rather than compared.

use super::HarnessError;
use crate::math::{finite_diff_grad, Gradients};
use crate::net::{
    bounds_penalty, q_loss_grad, theta_loss_grad, ActorScratch, ParamActor, QNetwork, QSample,
    QScratch,
};
use crate::space::{ParamBlock, ParamLayout};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FD_EPS: f64 = 1e-5;
const ABS_TOL: f64 = 1e-7;
const REL_TOL: f64 = 1e-4;
/// Relative disagreement between the two finite-difference step sizes
/// beyond which a coordinate is treated as kink-adjacent.
const KINK_TOL: f64 = 1e-3;

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub label: String,
    pub coords: usize,
    pub excluded: usize,
    pub failed: usize,
    pub max_abs: f64,
    pub max_rel: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.failed == 0
    }

    pub fn line(&self) -> String {
        format!(
            "{}: {} coords, {} kink-excluded, max abs {:.2e}, max rel {:.2e} ... {}",
            self.label,
            self.coords,
            self.excluded,
            self.max_abs,
            self.max_rel,
            if self.passed() { "ok" } else { "FAIL" }
        )
    }
}

#[derive(Clone, Debug, Default)]
pub struct GradcheckReport {
    pub checks: Vec<CheckResult>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }

    pub fn max_rel(&self) -> f64 {
        self.checks.iter().map(|c| c.max_rel).fold(0.0, f64::max)
    }

    pub fn total_excluded(&self) -> usize {
        self.checks.iter().map(|c| c.excluded).sum()
    }
}

/// Compares an analytic gradient against two finite-difference estimates.
fn compare(label: String, analytic: &Gradients, coarse: &Gradients, fine: &Gradients) -> CheckResult {
    let a = analytic.flat();
    let c = coarse.flat();
    let f = fine.flat();
    assert_eq!(a.len(), f.len());
    let mut excluded = 0;
    let mut failed = 0;
    let mut max_abs = 0.0f64;
    let mut max_rel = 0.0f64;
    for i in 0..a.len() {
        let fd_gap = (c[i] - f[i]).abs();
        if fd_gap > KINK_TOL * (1.0 + c[i].abs().max(f[i].abs())) {
            excluded += 1;
            continue;
        }
        let abs = (a[i] - f[i]).abs();
        let rel = abs / a[i].abs().max(f[i].abs()).max(1e-300);
        max_abs = max_abs.max(abs);
        if abs > ABS_TOL {
            max_rel = max_rel.max(rel);
            if rel > REL_TOL {
                failed += 1;
            }
        }
    }
    CheckResult {
        label,
        coords: a.len(),
        excluded,
        failed,
        max_abs,
        max_rel,
    }
}

struct Scenario {
    q: QNetwork,
    actor: ParamActor,
    states: Vec<Vec<f64>>,
    masks: Option<Vec<Vec<bool>>>,
    penalty_weight: f64,
    sample_weight: f64,
    label: String,
}

fn random_layout(rng: &mut ChaCha8Rng, num_heads: usize) -> ParamLayout {
    let blocks = (0..num_heads)
        .map(|_| match rng.random_range(0..4) {
            0 => ParamBlock::direction_pair(),
            1 => {
                let low = -rng.random_range(0.5..2.0);
                let high = rng.random_range(0.5..2.0);
                ParamBlock::bounded(vec![low], vec![high])
            }
            2 => ParamBlock::free(rng.random_range(1..=2)),
            _ => ParamBlock::empty(),
        })
        .collect();
    ParamLayout::new(blocks).expect("generated blocks are valid")
}

fn random_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0xA5A5);
    // Every fifth seed uses the full production shape; the rest stay small
    // so twenty seeds finish well inside the time budget.
    let hidden: Vec<usize> = match seed % 5 {
        0 => vec![64, 32, 32],
        1 => vec![],
        2 => vec![8],
        _ => vec![16, 8],
    };
    let actor_hidden: Vec<usize> = match seed % 5 {
        0 => vec![64, 32],
        1 => vec![],
        _ => vec![8],
    };
    let state_dim = rng.random_range(1..=8);
    let num_heads = rng.random_range(1..=4);
    // seed % 4 == 1 exercises the state-only shape used by the discretized
    // baseline; num_heads == 1 with dueling off is the DDPG critic shape.
    let state_only = seed % 4 == 1;
    let layout = if state_only {
        ParamLayout::new(vec![ParamBlock::empty(); num_heads]).unwrap()
    } else {
        random_layout(&mut rng, num_heads)
    };
    let dueling = rng.random::<f64>() < 0.5;
    let q = QNetwork::new(
        state_dim,
        layout.total_dim(),
        num_heads,
        &hidden,
        dueling,
        rng.random::<u64>(),
    )
    .unwrap();
    let actor = ParamActor::new(state_dim, layout, &actor_hidden, rng.random::<u64>()).unwrap();
    let batch = rng.random_range(1..=5);
    let states: Vec<Vec<f64>> = (0..batch)
        .map(|_| (0..state_dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let masks = if seed % 2 == 1 && num_heads > 1 {
        Some(
            (0..batch)
                .map(|_| {
                    let mut m: Vec<bool> = (0..num_heads).map(|_| rng.random::<f64>() < 0.7).collect();
                    m[rng.random_range(0..num_heads)] = true;
                    m
                })
                .collect(),
        )
    } else {
        None
    };
    let penalty_weight = [0.0, 0.7, 2.0][(seed % 3) as usize];
    let sample_weight = if seed % 2 == 0 {
        1.0 / batch as f64
    } else {
        1.0
    };
    let label = format!(
        "seed {seed} state_dim {state_dim} heads {num_heads} hidden {hidden:?}{}{}",
        if dueling { " dueling" } else { "" },
        if state_only { " state-only" } else { "" },
    );
    Scenario {
        q,
        actor,
        states,
        masks,
        penalty_weight,
        sample_weight,
        label,
    }
}

fn check_q_loss(sc: &Scenario, rng: &mut ChaCha8Rng) -> Result<CheckResult, HarnessError> {
    let param_dim = sc.q.param_dim();
    let xs: Vec<Vec<f64>> = (0..sc.states.len())
        .map(|_| (0..param_dim).map(|_| rng.random_range(-1.5..1.5)).collect())
        .collect();
    let heads: Vec<usize> = (0..sc.states.len())
        .map(|_| rng.random_range(0..sc.q.num_heads()))
        .collect();
    let targets: Vec<f64> = (0..sc.states.len())
        .map(|_| rng.random_range(-2.0..2.0))
        .collect();
    let samples: Vec<QSample> = (0..sc.states.len())
        .map(|i| QSample {
            state: &sc.states[i],
            head: heads[i],
            x_all: &xs[i],
            target: targets[i],
        })
        .collect();

    let mut analytic = Gradients::zeros(sc.q.spec());
    let mut scratch = QScratch::new();
    q_loss_grad(&sc.q, &samples, sc.sample_weight, &mut analytic, &mut scratch)?;

    let mut probe = sc.q.clone();
    let mut fd_at = |eps: f64| {
        finite_diff_grad(&sc.q.params, eps, |p| {
            probe.params = p.clone();
            let mut loss = 0.0;
            for s in &samples {
                probe.forward(s.state, s.x_all, &mut scratch).unwrap();
                let err = scratch.q()[s.head] - s.target;
                loss += sc.sample_weight * 0.5 * err * err;
            }
            loss
        })
    };
    let coarse = fd_at(FD_EPS)?;
    let fine = fd_at(FD_EPS / 16.0)?;
    Ok(compare(
        format!("q-loss {}", sc.label),
        &analytic,
        &coarse,
        &fine,
    ))
}

fn check_theta_loss(sc: &Scenario) -> Result<CheckResult, HarnessError> {
    let states: Vec<&[f64]> = sc.states.iter().map(Vec::as_slice).collect();
    let mask_refs: Option<Vec<&[bool]>> =
        sc.masks.as_ref().map(|m| m.iter().map(Vec::as_slice).collect());

    let mut analytic = Gradients::zeros(sc.actor.spec());
    let mut asc = ActorScratch::new();
    let mut qsc = QScratch::new();
    theta_loss_grad(
        &sc.actor,
        &sc.q,
        &states,
        sc.sample_weight,
        sc.penalty_weight,
        mask_refs.as_deref(),
        &mut analytic,
        &mut asc,
        &mut qsc,
    )?;

    let num_heads = sc.q.num_heads();
    let mut probe = sc.actor.clone();
    let mut fd_at = |eps: f64| {
        finite_diff_grad(&sc.actor.params, eps, |p| {
            probe.params = p.clone();
            let mut loss = 0.0;
            for (i, state) in states.iter().enumerate() {
                probe.forward(state, &mut asc).unwrap();
                sc.q.forward(state, asc.x(), &mut qsc).unwrap();
                for k in 0..num_heads {
                    let usable = sc.masks.as_ref().map_or(true, |m| m[i][k]);
                    if usable {
                        loss -= sc.sample_weight * qsc.q()[k];
                    }
                }
                loss += sc.sample_weight
                    * sc.penalty_weight
                    * bounds_penalty(probe.layout(), asc.raw());
            }
            loss
        })
    };
    let coarse = fd_at(FD_EPS)?;
    let fine = fd_at(FD_EPS / 16.0)?;
    Ok(compare(
        format!("theta-loss {}", sc.label),
        &analytic,
        &coarse,
        &fine,
    ))
}

/// Runs the full gradient-check suite over `seed_count` random scenarios.
pub fn run_gradcheck(seed_count: u64) -> Result<GradcheckReport, HarnessError> {
    let mut report = GradcheckReport::default();
    for seed in 0..seed_count {
        let sc = random_scenario(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5151_5151);
        report.checks.push(check_q_loss(&sc, &mut rng)?);
        if sc.actor.layout().total_dim() > 0 {
            report.checks.push(check_theta_loss(&sc)?);
        }
    }
    Ok(report)
}
