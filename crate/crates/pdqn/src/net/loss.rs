//! Training losses and the greedy policy over the hybrid space.

use super::actor::{ActorScratch, ParamActor};
use super::q::{QNetwork, QScratch};
use super::transform::{bounds_penalty, bounds_penalty_grad, clamp_blocks};
use super::NetError;
use crate::math::Gradients;
use crate::space::HybridAction;

/// One Q-loss sample: the stored state and executed action plus the fixed
/// regression target `y`.
#[derive(Clone, Copy, Debug)]
pub struct QSample<'a> {
    pub state: &'a [f64],
    pub head: usize,
    pub x_all: &'a [f64],
    pub target: f64,
}

/// Squared Bellman error summed over the batch with per-sample weight
/// `sample_weight`:
/// `loss = sum_b w * 0.5 * (Q(s_b, k_b, x_b) - y_b)^2`.
///
/// Gradients with respect to the Q parameters are accumulated into `grads`
/// (the caller clears). Replay-based agents pass `w = 1/B` for a batch
/// mean; the asynchronous trainer passes `w = 1` for raw sums.
pub fn q_loss_grad(
    q: &QNetwork,
    batch: &[QSample],
    sample_weight: f64,
    grads: &mut Gradients,
    scratch: &mut QScratch,
) -> Result<f64, NetError> {
    let mut loss = 0.0;
    let mut g_q = vec![0.0; q.num_heads()];
    for sample in batch {
        if !sample.target.is_finite() {
            return Err(NetError::NonFiniteTarget);
        }
        assert!(sample.head < q.num_heads(), "head index in range");
        q.forward(sample.state, sample.x_all, scratch)?;
        let err = scratch.q()[sample.head] - sample.target;
        loss += sample_weight * 0.5 * err * err;
        g_q[sample.head] = sample_weight * err;
        q.backward(scratch, &g_q, grads)?;
        g_q[sample.head] = 0.0;
    }
    Ok(loss)
}

/// Actor loss over a batch of states with per-state weight `sample_weight`:
/// `loss = sum_s w * (-sum_k Q(s, k, x_k(s)) + lambda * penalty(raw(s)))`.
///
/// The Q network is treated as frozen: only actor-parameter gradients are
/// produced. `masks`, when given, restricts the Q sum to usable heads.
#[allow(clippy::too_many_arguments)]
pub fn theta_loss_grad(
    actor: &ParamActor,
    q: &QNetwork,
    states: &[&[f64]],
    sample_weight: f64,
    penalty_weight: f64,
    masks: Option<&[&[bool]]>,
    grads: &mut Gradients,
    actor_scratch: &mut ActorScratch,
    q_scratch: &mut QScratch,
) -> Result<f64, NetError> {
    if let Some(masks) = masks {
        assert_eq!(masks.len(), states.len(), "one mask per state");
    }
    let num_heads = q.num_heads();
    let total_dim = actor.layout().total_dim();
    let mut loss = 0.0;
    let mut g_q = vec![0.0; num_heads];
    let mut penalty_grad = vec![0.0; total_dim];
    for (i, state) in states.iter().enumerate() {
        let mask = masks.map(|m| m[i]);
        if let Some(mask) = mask {
            if mask.len() != num_heads {
                return Err(NetError::MaskLength {
                    expected: num_heads,
                    got: mask.len(),
                });
            }
        }
        actor.forward(state, actor_scratch)?;
        q.forward(state, actor_scratch.x(), q_scratch)?;
        for k in 0..num_heads {
            let usable = mask.map_or(true, |m| m[k]);
            if usable {
                loss -= sample_weight * q_scratch.q()[k];
                g_q[k] = -sample_weight;
            } else {
                g_q[k] = 0.0;
            }
        }
        q.backward_input(q_scratch, &g_q)?;
        let penalty = bounds_penalty(actor.layout(), actor_scratch.raw());
        loss += sample_weight * penalty_weight * penalty;
        penalty_grad.fill(0.0);
        bounds_penalty_grad(
            actor.layout(),
            actor_scratch.raw(),
            sample_weight * penalty_weight,
            &mut penalty_grad,
        );
        let g_x = q.input_grad_params(q_scratch);
        actor.backward(actor_scratch, g_x, Some(&penalty_grad), grads)?;
    }
    Ok(loss)
}

/// The greedy hybrid action: the actor proposes `x_all`, bounded blocks are
/// clamped for execution, and the head with the highest Q value among
/// usable heads is chosen (ties break to the lowest index).
pub fn greedy_action(
    q: &QNetwork,
    actor: &ParamActor,
    state: &[f64],
    mask: &[bool],
    q_scratch: &mut QScratch,
    actor_scratch: &mut ActorScratch,
) -> Result<HybridAction, NetError> {
    if mask.len() != q.num_heads() {
        return Err(NetError::MaskLength {
            expected: q.num_heads(),
            got: mask.len(),
        });
    }
    actor.forward(state, actor_scratch)?;
    let mut x_exec = actor_scratch.x().to_vec();
    clamp_blocks(actor.layout(), &mut x_exec);
    q.forward(state, &x_exec, q_scratch)?;
    let mut best: Option<(usize, f64)> = None;
    for (k, &usable) in mask.iter().enumerate() {
        if !usable {
            continue;
        }
        let value = q_scratch.q()[k];
        if best.map_or(true, |(_, b)| value > b) {
            best = Some((k, value));
        }
    }
    let (head, _) = best.ok_or(NetError::AllMasked)?;
    Ok(HybridAction::new(head, x_exec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{finite_diff_grad, MlpParams};
    use crate::net::transform::transform_blocks;
    use crate::space::{ParamBlock, ParamLayout};

    fn test_layout() -> ParamLayout {
        ParamLayout::new(vec![
            ParamBlock::direction_pair(),
            ParamBlock::bounded(vec![-1.0], vec![1.0]),
        ])
        .unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn q_loss_gradient_matches_finite_differences() {
        let state_dim = 3;
        let q = QNetwork::new(state_dim, 3, 2, &[8, 6], true, 21).unwrap();
        let states = [
            vec![0.2, -0.4, 0.9],
            vec![-1.0, 0.3, 0.1],
            vec![0.5, 0.5, -0.5],
        ];
        let x_alls = [
            vec![0.6, 0.8, -0.2],
            vec![-1.0, 0.0, 0.9],
            vec![0.0, 1.0, 0.4],
        ];
        let batch: Vec<QSample> = (0..3)
            .map(|i| QSample {
                state: &states[i],
                head: i % 2,
                x_all: &x_alls[i],
                target: [0.7, -0.3, 1.2][i],
            })
            .collect();
        let mut grads = Gradients::zeros(q.spec());
        let mut scratch = QScratch::new();
        let weight = 1.0 / batch.len() as f64;
        let loss = q_loss_grad(&q, &batch, weight, &mut grads, &mut scratch).unwrap();
        assert!(loss.is_finite());

        let fd = finite_diff_grad(&q.params, 1e-6, |p| {
            let mut s = QScratch::new();
            batch
                .iter()
                .map(|smp| {
                    q.forward_params(p, smp.state, smp.x_all, &mut s).unwrap();
                    weight * 0.5 * (s.q()[smp.head] - smp.target).powi(2)
                })
                .sum()
        })
        .unwrap();
        for (a, f) in grads.flat().iter().zip(fd.flat()) {
            assert!(close(*a, f, 1e-6), "analytic {a} vs fd {f}");
        }
    }

    #[test]
    fn theta_loss_gradient_matches_finite_differences() {
        let state_dim = 2;
        let layout = test_layout();
        let actor = ParamActor::new(state_dim, layout.clone(), &[8], 4).unwrap();
        let q = QNetwork::new(state_dim, layout.total_dim(), 2, &[8], true, 5).unwrap();
        let states_owned = [vec![0.3, -0.8], vec![1.1, 0.2]];
        let states: Vec<&[f64]> = states_owned.iter().map(|s| s.as_slice()).collect();
        let masks_owned = [vec![true, true], vec![true, false]];
        let masks: Vec<&[bool]> = masks_owned.iter().map(|m| m.as_slice()).collect();
        let penalty_weight = 2.5;
        let weight = 0.5;

        let mut grads = Gradients::zeros(actor.spec());
        let mut asc = ActorScratch::new();
        let mut qsc = QScratch::new();
        let loss = theta_loss_grad(
            &actor,
            &q,
            &states,
            weight,
            penalty_weight,
            Some(&masks),
            &mut grads,
            &mut asc,
            &mut qsc,
        )
        .unwrap();
        assert!(loss.is_finite());

        // Finite differences over the actor parameters of the loss value,
        // recomputed from forward passes only.
        let fd = finite_diff_grad(&actor.params, 1e-6, |p| {
            let mut asc = ActorScratch::new();
            let mut qsc = QScratch::new();
            let mut total = 0.0;
            for (i, state) in states.iter().enumerate() {
                actor.forward_params(p, state, &mut asc).unwrap();
                q.forward(state, asc.x(), &mut qsc).unwrap();
                for k in 0..2 {
                    if masks[i][k] {
                        total -= weight * qsc.q()[k];
                    }
                }
                total += weight * penalty_weight * bounds_penalty(&layout, asc.raw());
            }
            total
        })
        .unwrap();
        for (a, f) in grads.flat().iter().zip(fd.flat()) {
            assert!(close(*a, f, 1e-5), "analytic {a} vs fd {f}");
        }
    }

    #[test]
    fn dueling_theta_loss_equals_minus_k_times_value() {
        // With a dueling head the advantages cancel inside sum_k Q_k, so
        // the unmasked actor objective reduces to -K * V(s, x(s)).
        let layout = ParamLayout::new(vec![ParamBlock::direction_pair()]).unwrap();
        let actor = ParamActor::new(3, layout.clone(), &[8], 7).unwrap();
        let q = QNetwork::new(3, 2, 4, &[8], true, 8).unwrap();
        let state = [0.4, -0.1, 0.9];
        let mut asc = ActorScratch::new();
        let mut qsc = QScratch::new();
        let mut grads = Gradients::zeros(actor.spec());
        let loss = theta_loss_grad(
            &actor,
            &q,
            &[&state],
            1.0,
            0.0,
            None,
            &mut grads,
            &mut asc,
            &mut qsc,
        )
        .unwrap();
        actor.forward(&state, &mut asc).unwrap();
        q.forward(&state, asc.x(), &mut qsc).unwrap();
        let v = qsc.cache.output()[0];
        assert!((loss - (-4.0 * v)).abs() < 1e-12, "loss {loss} vs -4V {}", -4.0 * v);
    }

    /// Builds a Q net with zero weights and fixed output biases so greedy
    /// selection is fully determined.
    fn constant_q(biases: Vec<f64>, param_dim: usize) -> QNetwork {
        let heads = biases.len();
        let mut q = QNetwork::new(1, param_dim, heads, &[], false, 0).unwrap();
        q.params = MlpParams::from_raw(
            q.spec(),
            vec![vec![0.0; heads * (1 + param_dim)]],
            vec![biases],
        )
        .unwrap();
        q
    }

    #[test]
    fn greedy_respects_mask_and_breaks_ties_low() {
        let layout = ParamLayout::new(vec![
            ParamBlock::empty(),
            ParamBlock::empty(),
            ParamBlock::empty(),
        ])
        .unwrap();
        let actor = ParamActor::new(1, layout, &[], 1).unwrap();
        let q = constant_q(vec![1.0, 3.0, 2.0], 0);
        let mut qsc = QScratch::new();
        let mut asc = ActorScratch::new();
        let pick = |mask: &[bool], qsc: &mut QScratch, asc: &mut ActorScratch| {
            greedy_action(&q, &actor, &[0.0], mask, qsc, asc).map(|a| a.head)
        };
        assert_eq!(pick(&[true, true, true], &mut qsc, &mut asc).unwrap(), 1);
        assert_eq!(pick(&[true, false, true], &mut qsc, &mut asc).unwrap(), 2);
        assert!(matches!(
            pick(&[false, false, false], &mut qsc, &mut asc),
            Err(NetError::AllMasked)
        ));

        let q_tie = constant_q(vec![3.0, 3.0, 1.0], 0);
        let a = greedy_action(&q_tie, &actor, &[0.0], &[true, true, true], &mut qsc, &mut asc)
            .unwrap();
        assert_eq!(a.head, 0, "ties break to the lowest head index");
    }

    #[test]
    fn greedy_clamps_bounded_blocks_for_execution() {
        let layout = ParamLayout::new(vec![ParamBlock::bounded(vec![-1.0], vec![1.0])]).unwrap();
        let mut actor = ParamActor::new(1, layout, &[], 0).unwrap();
        // raw = 0*s + 5 -> clamped to 1 for execution.
        actor.params =
            MlpParams::from_raw(actor.spec(), vec![vec![0.0]], vec![vec![5.0]]).unwrap();
        let q = constant_q(vec![0.0], 1);
        let mut qsc = QScratch::new();
        let mut asc = ActorScratch::new();
        let action = greedy_action(&q, &actor, &[0.0], &[true], &mut qsc, &mut asc).unwrap();
        assert_eq!(action.params, vec![1.0]);
        assert_eq!(asc.raw(), &[5.0], "training-side raw output is not clamped");
    }

    #[test]
    fn transform_blocks_used_by_actor_match_standalone() {
        let layout = test_layout();
        let actor = ParamActor::new(2, layout.clone(), &[6], 10).unwrap();
        let mut asc = ActorScratch::new();
        actor.forward(&[0.2, 0.9], &mut asc).unwrap();
        let mut expect = Vec::new();
        transform_blocks(&layout, asc.raw(), &mut expect);
        assert_eq!(asc.x(), expect.as_slice());
    }
}
