//! The hybrid-input Q network: one MLP scoring every discrete head from the
//! state and the full continuous parameter vector.

use super::NetError;
use crate::math::{
    self, backward_input_into, backward_into, forward_into, ForwardCache, Gradients, MlpParams,
    MlpSpec,
};

/// Reusable buffers for Q passes: the concatenated input, the MLP cache,
/// the per-head Q values, and gradient staging.
#[derive(Clone, Debug, Default)]
pub struct QScratch {
    pub(crate) input: Vec<f64>,
    pub(crate) cache: ForwardCache,
    pub(crate) q: Vec<f64>,
    pub(crate) out_grad: Vec<f64>,
    pub(crate) input_grad: Vec<f64>,
}

impl QScratch {
    pub fn new() -> Self {
        Self::default()
    }

    /// Per-head Q values from the most recent forward pass.
    pub fn q(&self) -> &[f64] {
        &self.q
    }

    /// Gradient with respect to the concatenated `(state, x_all)` input
    /// from the most recent backward pass.
    pub fn input_grad(&self) -> &[f64] {
        &self.input_grad
    }
}

/// Q function over `(state, x_all)` with one output per discrete head.
///
/// With `dueling` enabled the MLP emits `1 + K` values interpreted as a
/// state value `V` and advantages `A_k`, combined as
/// `Q_k = V + A_k - mean(A)`; otherwise the MLP emits the `K` Q values
/// directly.
#[derive(Clone, Debug)]
pub struct QNetwork {
    spec: MlpSpec,
    pub params: MlpParams,
    state_dim: usize,
    param_dim: usize,
    num_heads: usize,
    dueling: bool,
}

impl QNetwork {
    pub fn new(
        state_dim: usize,
        param_dim: usize,
        num_heads: usize,
        hidden: &[usize],
        dueling: bool,
        seed: u64,
    ) -> Result<Self, NetError> {
        let out = if dueling { num_heads + 1 } else { num_heads };
        let spec = MlpSpec::relu_hidden(state_dim + param_dim, hidden, out)?;
        let params = MlpParams::init(&spec, seed);
        Ok(Self {
            spec,
            params,
            state_dim,
            param_dim,
            num_heads,
            dueling,
        })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn param_dim(&self) -> usize {
        self.param_dim
    }

    pub fn num_heads(&self) -> usize {
        self.num_heads
    }

    pub fn dueling(&self) -> bool {
        self.dueling
    }

    /// Computes Q values for every head into `scratch.q`.
    pub fn forward(
        &self,
        state: &[f64],
        x_all: &[f64],
        scratch: &mut QScratch,
    ) -> Result<(), NetError> {
        self.forward_params(&self.params, state, x_all, scratch)
    }

    /// Forward pass through explicit parameters (used for target networks
    /// and snapshots without cloning the whole struct).
    pub fn forward_params(
        &self,
        params: &MlpParams,
        state: &[f64],
        x_all: &[f64],
        scratch: &mut QScratch,
    ) -> Result<(), NetError> {
        if state.len() != self.state_dim {
            return Err(math::MathError::ShapeMismatch {
                context: "q network state input",
                expected: self.state_dim,
                got: state.len(),
            }
            .into());
        }
        if x_all.len() != self.param_dim {
            return Err(math::MathError::ShapeMismatch {
                context: "q network action parameter input",
                expected: self.param_dim,
                got: x_all.len(),
            }
            .into());
        }
        scratch.input.clear();
        scratch.input.extend_from_slice(state);
        scratch.input.extend_from_slice(x_all);
        forward_into(&self.spec, params, &scratch.input, &mut scratch.cache)?;
        let z = scratch.cache.output();
        scratch.q.clear();
        if self.dueling {
            let v = z[0];
            let advantages = &z[1..];
            let mean = advantages.iter().sum::<f64>() / self.num_heads as f64;
            scratch
                .q
                .extend(advantages.iter().map(|a| v + a - mean));
        } else {
            scratch.q.extend_from_slice(z);
        }
        Ok(())
    }

    /// Maps a gradient with respect to the Q values back to a gradient with
    /// respect to the raw MLP output, staging it in `scratch.out_grad`.
    ///
    /// Under dueling the value node collects the full gradient sum and each
    /// advantage node gets its own share minus the mean:
    /// `dQ_k/dV = 1`, `dQ_k/dA_j = delta_jk - 1/K`.
    fn stage_out_grad(&self, scratch: &mut QScratch, g_q: &[f64]) {
        assert_eq!(g_q.len(), self.num_heads, "q gradient length");
        scratch.out_grad.clear();
        if self.dueling {
            let total: f64 = g_q.iter().sum();
            scratch.out_grad.push(total);
            let share = total / self.num_heads as f64;
            scratch.out_grad.extend(g_q.iter().map(|g| g - share));
        } else {
            scratch.out_grad.extend_from_slice(g_q);
        }
    }

    /// Backpropagates `g_q` (gradient of a scalar loss with respect to the
    /// per-head Q values) from the forward pass held in `scratch`,
    /// accumulating parameter gradients and writing the input gradient.
    pub fn backward(
        &self,
        scratch: &mut QScratch,
        g_q: &[f64],
        grads: &mut Gradients,
    ) -> Result<(), NetError> {
        self.stage_out_grad(scratch, g_q);
        let QScratch {
            cache,
            out_grad,
            input_grad,
            ..
        } = scratch;
        backward_into(
            &self.spec,
            &self.params,
            cache,
            out_grad,
            grads,
            Some(input_grad),
        )?;
        Ok(())
    }

    /// Input-gradient-only backward pass; the network's own parameters are
    /// treated as frozen. Used by the actor loss, which differentiates
    /// through Q with respect to `x_all` only.
    pub fn backward_input(&self, scratch: &mut QScratch, g_q: &[f64]) -> Result<(), NetError> {
        self.backward_input_params(&self.params, scratch, g_q)
    }

    /// [`Self::backward_input`] through explicit parameters.
    pub fn backward_input_params(
        &self,
        params: &MlpParams,
        scratch: &mut QScratch,
        g_q: &[f64],
    ) -> Result<(), NetError> {
        self.stage_out_grad(scratch, g_q);
        let QScratch {
            cache,
            out_grad,
            input_grad,
            ..
        } = scratch;
        backward_input_into(&self.spec, params, cache, out_grad, input_grad)?;
        Ok(())
    }

    /// Slice of the last input gradient belonging to `x_all`.
    pub fn input_grad_params<'a>(&self, scratch: &'a QScratch) -> &'a [f64] {
        &scratch.input_grad[self.state_dim..]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::MlpParams;

    /// Builds a Q net whose single linear layer is fully specified, so the
    /// dueling combination can be checked against hand arithmetic.
    fn hand_dueling_net() -> QNetwork {
        let mut net = QNetwork::new(1, 0, 2, &[], true, 0).unwrap();
        // z = W s with rows [1, 2, 3]: V = s, A = (2s, 3s).
        net.params = MlpParams::from_raw(
            net.spec(),
            vec![vec![1.0, 2.0, 3.0]],
            vec![vec![0.0, 0.0, 0.0]],
        )
        .unwrap();
        net
    }

    #[test]
    fn dueling_combination_matches_hand_computation() {
        // s = 1: z = (1, 2, 3), mean A = 2.5 -> Q = (0.5, 1.5).
        let net = hand_dueling_net();
        let mut scratch = QScratch::new();
        net.forward(&[1.0], &[], &mut scratch).unwrap();
        assert_eq!(scratch.q(), &[0.5, 1.5]);
    }

    #[test]
    fn dueling_backward_distributes_gradient() {
        // dQ_0 upstream 1: g_z = (1, 1 - 0.5, 0 - 0.5) = (1, 0.5, -0.5),
        // and with s = 1 the weight gradient equals g_z.
        let net = hand_dueling_net();
        let mut scratch = QScratch::new();
        net.forward(&[1.0], &[], &mut scratch).unwrap();
        let mut grads = Gradients::zeros(net.spec());
        net.backward(&mut scratch, &[1.0, 0.0], &mut grads).unwrap();
        assert_eq!(grads.weights(0), &[1.0, 0.5, -0.5]);
        assert_eq!(grads.biases(0), &[1.0, 0.5, -0.5]);
    }

    #[test]
    fn single_head_dueling_reduces_to_value() {
        // With K = 1 the advantage cancels itself: Q = V exactly.
        let net = QNetwork::new(3, 2, 1, &[8], true, 11).unwrap();
        let mut scratch = QScratch::new();
        net.forward(&[0.1, -0.2, 0.3], &[0.5, -0.5], &mut scratch)
            .unwrap();
        let z = scratch.cache.output();
        assert!((scratch.q()[0] - z[0]).abs() < 1e-15);
    }

    #[test]
    fn non_dueling_passes_raw_outputs() {
        let net = QNetwork::new(2, 1, 3, &[8], false, 5).unwrap();
        let mut scratch = QScratch::new();
        net.forward(&[0.4, 0.6], &[-0.3], &mut scratch).unwrap();
        assert_eq!(scratch.q(), scratch.cache.output());
    }

    #[test]
    fn rejects_wrong_input_lengths() {
        let net = QNetwork::new(2, 1, 2, &[4], true, 0).unwrap();
        let mut scratch = QScratch::new();
        assert!(net.forward(&[1.0], &[0.0], &mut scratch).is_err());
        assert!(net.forward(&[1.0, 2.0], &[], &mut scratch).is_err());
    }
}
