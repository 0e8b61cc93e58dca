//! The deterministic parameter actor: state in, full `x_all` out.

use super::transform::{transform_backward, transform_blocks};
use super::NetError;
use crate::math::{
    self, backward_into, forward_into, ForwardCache, Gradients, MlpParams, MlpSpec,
};
use crate::space::ParamLayout;

/// Reusable buffers for actor passes.
#[derive(Clone, Debug, Default)]
pub struct ActorScratch {
    pub(crate) cache: ForwardCache,
    pub(crate) raw: Vec<f64>,
    pub(crate) x: Vec<f64>,
    pub(crate) raw_grad: Vec<f64>,
}

impl ActorScratch {
    pub fn new() -> Self {
        Self::default()
    }

    /// Raw MLP output before block transforms.
    pub fn raw(&self) -> &[f64] {
        &self.raw
    }

    /// Transformed parameter vector `x_all`.
    pub fn x(&self) -> &[f64] {
        &self.x
    }
}

/// Deterministic map from states to the full parameter vector, one block
/// per head, with direction pairs normalized onto the unit circle.
#[derive(Clone, Debug)]
pub struct ParamActor {
    spec: MlpSpec,
    pub params: MlpParams,
    layout: ParamLayout,
    state_dim: usize,
}

impl ParamActor {
    pub fn new(
        state_dim: usize,
        layout: ParamLayout,
        hidden: &[usize],
        seed: u64,
    ) -> Result<Self, NetError> {
        let spec = MlpSpec::relu_hidden(state_dim, hidden, layout.total_dim().max(1))?;
        // A layout can be all-empty (total dim 0); the MLP still needs one
        // output to be well-formed, and the extra unit is simply ignored.
        let params = MlpParams::init(&spec, seed);
        Ok(Self {
            spec,
            params,
            layout,
            state_dim,
        })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    /// Computes raw outputs and the transformed `x_all` into `scratch`.
    pub fn forward(&self, state: &[f64], scratch: &mut ActorScratch) -> Result<(), NetError> {
        self.forward_params(&self.params, state, scratch)
    }

    /// Forward pass through explicit parameters.
    pub fn forward_params(
        &self,
        params: &MlpParams,
        state: &[f64],
        scratch: &mut ActorScratch,
    ) -> Result<(), NetError> {
        if state.len() != self.state_dim {
            return Err(math::MathError::ShapeMismatch {
                context: "actor state input",
                expected: self.state_dim,
                got: state.len(),
            }
            .into());
        }
        forward_into(&self.spec, params, state, &mut scratch.cache)?;
        scratch.raw.clear();
        scratch
            .raw
            .extend_from_slice(&scratch.cache.output()[..self.layout.total_dim()]);
        transform_blocks(&self.layout, &scratch.raw, &mut scratch.x);
        Ok(())
    }

    /// Backpropagates a gradient with respect to the transformed output
    /// `x_all`, plus an optional extra gradient already expressed with
    /// respect to the raw output (the bounds penalty), into `grads`.
    pub fn backward(
        &self,
        scratch: &mut ActorScratch,
        g_x: &[f64],
        extra_raw_grad: Option<&[f64]>,
        grads: &mut Gradients,
    ) -> Result<(), NetError> {
        transform_backward(&self.layout, &scratch.raw, g_x, &mut scratch.raw_grad);
        if let Some(extra) = extra_raw_grad {
            assert_eq!(extra.len(), self.layout.total_dim(), "extra gradient length");
            for (g, e) in scratch.raw_grad.iter_mut().zip(extra) {
                *g += e;
            }
        }
        // Pad for the placeholder output unit of an all-empty layout.
        scratch
            .raw_grad
            .resize(self.spec.output_dim(), 0.0);
        let ActorScratch {
            cache, raw_grad, ..
        } = scratch;
        backward_into(&self.spec, &self.params, cache, raw_grad, grads, None)?;
        Ok(())
    }
}
