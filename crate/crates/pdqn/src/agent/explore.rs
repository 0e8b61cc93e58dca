//! Uniform exploration over the hybrid action space.

use super::AgentError;
use crate::space::{ActionSpaceSpec, BlockKind, HybridAction, ParamLayout};
use rand::Rng;

/// Samples every block's parameters uniformly: direction pairs by uniform
/// angle, bounded blocks uniformly inside their box, free blocks uniformly
/// on `[-1, 1]` per coordinate.
pub fn sample_block_params<R: Rng + ?Sized>(layout: &ParamLayout, rng: &mut R, out: &mut Vec<f64>) {
    out.clear();
    for (_, block) in layout.blocks() {
        match &block.kind {
            BlockKind::DirectionPair => {
                let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                out.push(angle.cos());
                out.push(angle.sin());
            }
            BlockKind::Bounded { low, high } => {
                for (lo, hi) in low.iter().zip(high) {
                    out.push(rng.random_range(*lo..=*hi));
                }
            }
            BlockKind::Free => {
                for _ in 0..block.dim {
                    out.push(rng.random_range(-1.0..=1.0));
                }
            }
        }
    }
}

/// Draws a uniform hybrid action: a uniform usable head plus a full
/// parameter vector sampled by [`sample_block_params`]. The head is drawn
/// first, then the blocks, so the stream layout is deterministic.
pub fn sample_uniform_hybrid<R: Rng + ?Sized>(
    space: &ActionSpaceSpec,
    mask: &[bool],
    rng: &mut R,
) -> Result<HybridAction, AgentError> {
    assert_eq!(mask.len(), space.num_heads(), "one mask entry per head");
    let usable: Vec<usize> = (0..space.num_heads()).filter(|&k| mask[k]).collect();
    if usable.is_empty() {
        return Err(AgentError::AllMasked);
    }
    let head = usable[rng.random_range(0..usable.len())];
    let mut params = Vec::with_capacity(space.total_param_dim());
    sample_block_params(space.layout(), rng, &mut params);
    Ok(HybridAction::new(head, params))
}
