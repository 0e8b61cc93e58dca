//! Per-block output transforms applied to the actor's raw outputs, and the
//! penalty that keeps bounded blocks in range during training.

use crate::space::{BlockKind, ParamLayout};

/// Applies each block's transform to the raw actor output: direction pairs
/// are normalized onto the unit circle, bounded and free blocks pass
/// through unchanged (bounded blocks are clamped only at execution time,
/// never during training). A raw direction of exactly `(0, 0)` maps to
/// `(1, 0)` by convention.
pub fn transform_blocks(layout: &ParamLayout, raw: &[f64], x: &mut Vec<f64>) {
    assert_eq!(raw.len(), layout.total_dim(), "raw output length");
    x.clear();
    x.extend_from_slice(raw);
    for (head, block) in layout.blocks() {
        if let BlockKind::DirectionPair = block.kind {
            let r = layout.range(head);
            let (u0, u1) = (raw[r.start], raw[r.start + 1]);
            let norm = (u0 * u0 + u1 * u1).sqrt();
            if norm == 0.0 {
                x[r.start] = 1.0;
                x[r.start + 1] = 0.0;
            } else {
                x[r.start] = u0 / norm;
                x[r.start + 1] = u1 / norm;
            }
        }
    }
}

/// Pulls a gradient with respect to the transformed output `x` back to the
/// raw output. For a direction pair `y = u / |u|` the Jacobian is
/// `(I - y y^T) / |u|`; at the raw origin the transform is locally constant
/// so the gradient is zero.
pub fn transform_backward(layout: &ParamLayout, raw: &[f64], g_x: &[f64], g_raw: &mut Vec<f64>) {
    assert_eq!(raw.len(), layout.total_dim(), "raw output length");
    assert_eq!(g_x.len(), layout.total_dim(), "gradient length");
    g_raw.clear();
    g_raw.extend_from_slice(g_x);
    for (head, block) in layout.blocks() {
        if let BlockKind::DirectionPair = block.kind {
            let r = layout.range(head);
            let (u0, u1) = (raw[r.start], raw[r.start + 1]);
            let norm = (u0 * u0 + u1 * u1).sqrt();
            if norm == 0.0 {
                g_raw[r.start] = 0.0;
                g_raw[r.start + 1] = 0.0;
            } else {
                let (y0, y1) = (u0 / norm, u1 / norm);
                let (g0, g1) = (g_x[r.start], g_x[r.start + 1]);
                let proj = y0 * g0 + y1 * g1;
                g_raw[r.start] = (g0 - y0 * proj) / norm;
                g_raw[r.start + 1] = (g1 - y1 * proj) / norm;
            }
        }
    }
}

/// Clamps bounded blocks into their boxes in place. Direction and free
/// blocks are untouched. Environments only ever see clamped vectors.
pub fn clamp_blocks(layout: &ParamLayout, x: &mut [f64]) {
    assert_eq!(x.len(), layout.total_dim(), "parameter vector length");
    for (head, block) in layout.blocks() {
        if let BlockKind::Bounded { low, high } = &block.kind {
            let r = layout.range(head);
            for (i, xi) in x[r].iter_mut().enumerate() {
                *xi = xi.clamp(low[i], high[i]);
            }
        }
    }
}

/// Squared out-of-range penalty over all bounded blocks:
/// `sum max(0, raw - high)^2 + max(0, low - raw)^2`.
pub fn bounds_penalty(layout: &ParamLayout, raw: &[f64]) -> f64 {
    assert_eq!(raw.len(), layout.total_dim(), "raw output length");
    let mut penalty = 0.0;
    for (head, block) in layout.blocks() {
        if let BlockKind::Bounded { low, high } = &block.kind {
            let r = layout.range(head);
            for (i, &v) in raw[r].iter().enumerate() {
                let over = (v - high[i]).max(0.0);
                let under = (low[i] - v).max(0.0);
                penalty += over * over + under * under;
            }
        }
    }
    penalty
}

/// Gradient of [`bounds_penalty`] with respect to the raw output, scaled by
/// `weight` and accumulated into `g_raw`.
pub fn bounds_penalty_grad(layout: &ParamLayout, raw: &[f64], weight: f64, g_raw: &mut [f64]) {
    assert_eq!(raw.len(), layout.total_dim(), "raw output length");
    assert_eq!(g_raw.len(), layout.total_dim(), "gradient length");
    for (head, block) in layout.blocks() {
        if let BlockKind::Bounded { low, high } = &block.kind {
            let r = layout.range(head);
            for (i, idx) in r.enumerate() {
                let v = raw[idx];
                let over = (v - high[i]).max(0.0);
                let under = (low[i] - v).max(0.0);
                g_raw[idx] += weight * 2.0 * (over - under);
            }
        }
    }
}
