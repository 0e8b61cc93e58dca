//! Hybrid action space descriptions shared by networks, environments and
//! agents.
//!
//! An action is a discrete head `k` paired with a continuous parameter
//! vector `x_all` that concatenates one block per head (a head's block may
//! be empty). Networks always produce and consume the full `x_all`; the
//! environment reads only the block belonging to the executed head.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("direction-pair block for head {head} must have dimension 2, got {dim}")]
    BadDirectionDim { head: usize, dim: usize },
    #[error("bounded block for head {head}: bounds must be finite with low < high")]
    BadBounds { head: usize },
    #[error("bounded block for head {head}: bounds length {bounds} != dim {dim}")]
    BoundsLength { head: usize, bounds: usize, dim: usize },
    #[error("action space must have at least one head")]
    NoHeads,
}

/// How a head's parameter block is constrained.
#[derive(Clone, Debug, PartialEq)]
pub enum BlockKind {
    /// Two raw values normalized onto the unit circle.
    DirectionPair,
    /// Per-coordinate box `[low_i, high_i]`; clamped at execution time and
    /// penalized (not clamped) during training.
    Bounded { low: Vec<f64>, high: Vec<f64> },
    /// Unconstrained.
    Free,
}

/// One head's parameter block.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamBlock {
    pub dim: usize,
    pub kind: BlockKind,
}

impl ParamBlock {
    pub fn direction_pair() -> Self {
        Self {
            dim: 2,
            kind: BlockKind::DirectionPair,
        }
    }

    pub fn bounded(low: Vec<f64>, high: Vec<f64>) -> Self {
        Self {
            dim: low.len(),
            kind: BlockKind::Bounded { low, high },
        }
    }

    pub fn free(dim: usize) -> Self {
        Self {
            dim,
            kind: BlockKind::Free,
        }
    }

    pub fn empty() -> Self {
        Self::free(0)
    }
}

/// Ordered per-head parameter blocks with derived offsets into `x_all`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamLayout {
    blocks: Vec<ParamBlock>,
    offsets: Vec<usize>,
    total: usize,
}

impl ParamLayout {
    /// Blocks are given in head order: block `k` belongs to head `k`.
    pub fn new(blocks: Vec<ParamBlock>) -> Result<Self, SpaceError> {
        if blocks.is_empty() {
            return Err(SpaceError::NoHeads);
        }
        let mut offsets = Vec::with_capacity(blocks.len());
        let mut total = 0usize;
        for (head, block) in blocks.iter().enumerate() {
            match &block.kind {
                BlockKind::DirectionPair => {
                    if block.dim != 2 {
                        return Err(SpaceError::BadDirectionDim {
                            head,
                            dim: block.dim,
                        });
                    }
                }
                BlockKind::Bounded { low, high } => {
                    if low.len() != block.dim || high.len() != block.dim {
                        return Err(SpaceError::BoundsLength {
                            head,
                            bounds: low.len().min(high.len()),
                            dim: block.dim,
                        });
                    }
                    for (lo, hi) in low.iter().zip(high) {
                        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                            return Err(SpaceError::BadBounds { head });
                        }
                    }
                }
                BlockKind::Free => {}
            }
            offsets.push(total);
            total += block.dim;
        }
        Ok(Self {
            blocks,
            offsets,
            total,
        })
    }

    pub fn num_heads(&self) -> usize {
        self.blocks.len()
    }

    /// Total dimension of `x_all`.
    pub fn total_dim(&self) -> usize {
        self.total
    }

    pub fn block(&self, head: usize) -> &ParamBlock {
        &self.blocks[head]
    }

    /// Range of head `k`'s block inside `x_all`.
    pub fn range(&self, head: usize) -> std::ops::Range<usize> {
        let start = self.offsets[head];
        start..start + self.blocks[head].dim
    }

    pub fn blocks(&self) -> impl Iterator<Item = (usize, &ParamBlock)> {
        self.blocks.iter().enumerate()
    }
}

/// A named hybrid action space: discrete heads and their parameter layout.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionSpaceSpec {
    head_names: Vec<String>,
    layout: ParamLayout,
}

impl ActionSpaceSpec {
    pub fn new(head_names: Vec<String>, layout: ParamLayout) -> Result<Self, SpaceError> {
        assert_eq!(
            head_names.len(),
            layout.num_heads(),
            "one name per head required"
        );
        Ok(Self { head_names, layout })
    }

    pub fn num_heads(&self) -> usize {
        self.layout.num_heads()
    }

    pub fn total_param_dim(&self) -> usize {
        self.layout.total_dim()
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn head_name(&self, head: usize) -> &str {
        &self.head_names[head]
    }

    /// Canonical one-line-per-head text form; checkpoint digests hash this,
    /// so the format is part of the on-disk contract.
    pub fn canonical_text(&self) -> String {
        let mut out = String::new();
        for (k, block) in self.layout.blocks() {
            out.push_str(&format!("head {k} {} dim {}", self.head_names[k], block.dim));
            match &block.kind {
                BlockKind::DirectionPair => out.push_str(" direction-pair"),
                BlockKind::Bounded { low, high } => {
                    out.push_str(" bounded");
                    for (lo, hi) in low.iter().zip(high) {
                        out.push_str(&format!(" [{lo},{hi}]"));
                    }
                }
                BlockKind::Free => out.push_str(" free"),
            }
            out.push('\n');
        }
        out
    }
}

/// A concrete action: the executed head plus the full parameter vector for
/// every head, exactly as produced at execution time.
#[derive(Clone, Debug, PartialEq)]
pub struct HybridAction {
    pub head: usize,
    pub params: Vec<f64>,
}

impl HybridAction {
    pub fn new(head: usize, params: Vec<f64>) -> Self {
        Self { head, params }
    }

    /// The executed head's own block of parameters.
    pub fn own_block<'a>(&'a self, layout: &ParamLayout) -> &'a [f64] {
        &self.params[layout.range(self.head)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn goal_like_layout() -> ParamLayout {
        ParamLayout::new(vec![ParamBlock::empty(), ParamBlock::direction_pair()]).unwrap()
    }

    #[test]
    fn offsets_and_total_dim() {
        let layout = goal_like_layout();
        assert_eq!(layout.num_heads(), 2);
        assert_eq!(layout.total_dim(), 2);
        assert_eq!(layout.range(0), 0..0);
        assert_eq!(layout.range(1), 0..2);
    }

    #[test]
    fn own_block_reads_the_right_slice() {
        let layout = ParamLayout::new(vec![
            ParamBlock::bounded(vec![-1.0], vec![1.0]),
            ParamBlock::bounded(vec![-1.0], vec![1.0]),
        ])
        .unwrap();
        let action = HybridAction::new(1, vec![0.25, -0.5]);
        assert_eq!(action.own_block(&layout), &[-0.5]);
    }

    #[test]
    fn rejects_bad_blocks() {
        assert!(ParamLayout::new(vec![]).is_err());
        assert!(ParamLayout::new(vec![ParamBlock {
            dim: 3,
            kind: BlockKind::DirectionPair,
        }])
        .is_err());
        assert!(ParamLayout::new(vec![ParamBlock::bounded(
            vec![1.0],
            vec![-1.0]
        )])
        .is_err());
        assert!(ParamLayout::new(vec![ParamBlock::bounded(
            vec![0.0, 0.0],
            vec![1.0]
        )])
        .is_err());
    }

    #[test]
    fn canonical_text_is_stable() {
        let space = ActionSpaceSpec::new(
            vec!["brake".into(), "pull".into()],
            goal_like_layout(),
        )
        .unwrap();
        assert_eq!(
            space.canonical_text(),
            "head 0 brake dim 0 free\nhead 1 pull dim 2 direction-pair\n"
        );
    }
}
