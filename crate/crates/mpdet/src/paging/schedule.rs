//! Static block schedule.
//!
//! Stage `S` runs, in order: the pivot block `A(S,S)`; the column panel
//! `A(R,S)` and row panel `A(S,C)` for `R, C > S`; the trailing blocks
//! `A(R,C)`; then the `L` blocks of block row `S` (`L(S,C)`, `C ≤ S`) and
//! below it (`L(R,C)`, `R > S`). Each operation touches one target block and
//! reads at most two others.

use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OpKind {
    Pivot,
    ColPanel,
    RowPanel,
    Trailing,
    LDiag,
    LTrail,
}

impl OpKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OpKind::Pivot => "pivot",
            OpKind::ColPanel => "colpanel",
            OpKind::RowPanel => "rowpanel",
            OpKind::Trailing => "trailing",
            OpKind::LDiag => "ldiag",
            OpKind::LTrail => "ltrail",
        }
    }

    /// Whether the target lives in the `L` grid.
    pub fn targets_l(self) -> bool {
        matches!(self, OpKind::LDiag | OpKind::LTrail)
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OpKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "pivot" => OpKind::Pivot,
            "colpanel" => OpKind::ColPanel,
            "rowpanel" => OpKind::RowPanel,
            "trailing" => OpKind::Trailing,
            "ldiag" => OpKind::LDiag,
            "ltrail" => OpKind::LTrail,
            other => return Err(format!("unknown operation {other:?}")),
        })
    }
}

/// One operation on target block `(i, j)` during `stage`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockOp {
    pub stage: usize,
    pub kind: OpKind,
    pub i: usize,
    pub j: usize,
}

impl BlockOp {
    /// Blocks read besides the target, as `(is_l, i, j)`.
    pub fn inputs(&self) -> Vec<(bool, usize, usize)> {
        let (s, i, j) = (self.stage, self.i, self.j);
        match self.kind {
            OpKind::Pivot => vec![],
            OpKind::ColPanel | OpKind::RowPanel => vec![(false, s, s)],
            OpKind::Trailing => vec![(false, i, s), (false, s, j)],
            OpKind::LDiag => vec![(false, s, s)],
            OpKind::LTrail => vec![(false, i, s), (true, s, j)],
        }
    }

    pub fn resident_blocks(&self) -> usize {
        1 + self.inputs().len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSchedule {
    pub blocks: usize,
    pub ops: Vec<BlockOp>,
}

impl BlockSchedule {
    pub fn new(blocks: usize) -> Self {
        let mut ops = Vec::new();
        for s in 0..blocks {
            let op = |kind, i, j| BlockOp { stage: s, kind, i, j };
            ops.push(op(OpKind::Pivot, s, s));
            ops.extend((s + 1..blocks).map(|r| op(OpKind::ColPanel, r, s)));
            ops.extend((s + 1..blocks).map(|c| op(OpKind::RowPanel, s, c)));
            for r in s + 1..blocks {
                ops.extend((s + 1..blocks).map(|c| op(OpKind::Trailing, r, c)));
            }
            ops.extend((0..=s).map(|c| op(OpKind::LDiag, s, c)));
            for r in s + 1..blocks {
                ops.extend((0..=s).map(|c| op(OpKind::LTrail, r, c)));
            }
        }
        BlockSchedule { blocks, ops }
    }

    /// Operations an op depends on (the last writer of every block it touches).
    pub fn prerequisites(op: &BlockOp) -> Vec<BlockOp> {
        let s = op.stage;
        let prev = s.checked_sub(1);
        let mut deps = Vec::new();
        let trailing_prev = |i, j| prev.map(|p| BlockOp { stage: p, kind: OpKind::Trailing, i, j });
        match op.kind {
            OpKind::Pivot => deps.extend(trailing_prev(s, s)),
            OpKind::ColPanel | OpKind::RowPanel => {
                deps.push(BlockOp { stage: s, kind: OpKind::Pivot, i: s, j: s });
                deps.extend(trailing_prev(op.i, op.j));
            }
            OpKind::Trailing => {
                deps.push(BlockOp { stage: s, kind: OpKind::ColPanel, i: op.i, j: s });
                deps.push(BlockOp { stage: s, kind: OpKind::RowPanel, i: s, j: op.j });
                deps.extend(trailing_prev(op.i, op.j));
            }
            OpKind::LDiag => {
                deps.push(BlockOp { stage: s, kind: OpKind::Pivot, i: s, j: s });
                if let Some(p) = prev.filter(|&p| op.j <= p) {
                    deps.push(BlockOp { stage: p, kind: OpKind::LTrail, i: op.i, j: op.j });
                }
            }
            OpKind::LTrail => {
                deps.push(BlockOp { stage: s, kind: OpKind::ColPanel, i: op.i, j: s });
                deps.push(BlockOp { stage: s, kind: OpKind::LDiag, i: s, j: op.j });
                if let Some(p) = prev.filter(|&p| op.j <= p) {
                    deps.push(BlockOp { stage: p, kind: OpKind::LTrail, i: op.i, j: op.j });
                }
            }
        }
        deps
    }

    /// Every prerequisite precedes its dependent.
    pub fn is_topological(&self) -> bool {
        let pos: std::collections::HashMap<BlockOp, usize> = self.ops.iter().enumerate().map(|(k, op)| (*op, k)).collect();
        self.ops.iter().enumerate().all(|(k, op)| {
            Self::prerequisites(op).iter().all(|d| pos.get(d).is_some_and(|&at| at < k))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    proptest! {
        #[test]
        fn schedule_is_a_valid_linearization(b in 1usize..7) {
            let sched = BlockSchedule::new(b);
            prop_assert!(sched.is_topological());
            for s in 0..b {
                // Every A block with row and column >= s is touched exactly once.
                let a: Vec<_> = sched.ops.iter().filter(|o| o.stage == s && !o.kind.targets_l()).map(|o| (o.i, o.j)).collect();
                let unique: HashSet<_> = a.iter().collect();
                prop_assert_eq!(a.len(), unique.len());
                prop_assert_eq!(a.len(), (b - s) * (b - s));
                let l: Vec<_> = sched.ops.iter().filter(|o| o.stage == s && o.kind.targets_l()).collect();
                prop_assert_eq!(l.len(), (b - s) * (s + 1));
            }
            prop_assert!(sched.ops.iter().all(|o| o.resident_blocks() <= 3));
        }
    }

    #[test]
    fn op_names_round_trip() {
        for k in [OpKind::Pivot, OpKind::ColPanel, OpKind::RowPanel, OpKind::Trailing, OpKind::LDiag, OpKind::LTrail] {
            assert_eq!(k.as_str().parse::<OpKind>().unwrap(), k);
        }
    }
}
