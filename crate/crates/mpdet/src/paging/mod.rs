//! Out-of-core elimination over a grid of disk-resident blocks.
//!
//! The matrix is split into `B × B` blocks of `N_b × N_b` scalars. Each
//! block operation loads its target and at most two inputs, so no more than
//! three blocks are resident at once; the probe enforces a hard limit of
//! four. `L` lives in a second grid so the `A` blocks keep the multipliers
//! `z = a_ji / pivot` that later panels consume.
//!
//! Every scalar receives the same sequence of `sub_mul_assign` updates as in
//! [`crate::Eliminator`], so results are bit-identical to the in-memory run.
//!
//! Completed operations are journaled. Reopening a store skips them, which
//! makes an interrupted run resumable, and [`extend_grid`] adds block rows
//! and columns to a finished grid so the series can be continued.

mod schedule;
mod store;

use std::collections::HashSet;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use thiserror::Error;

pub use schedule::{BlockOp, BlockSchedule, OpKind};
pub use store::{Block, BlockStore, CrashPoint, JournalEntry, ResidencyProbe, RESIDENCY_LIMIT};

use crate::elim::{minor_row_from_l, ElimOptions, EliminationTrace, MinorSeries, MinorSink, Pivoting};
use crate::matrix::{MatrixBuffer, MatrixError};
use crate::scalar::{FloatScalar, Precision};

#[derive(Debug, Error)]
pub enum PagingError {
    #[error("zero pivot at step {step}")]
    ZeroPivot { step: usize },
    #[error("storage failure at {}: {source}", path.display())]
    Storage { path: PathBuf, source: io::Error },
    #[error("malformed file {}: {reason}", path.display())]
    BadBlockFile { path: PathBuf, reason: String },
    #[error("a store already exists in {}", .0.display())]
    AlreadyExists(PathBuf),
    #[error("matrix dimension {n} is not a positive multiple of block size {nb}")]
    BlockSize { n: usize, nb: usize },
    #[error("cannot extend: stage {stage} of the current grid is unfinished")]
    GridIncomplete { stage: usize },
    #[error("loading block {block:?} would exceed {RESIDENCY_LIMIT} resident blocks")]
    ResidencyExceeded { block: (bool, usize, usize) },
    #[error("run interrupted; the journal allows resuming")]
    Interrupted,
    #[error("paged mode does not support {0}")]
    Unsupported(&'static str),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("minor sink failed: {0}")]
    Sink(io::Error),
}

impl PagingError {
    pub(crate) fn storage(path: &Path, source: io::Error) -> Self {
        PagingError::Storage { path: path.to_path_buf(), source }
    }
}

/// Test hook: stop the run at a chosen point as if the process died.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fault {
    /// Operations allowed to complete in this run before the fault.
    pub after_ops: usize,
    /// `None` stops between operations; otherwise the next commit stops at
    /// the given point.
    pub point: Option<CrashPoint>,
}

#[derive(Debug, Clone, Default)]
pub struct PagedOptions {
    pub elim: ElimOptions,
    pub fault: Option<Fault>,
    /// Checked between operations; when set the run stops with `Interrupted`.
    pub cancel: Option<Arc<AtomicBool>>,
}

impl From<ElimOptions> for PagedOptions {
    fn from(elim: ElimOptions) -> Self {
        PagedOptions { elim, ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PagingStats {
    pub ops_run: usize,
    pub ops_skipped: usize,
    pub peak_resident_blocks: usize,
    pub loads: usize,
}

/// What a paged run produced, including partial results on failure.
#[derive(Debug)]
pub struct PagedOutcome<S> {
    pub trace: EliminationTrace<S>,
    pub stats: PagingStats,
    pub error: Option<PagingError>,
}

impl<S: FloatScalar> BlockStore<S> {
    /// Writes `a` into a new store under `dir` with blocks of `nb × nb`.
    pub fn create(dir: &Path, a: &MatrixBuffer<S>, nb: usize) -> Result<Self, PagingError> {
        a.common_precision()?;
        let n = a.dim();
        if nb == 0 || !n.is_multiple_of(nb) {
            return Err(PagingError::BlockSize { n, nb });
        }
        Self::create_with(dir, n / nb, nb, a.precision(), |i, j| a.get(i, j).clone())
    }

    /// Builds a store from an entry generator without materializing the
    /// matrix; `entry(i, j)` takes global 0-based indices.
    pub fn create_with(
        dir: &Path,
        blocks: usize,
        nb: usize,
        prec: Precision,
        mut entry: impl FnMut(usize, usize) -> S,
    ) -> Result<Self, PagingError> {
        if blocks == 0 || nb == 0 {
            return Err(PagingError::BlockSize { n: blocks * nb, nb });
        }
        if dir.join("store.meta").exists() {
            return Err(PagingError::AlreadyExists(dir.to_path_buf()));
        }
        let store = BlockStore::init(dir, blocks, nb, prec)?;
        store.fill(0, &mut entry)?;
        Ok(store)
    }

    /// Writes every `A` block with row or column index `>= from`, and the
    /// zero `L` blocks of block rows `>= from`.
    fn fill(&self, from: usize, entry: &mut impl FnMut(usize, usize) -> S) -> Result<(), PagingError> {
        let (b, nb) = (self.blocks(), self.block_dim());
        let zero = S::zero(self.precision());
        let l_zero = vec![zero; nb * nb];
        for bi in 0..b {
            for bj in 0..b {
                if bi < from && bj < from {
                    continue;
                }
                let data: Vec<S> = (0..nb * nb).map(|k| entry(bi * nb + k / nb, bj * nb + k % nb)).collect();
                self.put(false, bi, bj, &data)?;
            }
            if bi >= from {
                for bj in 0..=bi {
                    self.put(true, bi, bj, &l_zero)?;
                }
            }
        }
        Ok(())
    }

    /// Reads the `A` grid back into memory. After a completed run it holds
    /// the echelon form above the diagonal and multipliers below it.
    pub fn assemble(&self) -> Result<MatrixBuffer<S>, PagingError> {
        let (b, nb) = (self.blocks(), self.block_dim());
        let n = b * nb;
        let mut data = vec![S::zero(self.precision()); n * n];
        for bi in 0..b {
            for bj in 0..b {
                let blk = self.load(false, bi, bj)?;
                for r in 0..nb {
                    for c in 0..nb {
                        data[(bi * nb + r) * n + bj * nb + c] = blk.at(r, c).clone();
                    }
                }
            }
        }
        Ok(MatrixBuffer::from_data(n, data))
    }

    fn write_trace(&self, stage: usize, pivots: &[S], dets: &[S]) -> Result<(), PagingError> {
        let digits = self.precision().round_trip_digits();
        let mut text = format!("MPTRC 1 {stage} {} {} {}\n", pivots.len(), self.precision().bits(), S::KIND);
        for (p, d) in pivots.iter().zip(dets) {
            text.push_str(&p.to_decimal(digits));
            text.push('\n');
            text.push_str(&d.to_decimal(digits));
            text.push('\n');
        }
        store::write_durable(&self.trace_path(stage), text.as_bytes())
    }

    fn read_trace(&self, stage: usize, trace: &mut EliminationTrace<S>) -> Result<(), PagingError> {
        let path = self.trace_path(stage);
        let text = fs::read_to_string(&path).map_err(|e| PagingError::storage(&path, e))?;
        let bad = |reason: String| PagingError::BadBlockFile { path: path.clone(), reason };
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap_or("").split_whitespace().collect();
        let count = match header[..] {
            ["MPTRC", "1", s, count, _, _] if s == stage.to_string() => {
                count.parse::<usize>().map_err(|e| bad(e.to_string()))?
            }
            _ => return Err(bad("bad trace header".into())),
        };
        let values = lines
            .map(|l| S::parse_decimal(l, self.precision()).map_err(|e| bad(e.to_string())))
            .collect::<Result<Vec<S>, _>>()?;
        if values.len() != 2 * count {
            return Err(bad(format!("expected {count} pivots")));
        }
        for pair in values.chunks(2) {
            trace.pivots.push(pair[0].clone());
            trace.det_series.push(pair[1].clone());
        }
        Ok(())
    }
}

/// Runs (or resumes) the elimination of `store`, streaming minor rows of
/// each block row to `sink` once they are final.
///
/// Rows already emitted by an interrupted run are emitted again, so a
/// resumed run delivers the complete series. On a zero pivot only the block
/// rows completed before the failing stage have been emitted.
pub fn paged_eliminate_into<S: FloatScalar, K: MinorSink<S>>(
    store: &BlockStore<S>,
    opts: &PagedOptions,
    sink: &mut K,
) -> PagedOutcome<S> {
    let mut run = Run { store, opts, trace: EliminationTrace::new(), stats: PagingStats::default() };
    let error = run.execute(sink).err();
    let probe = store.probe();
    run.stats.peak_resident_blocks = probe.peak();
    run.stats.loads = probe.loads();
    PagedOutcome { trace: run.trace, stats: run.stats, error }
}

/// Trace, in-memory minors (when collected) and counters of a finished run.
pub type PagedResult<S> = (EliminationTrace<S>, Option<MinorSeries<S>>, PagingStats);

/// Convenience wrapper collecting the minors in memory.
pub fn paged_eliminate<S: FloatScalar>(
    store: &BlockStore<S>,
    opts: &PagedOptions,
) -> Result<PagedResult<S>, PagingError> {
    let mut series = MinorSeries::new(store.dim(), Some(store.precision()), None);
    let out = paged_eliminate_into(store, opts, &mut series);
    match out.error {
        Some(e) => Err(e),
        None => Ok((out.trace, opts.elim.collect_minors.then_some(series), out.stats)),
    }
}

/// Adds `extra` block rows and columns to a fully processed store. New
/// entries come from `entry(i, j)` with global indices; existing blocks are
/// kept, since later stages never modify them.
pub fn extend_grid<S: FloatScalar>(
    mut store: BlockStore<S>,
    extra: usize,
    mut entry: impl FnMut(usize, usize) -> S,
) -> Result<BlockStore<S>, PagingError> {
    if extra == 0 {
        return Ok(store);
    }
    let old = store.blocks();
    let done: HashSet<BlockOp> = store.journal()?.into_iter().map(|e| e.op).collect();
    if let Some(op) = BlockSchedule::new(old).ops.iter().find(|op| !op.kind.targets_l() && !done.contains(op)) {
        return Err(PagingError::GridIncomplete { stage: op.stage });
    }
    store.set_blocks(old + extra)?;
    store.fill(old, &mut entry)?;
    Ok(store)
}

struct Run<'a, S> {
    store: &'a BlockStore<S>,
    opts: &'a PagedOptions,
    trace: EliminationTrace<S>,
    stats: PagingStats,
}

impl<S: FloatScalar> Run<'_, S> {
    fn execute<K: MinorSink<S>>(&mut self, sink: &mut K) -> Result<(), PagingError> {
        let elim = &self.opts.elim;
        if elim.pivoting != Pivoting::None {
            return Err(PagingError::Unsupported("pivoting"));
        }
        if elim.limit_n.is_some() {
            return Err(PagingError::Unsupported("limit_n"));
        }
        let collect = elim.collect_minors;
        let done: HashSet<BlockOp> = self.store.journal()?.into_iter().map(|e| e.op).collect();
        let schedule = BlockSchedule::new(self.store.blocks());
        let mut ops = schedule.ops.iter().filter(|op| collect || !op.kind.targets_l()).peekable();
        while let Some(op) = ops.next() {
            if done.contains(op) {
                self.stats.ops_skipped += 1;
                if op.kind == OpKind::Pivot {
                    self.store.read_trace(op.stage, &mut self.trace)?;
                }
            } else {
                if self.opts.cancel.as_ref().is_some_and(|c| c.load(Ordering::SeqCst)) {
                    return Err(PagingError::Interrupted);
                }
                let crash = match self.opts.fault {
                    Some(f) if f.after_ops == self.stats.ops_run => match f.point {
                        None => return Err(PagingError::Interrupted),
                        Some(p) => Some(p),
                    },
                    _ => None,
                };
                self.apply(op, crash)?;
                self.stats.ops_run += 1;
            }
            let stage_ends = ops.peek().is_none_or(|next| next.stage != op.stage || next.kind == OpKind::LTrail);
            if collect && op.kind == OpKind::LDiag && stage_ends {
                self.emit_block_row(op.stage, sink)?;
            }
        }
        Ok(())
    }

    fn apply(&mut self, op: &BlockOp, crash: Option<CrashPoint>) -> Result<(), PagingError> {
        let store = self.store;
        let nb = store.block_dim();
        let mut target = store.load(op.kind.targets_l(), op.i, op.j)?;
        let inputs = op.inputs().into_iter().map(|(l, i, j)| store.load(l, i, j)).collect::<Result<Vec<_>, _>>()?;
        let mut scratch = S::zero(store.precision());
        let t = &mut target.data;
        match op.kind {
            OpKind::Pivot => {
                let base = op.stage * nb;
                let mut pivots = Vec::with_capacity(nb);
                let mut dets = Vec::with_capacity(nb);
                for i in 0..nb {
                    let pivot = t[i * nb + i].clone();
                    if pivot.is_zero() {
                        return Err(PagingError::ZeroPivot { step: base + i + 1 });
                    }
                    self.trace.push(pivot.clone());
                    pivots.push(pivot.clone());
                    dets.push(self.trace.det().expect("just pushed").clone());
                    let (head, tail) = t.split_at_mut((i + 1) * nb);
                    let prow = &head[i * nb..];
                    for row in tail.chunks_mut(nb) {
                        let z = row[i].div(&pivot);
                        for k in i + 1..nb {
                            row[k].sub_mul_assign(&z, &prow[k], &mut scratch);
                        }
                        row[i] = z;
                    }
                }
                store.write_trace(op.stage, &pivots, &dets)?;
            }
            OpKind::ColPanel => {
                let piv = &inputs[0].data;
                for i in 0..nb {
                    let pivot = &piv[i * nb + i];
                    for row in t.chunks_mut(nb) {
                        let z = row[i].div(pivot);
                        for k in i + 1..nb {
                            row[k].sub_mul_assign(&z, &piv[i * nb + k], &mut scratch);
                        }
                        row[i] = z;
                    }
                }
            }
            OpKind::RowPanel => {
                let piv = &inputs[0].data;
                for i in 0..nb {
                    let (head, tail) = t.split_at_mut((i + 1) * nb);
                    let prow = &head[i * nb..];
                    for (r, row) in tail.chunks_mut(nb).enumerate() {
                        let z = &piv[(i + 1 + r) * nb + i];
                        for k in 0..nb {
                            row[k].sub_mul_assign(z, &prow[k], &mut scratch);
                        }
                    }
                }
            }
            OpKind::Trailing => {
                let (left, top) = (&inputs[0].data, &inputs[1].data);
                for i in 0..nb {
                    for (r, row) in t.chunks_mut(nb).enumerate() {
                        let z = &left[r * nb + i];
                        for k in 0..nb {
                            row[k].sub_mul_assign(z, &top[i * nb + k], &mut scratch);
                        }
                    }
                }
            }
            OpKind::LDiag => {
                let piv = &inputs[0].data;
                let diag = op.j == op.stage;
                for i in 0..nb {
                    let width = if diag { i } else { nb };
                    let (head, tail) = t.split_at_mut((i + 1) * nb);
                    let prow = &head[i * nb..];
                    for (r, row) in tail.chunks_mut(nb).enumerate() {
                        let z = &piv[(i + 1 + r) * nb + i];
                        for k in 0..width {
                            row[k].sub_mul_assign(z, &prow[k], &mut scratch);
                        }
                        if diag {
                            row[i] = z.neg();
                        }
                    }
                }
            }
            OpKind::LTrail => {
                let (left, lpiv) = (&inputs[0].data, &inputs[1].data);
                let diag = op.j == op.stage;
                for i in 0..nb {
                    let width = if diag { i } else { nb };
                    for (r, row) in t.chunks_mut(nb).enumerate() {
                        let z = &left[r * nb + i];
                        for k in 0..width {
                            row[k].sub_mul_assign(z, &lpiv[i * nb + k], &mut scratch);
                        }
                        if diag {
                            row[i] = z.neg();
                        }
                    }
                }
            }
        }
        drop(inputs);
        store.commit(op, &target, crash)
    }

    /// Emits rows `n = S·N_b + 1 ..= (S+1)·N_b`, loading one `L` block at a
    /// time.
    fn emit_block_row<K: MinorSink<S>>(&mut self, stage: usize, sink: &mut K) -> Result<(), PagingError> {
        let store = self.store;
        let nb = store.block_dim();
        let n_eff = store.dim();
        for local in 0..nb {
            let r = stage * nb + local;
            let size = r + 1;
            if !self.opts.elim.wants_row(size, n_eff) {
                continue;
            }
            let mut l = Vec::with_capacity(r);
            for c in 0..=stage {
                let blk = store.load(true, stage, c)?;
                let width = if c == stage { local } else { nb };
                l.extend_from_slice(&blk.data[local * nb..local * nb + width]);
            }
            let det_prev = self.trace.det_leading(r).expect("pivot stage precedes emission");
            sink.accept(minor_row_from_l(size, &l, det_prev)).map_err(PagingError::Sink)?;
        }
        Ok(())
    }
}
