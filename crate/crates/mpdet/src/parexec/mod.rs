//! Deterministic parallel elimination.
//!
//! Rows are owned cyclically: worker `j` holds rows `j, j+T, j+2T, …`. At
//! step `i` the owner of row `i` sends that row, unnormalized, together with
//! the running determinant; the coordinator broadcasts it to every worker
//! (the owner included), and each worker applies it to its rows below `i`
//! in increasing order. Every entry sees the same operations in the same
//! order as in [`crate::elim::eliminate`], so results are bit-identical for
//! any `T`.

mod transport;
pub mod wire;
mod worker;

use std::collections::{BTreeMap, VecDeque};
use std::io;
use std::ops::Range;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::mpsc;
use std::sync::Arc;

use thiserror::Error;

use crate::elim::{ElimError, ElimOptions, EliminationTrace, MinorRow, MinorSeries, MinorSink, Pivoting};
use crate::matrix::MatrixBuffer;
use crate::scalar::FloatScalar;
use transport::{spawn_process, ChannelLink, Down, Endpoint, Setup, Up, WorkerLink};
pub use wire::{pack_row, unpack_row, WireError};
pub use worker::run_worker_stdio;

#[derive(Debug, Error)]
pub enum ParError {
    #[error("zero pivot at step {step}")]
    ZeroPivot { step: usize },
    #[error("worker {worker} failed: {reason}")]
    WorkerFailure { worker: usize, reason: String },
    #[error("worker count must be at least 1")]
    NoWorkers,
    #[error("the parallel executor does not pivot")]
    PivotingUnsupported,
    #[error(transparent)]
    Elim(#[from] ElimError),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error("transport: {0}")]
    Io(#[from] io::Error),
}

/// Cyclic row ownership over `T` workers, 1-based as rows are numbered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WorkerTopology {
    workers: usize,
}

impl WorkerTopology {
    pub fn new(workers: usize) -> Result<Self, ParError> {
        if workers == 0 {
            return Err(ParError::NoWorkers);
        }
        Ok(WorkerTopology { workers })
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// `((r-1) mod T) + 1`.
    pub fn owner(&self, row: usize) -> usize {
        (row - 1) % self.workers + 1
    }

    /// Rows `j, j+T, …` up to `n`.
    pub fn rows_of(&self, worker: usize, n: usize) -> Vec<usize> {
        (worker..=n).step_by(self.workers).collect()
    }

    /// Rows each worker updates at step `step` (rows `step+1..=n`).
    pub fn updates_at(&self, step: usize, n: usize) -> Vec<usize> {
        let mut counts = vec![0; self.workers];
        for r in step + 1..=n {
            counts[self.owner(r) - 1] += 1;
        }
        counts
    }

    /// Rounds a binomial-tree broadcast needs to reach every worker.
    pub fn fanout_rounds(&self) -> u32 {
        usize::BITS - (self.workers - 1).leading_zeros()
    }
}

/// Transfer accounting for one run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CommStats {
    pub broadcasts: usize,
    pub bytes_total: usize,
    pub per_step_bytes: Vec<usize>,
    pub per_step_scalars: Vec<usize>,
    pub fanout_rounds: u32,
    /// `broadcasts · fanout_rounds`, the `log T` factor of the transfer cost.
    pub hops_total: usize,
    /// Largest spread of rows updated per worker over all steps.
    pub max_imbalance: usize,
}

impl CommStats {
    pub fn scalars_total(&self) -> usize {
        self.per_step_scalars.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Transport {
    /// Worker threads linked by channels.
    #[default]
    InProcess,
    /// One `<exe> worker` process per worker, framed over stdio.
    Process { exe: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParConfig {
    pub workers: usize,
    pub transport: Transport,
    /// Test hook: `(worker, step)` makes that worker fail on that step's
    /// broadcast (both 1-based).
    pub fail_at: Option<(usize, usize)>,
}

impl ParConfig {
    pub fn new(workers: usize) -> Self {
        ParConfig { workers, transport: Transport::InProcess, fail_at: None }
    }
}

/// Whatever a run produced, including a partial trace after an abort.
#[derive(Debug)]
pub struct ParOutcome<S> {
    pub trace: EliminationTrace<S>,
    pub stats: CommStats,
    pub error: Option<ParError>,
}

#[derive(Debug, Clone)]
pub struct ParOutput<S> {
    pub trace: EliminationTrace<S>,
    pub minors: Option<MinorSeries<S>>,
    pub stats: CommStats,
}

/// Runs the elimination on `cfg.workers` workers, collecting minors in memory.
pub fn par_eliminate<S: FloatScalar>(a: &MatrixBuffer<S>, cfg: &ParConfig, opts: &ElimOptions) -> Result<ParOutput<S>, ParError> {
    let mut series = MinorSeries::new(opts.effective_n(a.dim()), Some(a.precision()), a.source_fingerprint());
    let out = par_eliminate_into(a, cfg, opts, &mut series);
    if let Some(e) = out.error {
        return Err(e);
    }
    let minors = opts.collect_minors.then_some(series);
    Ok(ParOutput { trace: out.trace, minors, stats: out.stats })
}

/// Streams minor rows to `sink` in increasing `n`.
pub fn par_eliminate_into<S: FloatScalar, K: MinorSink<S>>(
    a: &MatrixBuffer<S>,
    cfg: &ParConfig,
    opts: &ElimOptions,
    sink: &mut K,
) -> ParOutcome<S> {
    let mut trace = EliminationTrace::new();
    let mut stats = CommStats::default();
    let error = Coordinator::run(a, cfg, opts, sink, &mut trace, &mut stats).err();
    ParOutcome { trace, stats, error }
}

struct Coordinator {
    endpoints: Vec<Endpoint>,
    up: mpsc::Receiver<(usize, Up)>,
}

impl Coordinator {
    fn run<S: FloatScalar, K: MinorSink<S>>(
        a: &MatrixBuffer<S>,
        cfg: &ParConfig,
        opts: &ElimOptions,
        sink: &mut K,
        trace: &mut EliminationTrace<S>,
        stats: &mut CommStats,
    ) -> Result<(), ParError> {
        if opts.pivoting != Pivoting::None {
            return Err(if opts.collect_minors { ElimError::PivotingWithMinors.into() } else { ParError::PivotingUnsupported });
        }
        a.common_precision().map_err(ElimError::from)?;
        let topo = WorkerTopology::new(cfg.workers)?;
        let mut coord = Coordinator::start::<S>(cfg)?;
        let result = coord.drive(a, &topo, cfg, opts, sink, trace, stats);
        coord.shutdown(result.is_ok());
        result
    }

    fn start<S: FloatScalar>(cfg: &ParConfig) -> Result<Self, ParError> {
        let (up_tx, up) = mpsc::channel();
        let mut endpoints = Vec::with_capacity(cfg.workers);
        for id in 0..cfg.workers {
            let ep = match &cfg.transport {
                Transport::InProcess => {
                    let (tx, rx) = mpsc::channel();
                    let mut link = ChannelLink { id, rx, tx: up_tx.clone() };
                    let handle = std::thread::Builder::new()
                        .name(format!("mpdet-worker-{}", id + 1))
                        .spawn(move || {
                            let Some(Down::Setup(setup)) = link.recv() else { return };
                            let run = catch_unwind(AssertUnwindSafe(|| worker::serve::<S, _>(setup, &mut link, &|_| {})));
                            if run.is_err() {
                                link.send(Up::Failed("worker panicked".into()));
                            }
                        })?;
                    Endpoint::Thread { tx, handle: Some(handle) }
                }
                Transport::Process { exe } => spawn_process(exe, id, up_tx.clone())?,
            };
            endpoints.push(ep);
        }
        Ok(Coordinator { endpoints, up })
    }

    #[allow(clippy::too_many_arguments)]
    fn drive<S: FloatScalar, K: MinorSink<S>>(
        &mut self,
        a: &MatrixBuffer<S>,
        topo: &WorkerTopology,
        cfg: &ParConfig,
        opts: &ElimOptions,
        sink: &mut K,
        trace: &mut EliminationTrace<S>,
        stats: &mut CommStats,
    ) -> Result<(), ParError> {
        let n = a.dim();
        let m = opts.effective_n(n);
        let t = topo.workers();
        let prec = a.precision();
        stats.fanout_rounds = topo.fanout_rounds();
        stats.max_imbalance = (1..=m)
            .map(|s| {
                let c = topo.updates_at(s, m);
                c.iter().max().unwrap() - c.iter().min().unwrap()
            })
            .max()
            .unwrap_or(0);

        for (id, ep) in self.endpoints.iter_mut().enumerate() {
            let setup = Setup {
                worker: id as u32,
                workers: t as u32,
                n: n as u32,
                n_eff: m as u32,
                prec_bits: prec.bits(),
                kind: S::KIND,
                collect: opts.collect_minors,
                series: opts.series,
                fail_at: cfg.fail_at.filter(|&(w, _)| w == id + 1).map(|(_, s)| s.saturating_sub(1) as u32),
            };
            let rows = (id..m).step_by(t).map(|r| (r as u32, pack_row(r as u32, &a.row(r)[..m]))).collect();
            let sent = ep.send(Down::Setup(setup)).and_then(|()| ep.send(Down::Rows(rows)));
            sent.map_err(|e| ParError::WorkerFailure { worker: id + 1, reason: e.to_string() })?;
        }

        let mut pending = Reorder::new(opts, m);
        for i in 0..m {
            let payload = loop {
                match self.next_message()? {
                    (_, Up::Pivot(bytes)) => break bytes,
                    (_, Up::Minor(bytes)) => pending.insert(unpack_row::<S>(&bytes, prec)?, sink)?,
                    (_, Up::ZeroPivot(s)) => return Err(ParError::ZeroPivot { step: s as usize + 1 }),
                    (j, Up::Done) => return Err(protocol(j, "finished early")),
                    (j, Up::Failed(reason)) => return Err(ParError::WorkerFailure { worker: j + 1, reason }),
                }
            };
            let (step, seg) = unpack_row::<S>(&payload, prec)?;
            if step as usize != i {
                return Err(protocol(topo.owner(i + 1) - 1, "pivot for the wrong step"));
            }
            let at = if opts.collect_minors { i } else { 0 };
            trace.pivots.push(seg[at].clone());
            trace.det_series.push(seg.last().expect("pivot payload carries det").clone());
            stats.broadcasts += 1;
            stats.bytes_total += payload.len();
            stats.per_step_bytes.push(payload.len());
            stats.per_step_scalars.push(seg.len());
            stats.hops_total += stats.fanout_rounds as usize;
            let shared: Arc<[u8]> = payload.into();
            for (j, ep) in self.endpoints.iter_mut().enumerate() {
                ep.send(Down::Broadcast(shared.clone()))
                    .map_err(|e| ParError::WorkerFailure { worker: j + 1, reason: e.to_string() })?;
            }
        }
        let mut done = 0;
        while done < t {
            match self.next_message()? {
                (_, Up::Done) => done += 1,
                (_, Up::Minor(bytes)) => pending.insert(unpack_row::<S>(&bytes, prec)?, sink)?,
                (j, Up::Failed(reason)) => return Err(ParError::WorkerFailure { worker: j + 1, reason }),
                (j, _) => return Err(protocol(j, "unexpected message after the last step")),
            }
        }
        debug_assert!(pending.is_empty());
        Ok(())
    }

    fn next_message(&self) -> Result<(usize, Up), ParError> {
        self.up.recv().map_err(|_| ParError::WorkerFailure { worker: 0, reason: "all workers disconnected".into() })
    }

    fn shutdown(self, ok: bool) {
        let msg = if ok { Down::Finish } else { Down::Abort };
        let mut endpoints = self.endpoints;
        for ep in &mut endpoints {
            let _ = ep.send(msg.clone());
        }
        drop(self.up);
        for ep in endpoints {
            ep.close(!ok);
        }
    }
}

fn protocol(worker: usize, what: &str) -> ParError {
    ParError::WorkerFailure { worker: worker + 1, reason: format!("protocol violation: {what}") }
}

/// Buffers minor rows until every smaller size has been delivered.
struct Reorder<S> {
    expected: VecDeque<usize>,
    held: BTreeMap<usize, MinorRow<S>>,
}

impl<S: FloatScalar> Reorder<S> {
    fn new(opts: &ElimOptions, m: usize) -> Self {
        let expected = (2..=m).filter(|&size| opts.wants_row(size, m)).collect();
        Reorder { expected, held: BTreeMap::new() }
    }

    fn insert<K: MinorSink<S>>(&mut self, (n, signed): (u32, Vec<S>), sink: &mut K) -> Result<(), ParError> {
        self.held.insert(n as usize, MinorRow::new(n as usize, signed));
        while let Some(row) = self.expected.front().and_then(|n| self.held.remove(n)) {
            self.expected.pop_front();
            sink.accept(row).map_err(ElimError::from)?;
        }
        Ok(())
    }

    fn is_empty(&self) -> bool {
        self.held.is_empty()
    }
}

/// Balanced contiguous split of `rows` into at most `workers` blocks, larger
/// blocks first.
pub fn block_reassign_plan(rows: Range<usize>, workers: usize) -> Vec<Range<usize>> {
    let len = rows.len();
    let workers = workers.max(1).min(len);
    if len == 0 {
        return Vec::new();
    }
    let (base, extra) = (len / workers, len % workers);
    let mut start = rows.start;
    (0..workers)
        .map(|w| {
            let size = base + usize::from(w < extra);
            let r = start..start + size;
            start += size;
            r
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_examples() {
        let sizes = |v: Vec<Range<usize>>| v.iter().map(|r| r.len()).collect::<Vec<_>>();
        assert_eq!(sizes(block_reassign_plan(5..15, 3)), vec![4, 3, 3]);
        assert_eq!(block_reassign_plan(5..15, 3)[0], 5..9);
        assert_eq!(block_reassign_plan(0..7, 1), vec![0..7]);
        assert!(block_reassign_plan(4..4, 3).is_empty());
        assert_eq!(sizes(block_reassign_plan(0..2, 4)), vec![1, 1]);
    }

    #[test]
    fn topology() {
        let t = WorkerTopology::new(3).unwrap();
        assert_eq!((1..=7).map(|r| t.owner(r)).collect::<Vec<_>>(), vec![1, 2, 3, 1, 2, 3, 1]);
        assert_eq!(t.rows_of(2, 10), vec![2, 5, 8]);
        assert_eq!(t.updates_at(1, 10), vec![3, 3, 3]);
        assert_eq!(WorkerTopology::new(8).unwrap().fanout_rounds(), 3);
        assert_eq!(WorkerTopology::new(5).unwrap().fanout_rounds(), 3);
        assert_eq!(WorkerTopology::new(1).unwrap().fanout_rounds(), 0);
        assert!(matches!(WorkerTopology::new(0), Err(ParError::NoWorkers)));
    }
}
