//! Gaussian elimination on `[A | I]` producing the determinant of every
//! leading submatrix and, for each size `n`, the cofactors of column `n` of
//! the leading `n × n` block.
//!
//! The factor `L` (with `L·A = U`) lives in the strict lower triangle of the
//! same buffer as `A`. Its row `n` is final once step `n-1` completes, and
//! because `L_n · A_n[:, j] = 0` for `j < n` while `L_n · A_n[:, n] = u_nn`,
//! scaling that row by `det(A_{n-1})` yields the column-`n` cofactors of
//! `A_n` in their true units:
//!
//! ```text
//! δ̃_{n,k} = det(A_{n-1}) · l_{n,k}    (l_{n,n} = 1, det(A_0) = 1)
//! ```
//!
//! `aux_diag[n-1]` holds that scale, i.e. the diagonal of `L` in cofactor
//! units. Minor rows are streamed to a [`MinorSink`] as soon as they are
//! final, so a full series for sizes up to `N` costs no more storage than the
//! matrix itself.

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::matrix::{Fingerprint, MatrixBuffer, MatrixError};
use crate::parexec::block_reassign_plan;
use crate::scalar::{DecodeError, FloatScalar, PrecReal, Precision, Scalar};

#[derive(Debug, Error)]
pub enum ElimError {
    /// The leading `step × step` submatrix is exactly singular.
    #[error("zero pivot at step {step}")]
    ZeroPivot { step: usize },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("partial pivoting permutes rows and cannot be combined with minor collection")]
    PivotingWithMinors,
    #[error("normalized minors undefined for n = {n}: leading signed minor is zero")]
    NormalizationUndefined { n: usize },
    #[error("size {n} is beyond the last completed step {last}")]
    StepOutOfRange { n: usize, last: usize },
    #[error("minor sink failed: {0}")]
    Sink(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pivoting {
    #[default]
    None,
    /// Row exchanges by largest magnitude; determinant only.
    Partial,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElimOptions {
    pub collect_minors: bool,
    /// Emit minors for every leading size rather than only the last one.
    pub series: bool,
    pub pivoting: Pivoting,
    /// Stop after the leading `limit_n × limit_n` block.
    pub limit_n: Option<usize>,
}

impl Default for ElimOptions {
    fn default() -> Self {
        ElimOptions { collect_minors: true, series: true, pivoting: Pivoting::None, limit_n: None }
    }
}

impl ElimOptions {
    pub fn determinant_only() -> Self {
        ElimOptions { collect_minors: false, series: false, ..Default::default() }
    }

    pub(crate) fn effective_n(&self, n: usize) -> usize {
        self.limit_n.map_or(n, |l| l.clamp(1, n))
    }

    pub(crate) fn wants_row(&self, size: usize, n_eff: usize) -> bool {
        self.collect_minors && size >= 2 && (self.series || size == n_eff)
    }
}

/// Pivots and running determinants, indexed from 0 (`det_series[m-1]` is the
/// determinant of the leading `m × m` block).
#[derive(Debug, Clone, PartialEq)]
pub struct EliminationTrace<S> {
    pub pivots: Vec<S>,
    pub det_series: Vec<S>,
    /// Number of row exchanges (partial pivoting only).
    pub swaps: usize,
}

impl<S: Scalar> EliminationTrace<S> {
    pub fn new() -> Self {
        EliminationTrace { pivots: Vec::new(), det_series: Vec::new(), swaps: 0 }
    }

    /// Last completed pivot step.
    pub fn step(&self) -> usize {
        self.pivots.len()
    }

    pub fn det(&self) -> Option<&S> {
        self.det_series.last()
    }

    /// Determinant of the leading `m × m` block (`m` counted from 1).
    pub fn det_leading(&self, m: usize) -> Option<&S> {
        m.checked_sub(1).and_then(|i| self.det_series.get(i))
    }

    /// Records pivot `p`; the running product is `det · p`.
    pub(crate) fn push(&mut self, pivot: S) {
        let det = match self.det_series.last() {
            Some(d) => d.mul(&pivot),
            None => pivot.clone(),
        };
        self.pivots.push(pivot);
        self.det_series.push(det);
    }

    /// `det(A_m)` for `m = step`, with `det(A_0) = 1`.
    pub(crate) fn running_det(&self, like: &S) -> S {
        self.det_series.last().cloned().unwrap_or_else(|| like.one_like())
    }
}

impl<S: Scalar> Default for EliminationTrace<S> {
    fn default() -> Self {
        Self::new()
    }
}

/// Signed and normalized column-`n` cofactors of the leading `n × n` block.
#[derive(Debug, Clone, PartialEq)]
pub struct MinorRow<S> {
    pub n: usize,
    pub signed: Vec<S>,
    /// `None` when `signed[0]` is zero.
    pub normalized: Option<Vec<S>>,
}

impl<S: Scalar> MinorRow<S> {
    pub fn new(n: usize, signed: Vec<S>) -> Self {
        let normalized = normalize_minors(&signed).ok();
        MinorRow { n, signed, normalized }
    }

    pub fn normalized(&self) -> Result<&[S], ElimError> {
        self.normalized.as_deref().ok_or(ElimError::NormalizationUndefined { n: self.n })
    }
}

/// Scales the final `L` row of size `n` into cofactor units.
///
/// `l_strict` holds `l_{n,1..n-1}`; `det_prev` is `det(A_{n-1})`.
pub(crate) fn minor_row_from_l<S: Scalar>(n: usize, l_strict: &[S], det_prev: &S) -> MinorRow<S> {
    debug_assert_eq!(l_strict.len(), n - 1);
    let mut signed: Vec<S> = l_strict.iter().map(|l| det_prev.mul(l)).collect();
    signed.push(det_prev.clone());
    MinorRow::new(n, signed)
}

/// `signed[k] / signed[0]`, with the first entry exactly one.
pub fn normalize_minors<S: Scalar>(signed: &[S]) -> Result<Vec<S>, ElimError> {
    let first = signed.first().ok_or(ElimError::NormalizationUndefined { n: 0 })?;
    if first.is_zero() {
        return Err(ElimError::NormalizationUndefined { n: signed.len() });
    }
    let mut out = Vec::with_capacity(signed.len());
    out.push(first.one_like());
    out.extend(signed[1..].iter().map(|x| x.div(first)));
    Ok(out)
}

/// Receives minor rows in increasing `n` as they become final.
pub trait MinorSink<S> {
    fn accept(&mut self, row: MinorRow<S>) -> io::Result<()>;
}

/// Discards every row.
pub struct NullSink;

impl<S> MinorSink<S> for NullSink {
    fn accept(&mut self, _row: MinorRow<S>) -> io::Result<()> {
        Ok(())
    }
}

impl<S> MinorSink<S> for Vec<MinorRow<S>> {
    fn accept(&mut self, row: MinorRow<S>) -> io::Result<()> {
        self.push(row);
        Ok(())
    }
}

/// Minor rows collected in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct MinorSeries<S> {
    pub rows: Vec<MinorRow<S>>,
    /// Dimension the run was asked to reach.
    pub target_n: usize,
    pub precision: Option<Precision>,
    pub source: Option<Fingerprint>,
}

impl<S: Scalar> MinorSeries<S> {
    pub fn new(target_n: usize, precision: Option<Precision>, source: Option<Fingerprint>) -> Self {
        MinorSeries { rows: Vec::new(), target_n, precision, source }
    }

    pub fn get(&self, n: usize) -> Option<&MinorRow<S>> {
        self.rows.binary_search_by_key(&n, |r| r.n).ok().map(|i| &self.rows[i])
    }

    pub fn last_n(&self) -> Option<usize> {
        self.rows.last().map(|r| r.n)
    }
}

impl<S> MinorSink<S> for MinorSeries<S> {
    fn accept(&mut self, row: MinorRow<S>) -> io::Result<()> {
        self.rows.push(row);
        Ok(())
    }
}

/// One elimination update of row `j` against pivot row `i`.
///
/// `row[i]` enters holding `a_{ji}` and leaves holding `l_{ji} = -z`; the
/// echelon part `i+1..end` and, when collecting, the `L` part `0..i` are
/// reduced by `z` times the pivot row.
pub(crate) fn eliminate_row<S: Scalar>(
    row: &mut [S],
    pivot_row: &[S],
    pivot: &S,
    i: usize,
    end: usize,
    collect: bool,
    scratch: &mut S,
) {
    let z = row[i].div(pivot);
    for k in i + 1..end {
        row[k].sub_mul_assign(&z, &pivot_row[k], scratch);
    }
    if collect {
        for k in 0..i {
            row[k].sub_mul_assign(&z, &pivot_row[k], scratch);
        }
    }
    row[i] = z.neg();
}

/// Result of a completed elimination.
#[derive(Debug, Clone)]
pub struct Elimination<S> {
    pub trace: EliminationTrace<S>,
    pub minors: Option<MinorSeries<S>>,
    /// The buffer after elimination: echelon form on and above the diagonal,
    /// `L` below it (or negated multipliers for determinant-only runs).
    pub factor: MatrixBuffer<S>,
}

/// Runs the whole elimination in memory.
///
/// A zero pivot aborts with [`ElimError::ZeroPivot`]; use [`Eliminator`]
/// directly to keep the partial trace and the rows emitted before it.
pub fn eliminate<S: Scalar>(a: MatrixBuffer<S>, opts: &ElimOptions) -> Result<Elimination<S>, ElimError> {
    let mut el = Eliminator::new(a, opts.clone())?;
    let mut series = el.new_series();
    el.run(&mut series)?;
    let (factor, trace) = el.into_parts();
    let minors = opts.collect_minors.then_some(series);
    Ok(Elimination { trace, minors, factor })
}

/// Resumable single-threaded elimination.
pub struct Eliminator<S> {
    buf: MatrixBuffer<S>,
    opts: ElimOptions,
    n_eff: usize,
    trace: EliminationTrace<S>,
    scratch: S,
    threads: usize,
}

impl<S: Scalar> Eliminator<S> {
    pub fn new(a: MatrixBuffer<S>, opts: ElimOptions) -> Result<Self, ElimError> {
        if opts.collect_minors && opts.pivoting == Pivoting::Partial {
            return Err(ElimError::PivotingWithMinors);
        }
        a.common_precision()?;
        let n_eff = opts.effective_n(a.dim());
        let scratch = a.get(0, 0).zero_like();
        Ok(Eliminator { buf: a, opts, n_eff, trace: EliminationTrace::new(), scratch, threads: 1 })
    }

    /// Splits each step's row updates over `threads` scoped threads, in
    /// contiguous blocks reassigned at every step. Results do not depend on
    /// the thread count.
    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads.max(1);
        self
    }

    pub fn options(&self) -> &ElimOptions {
        &self.opts
    }

    pub fn effective_n(&self) -> usize {
        self.n_eff
    }

    pub fn completed_steps(&self) -> usize {
        self.trace.step()
    }

    pub fn is_done(&self) -> bool {
        self.trace.step() >= self.n_eff
    }

    pub fn trace(&self) -> &EliminationTrace<S> {
        &self.trace
    }

    pub fn buffer(&self) -> &MatrixBuffer<S> {
        &self.buf
    }

    pub fn into_parts(self) -> (MatrixBuffer<S>, EliminationTrace<S>) {
        (self.buf, self.trace)
    }

    /// Empty series tagged with this run's size, precision and source.
    pub fn new_series(&self) -> MinorSeries<S> {
        MinorSeries::new(self.n_eff, self.buf.get(0, 0).precision(), self.buf.source_fingerprint())
    }

    pub fn run<K: MinorSink<S>>(&mut self, sink: &mut K) -> Result<(), ElimError> {
        while self.step_once(sink)? {}
        Ok(())
    }

    /// Performs one pivot step; returns whether more steps remain.
    pub fn step_once<K: MinorSink<S>>(&mut self, sink: &mut K) -> Result<bool, ElimError> {
        let i = self.trace.step();
        let m = self.n_eff;
        if i >= m {
            return Ok(false);
        }
        let collect = self.opts.collect_minors;
        let (n, data, aux) = self.buf.parts_mut();

        let mut swapped = false;
        if self.opts.pivoting == Pivoting::Partial {
            let best = (i + 1..m).fold(i, |best, r| {
                if data[r * n + i].cmp_magnitude(&data[best * n + i]).is_gt() {
                    r
                } else {
                    best
                }
            });
            if best != i {
                for k in 0..n {
                    data.swap(i * n + k, best * n + k);
                }
                swapped = true;
            }
        }

        let pivot = data[i * n + i].clone();
        if pivot.is_zero() {
            return Err(ElimError::ZeroPivot { step: i + 1 });
        }
        self.trace.push(pivot.clone());
        if swapped {
            // Each exchange flips the sign of the running determinant.
            self.trace.swaps += 1;
            let d = self.trace.det_series.pop().expect("just pushed");
            self.trace.det_series.push(d.neg());
        }

        let (head, tail) = data.split_at_mut((i + 1) * n);
        let pivot_row = &head[i * n..];
        let below = &mut tail[..(m - i - 1) * n];
        if self.threads > 1 && m - i - 1 > 1 {
            let plan = block_reassign_plan(i + 1..m, self.threads);
            let pivot = &pivot;
            std::thread::scope(|s| {
                let mut rest = below;
                for block in plan {
                    let (chunk, next) = rest.split_at_mut(block.len() * n);
                    rest = next;
                    s.spawn(move || {
                        let mut scratch = pivot.zero_like();
                        for row in chunk.chunks_mut(n) {
                            eliminate_row(row, pivot_row, pivot, i, m, collect, &mut scratch);
                        }
                    });
                }
            });
        } else {
            for row in below.chunks_mut(n) {
                eliminate_row(row, pivot_row, &pivot, i, m, collect, &mut self.scratch);
            }
        }

        let size = i + 2;
        if size <= m {
            let det = self.trace.running_det(&pivot);
            if self.opts.wants_row(size, m) {
                let r = size - 1;
                sink.accept(minor_row_from_l(size, &data[r * n..r * n + r], &det))?;
            }
            aux[size - 1] = det;
        }
        Ok(i + 1 < m)
    }
}

/// `|Σ_k δ̃_{n,k}·a_{k,n} − det(A_n)| / |det(A_n)|` for the original matrix `a`.
pub fn laplace_residual<S: FloatScalar>(
    n: usize,
    a: &MatrixBuffer<S>,
    series: &MinorSeries<S>,
    trace: &EliminationTrace<S>,
) -> Result<PrecReal, ElimError> {
    let last = trace.step();
    let det = trace.det_leading(n).ok_or(ElimError::StepOutOfRange { n, last })?;
    let row = series.get(n).ok_or(ElimError::StepOutOfRange { n, last })?;
    let mut sum = det.zero_like();
    for (k, minor) in row.signed.iter().enumerate() {
        sum = sum.add(&minor.mul(a.get(k, n - 1)));
    }
    let gap = sum.sub(det).modulus();
    Ok(gap.div(&det.modulus()))
}

const SNAPSHOT_MAGIC: &[u8; 4] = b"MPCK";
const SNAPSHOT_VERSION: u8 = 1;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("not an elimination snapshot")]
    BadMagic,
    #[error("unsupported snapshot version {0}")]
    BadVersion(u8),
    #[error("snapshot holds {found} scalars, expected {expected}")]
    KindMismatch { expected: &'static str, found: &'static str },
    #[error("corrupt snapshot: {0}")]
    Corrupt(#[from] DecodeError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Elim(#[from] ElimError),
}

impl<S: FloatScalar> Eliminator<S> {
    /// Serializes the complete state so a run can resume bit-identically.
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> Result<(), SnapshotError> {
        let n = self.buf.dim();
        let mut out = Vec::new();
        out.extend_from_slice(SNAPSHOT_MAGIC);
        out.push(SNAPSHOT_VERSION);
        out.push(S::KIND.tag());
        let flags = u8::from(self.opts.collect_minors)
            | u8::from(self.opts.series) << 1
            | u8::from(self.opts.pivoting == Pivoting::Partial) << 2;
        out.push(flags);
        for v in [n, self.n_eff, self.trace.step(), self.trace.swaps] {
            out.extend_from_slice(&(v as u64).to_le_bytes());
        }
        out.extend_from_slice(&self.buf.precision().bits().to_le_bytes());
        match self.buf.source_fingerprint() {
            Some(fp) => {
                out.push(1);
                out.extend_from_slice(&fp.0);
            }
            None => out.push(0),
        }
        let trace = &self.trace;
        for x in self.buf.data().iter().chain(self.buf.aux_diag()).chain(&trace.pivots).chain(&trace.det_series) {
            x.encode(&mut out);
        }
        w.write_all(&out)?;
        Ok(())
    }

    pub fn read_snapshot<R: Read>(mut r: R) -> Result<Self, SnapshotError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let mut input = bytes.as_slice();
        let mut take = |len: usize| -> Result<&[u8], SnapshotError> {
            if input.len() < len {
                return Err(DecodeError::Truncated.into());
            }
            let (h, t) = input.split_at(len);
            input = t;
            Ok(h)
        };
        if take(4)? != SNAPSHOT_MAGIC {
            return Err(SnapshotError::BadMagic);
        }
        let version = take(1)?[0];
        if version != SNAPSHOT_VERSION {
            return Err(SnapshotError::BadVersion(version));
        }
        let kind = take(1)?[0];
        if kind != S::KIND.tag() {
            let name = |t: u8| if t == 0 { "real" } else { "complex" };
            return Err(SnapshotError::KindMismatch { expected: name(S::KIND.tag()), found: name(kind) });
        }
        let flags = take(1)?[0];
        let mut word = || -> Result<usize, SnapshotError> {
            Ok(u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize)
        };
        let (n, n_eff, step, swaps) = (word()?, word()?, word()?, word()?);
        let bits = u32::from_le_bytes(take(4)?.try_into().unwrap());
        let source = match take(1)?[0] {
            0 => None,
            _ => Some(Fingerprint(take(32)?.try_into().unwrap())),
        };
        let prec = Precision::new(bits).map_err(|_| DecodeError::Truncated)?;
        let mut scalars = |count: usize| -> Result<Vec<S>, SnapshotError> {
            (0..count).map(|_| S::decode(&mut input, prec).map_err(SnapshotError::from)).collect()
        };
        let data = scalars(n * n)?;
        let aux = scalars(n)?;
        let pivots = scalars(step)?;
        let det_series = scalars(step)?;
        let mut buf = MatrixBuffer::from_data(n, data);
        buf.parts_mut().2.clone_from_slice(&aux);
        buf.set_source_fingerprint(source);
        let opts = ElimOptions {
            collect_minors: flags & 1 != 0,
            series: flags & 2 != 0,
            pivoting: if flags & 4 != 0 { Pivoting::Partial } else { Pivoting::None },
            limit_n: (n_eff < n).then_some(n_eff),
        };
        let mut el = Eliminator::new(buf, opts)?;
        el.trace = EliminationTrace { pivots, det_series, swaps };
        Ok(el)
    }
}
