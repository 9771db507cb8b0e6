//! The `mpdet` command line.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 2 | usage error |
//! | 3 | malformed input file |
//! | 4 | zero pivot |
//! | 5 | matrix generation failed |
//! | 6 | oracle mismatch |
//! | 7 | series mismatch |
//! | 8 | I/O failure |
//! | 9 | worker failure |
//! | 10 | interrupted (resumable) |
//! | 11 | insufficient data for a fit |
//! | 12 | invalid configuration |

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, OnceLock};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::bench::run_grid;
use crate::elim::{ElimError, ElimOptions, EliminationTrace, Eliminator, MinorRow, MinorSeries, MinorSink, Pivoting, SnapshotError};
use crate::format::{load_matrix, save_matrix, FormatError};
use crate::gamma::Spouge;
use crate::genmat::{beta_matrix, load_zeros, power_matrix, synth_matrix, Family, GenError};
use crate::matrix::{AnyMatrix, Fingerprint, MatrixBuffer};
use crate::oracle::{cofactors_of_column, det_cofactor, det_condensation, Condensation, OracleError, RationalMatrix};
use crate::paging::{extend_grid, paged_eliminate_into, BlockStore, PagedOptions, PagingError};
use crate::parexec::{par_eliminate_into, ParConfig, ParError, Transport};
use crate::scalar::{agree_digits, FloatScalar, Kind, PrecComplex, PrecReal, Precision, Scalar, ScalarError};
use crate::study::{digit_agreement, fit_decay, run_study, write_csv, write_fit, StudyError};

/// Largest leading size cross-checked by `--oracle`.
pub const ORACLE_MAX_N: usize = 8;

#[derive(Debug, Parser)]
#[command(name = "mpdet", version, about = "Arbitrary-precision determinants and minor series")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a generated matrix as an MPMAT file.
    Gen(GenArgs),
    /// Determinant of the input (or of every leading block with --series).
    Det(DetArgs),
    /// Determinants and signed/normalized minors for every leading size.
    Minors(MinorsArgs),
    /// Digit agreement between two precisions and its linear fit.
    Study(StudyArgs),
    /// Wall-time table over sizes, precisions and worker counts.
    Bench(BenchArgs),
    /// Cross-check elimination against the exact and condensation oracles.
    Verify(VerifyArgs),
    #[command(hide = true)]
    Worker,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum GenFamily {
    Hilbert,
    RandomUniform,
    RandomIllcond,
    /// Conjugate-pair power matrix from zeta zeros, `N = 2M+1`.
    Power,
    /// `β_i(γ_j)` interpolation matrix from zeta zeros.
    Beta,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    pub family: GenFamily,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 256)]
    pub prec_bits: u32,
    /// Zeros file (one imaginary part per line) for `power` and `beta`.
    #[arg(long)]
    pub zeros: Option<PathBuf>,
    /// Precision at which zeros are read; defaults to --prec-bits.
    #[arg(long)]
    pub zeros_prec_bits: Option<u32>,
    #[arg(long)]
    pub m: Option<usize>,
    /// Parameter of the last power-matrix column.
    #[arg(long, default_value = "0")]
    pub t: String,
    /// Output file; stdout when absent.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum PivotMode {
    #[default]
    None,
    Partial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum TransportMode {
    #[default]
    Thread,
    Process,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    pub input: PathBuf,
    /// Working precision; the file's precision when absent.
    #[arg(long)]
    pub prec_bits: Option<u32>,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long, value_enum, default_value_t)]
    pub transport: TransportMode,
    /// Block size for out-of-core mode; 0 keeps the matrix in memory.
    #[arg(long, default_value_t = 0)]
    pub block_size: usize,
    #[arg(long)]
    pub paging_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    pub pivot: PivotMode,
    #[arg(long)]
    pub limit_n: Option<usize>,
    /// Significant digits in the output; `floor(prec_bits·log10 2)` by default.
    #[arg(long)]
    pub digits: Option<usize>,
    /// Cross-check sizes up to 8 against the oracles.
    #[arg(long)]
    pub oracle: bool,
}

#[derive(Debug, Args)]
pub struct DetArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Print the determinant of every leading block.
    #[arg(long)]
    pub series: bool,
}

#[derive(Debug, Args)]
pub struct MinorsArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Output directory for `dets.txt` and `minors_<n>.txt`.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Only emit minors for the final size.
    #[arg(long)]
    pub final_only: bool,
    /// Snapshot file for in-memory runs; an existing snapshot is resumed.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Pivot steps between snapshots (0 = only on interrupt).
    #[arg(long, default_value_t = 0)]
    pub checkpoint_every: usize,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    /// MPMAT input, rounded to both precisions.
    #[arg(required_unless_present = "compare")]
    pub input: Option<PathBuf>,
    /// Compare two existing `minors` output directories instead.
    #[arg(long, num_args = 2, value_names = ["LO_DIR", "HI_DIR"], conflicts_with = "input")]
    pub compare: Option<Vec<PathBuf>>,
    #[arg(long, default_value_t = 1024)]
    pub lo_bits: u32,
    #[arg(long, default_value_t = 4096)]
    pub hi_bits: u32,
    #[arg(long)]
    pub limit_n: Option<usize>,
    #[arg(long, default_value_t = 2)]
    pub n_min: usize,
    #[arg(long)]
    pub n_max: Option<usize>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Fit summary destination; stderr when absent.
    #[arg(long)]
    pub fit: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [32usize, 64])]
    pub sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [256u32, 512])]
    pub precs: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_values_t = [1usize])]
    pub workers: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub prec_bits: Option<u32>,
    /// Required agreement in decimal digits; half the working digits by default.
    #[arg(long)]
    pub min_digits: Option<u64>,
    /// Largest leading size checked against the exact oracle.
    #[arg(long, default_value_t = ORACLE_MAX_N)]
    pub max_n: usize,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Elim(#[from] ElimError),
    #[error(transparent)]
    Par(#[from] ParError),
    #[error(transparent)]
    Paging(#[from] PagingError),
    #[error(transparent)]
    Study(#[from] StudyError),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("oracle mismatch: {0}")]
    OracleMismatch(String),
    #[error("{0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("interrupted; rerun the same command to resume")]
    Interrupted,
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl From<ScalarError> for CliError {
    fn from(e: ScalarError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Format(FormatError::Io(_)) | CliError::Gen(GenError::Io(_)) | CliError::Io(_) => 8,
            CliError::Format(_) | CliError::Parse(_) => 3,
            CliError::Gen(GenError::Parse { .. } | GenError::NotMonotone { .. }) => 3,
            CliError::Gen(_) => 5,
            CliError::Elim(e) => elim_code(e),
            CliError::Par(e) => match e {
                ParError::ZeroPivot { .. } => 4,
                ParError::WorkerFailure { .. } | ParError::NoWorkers | ParError::Wire(_) => 9,
                ParError::PivotingUnsupported => 12,
                ParError::Elim(e) => elim_code(e),
                ParError::Io(_) => 8,
            },
            CliError::Paging(e) => match e {
                PagingError::ZeroPivot { .. } => 4,
                PagingError::Storage { .. } | PagingError::Sink(_) => 8,
                PagingError::BadBlockFile { .. } | PagingError::Matrix(_) => 3,
                PagingError::Interrupted => 10,
                PagingError::AlreadyExists(_)
                | PagingError::BlockSize { .. }
                | PagingError::GridIncomplete { .. }
                | PagingError::ResidencyExceeded { .. }
                | PagingError::Unsupported(_) => 12,
            },
            CliError::Study(e) => match e {
                StudyError::SeriesMismatch(_) => 7,
                StudyError::InsufficientData { .. } => 11,
                StudyError::PrecisionOrder { .. } | StudyError::SourcePrecision { .. } => 12,
                StudyError::Elim(e) => elim_code(e),
                StudyError::Io(_) => 8,
            },
            CliError::Snapshot(SnapshotError::Io(_)) => 8,
            CliError::Snapshot(_) => 3,
            CliError::Oracle(_) | CliError::Config(_) => 12,
            CliError::OracleMismatch(_) => 6,
            CliError::Interrupted => 10,
        }
    }
}

fn elim_code(e: &ElimError) -> i32 {
    match e {
        ElimError::ZeroPivot { .. } => 4,
        ElimError::Matrix(_) => 3,
        ElimError::Sink(_) => 8,
        ElimError::PivotingWithMinors | ElimError::NormalizationUndefined { .. } | ElimError::StepOutOfRange { .. } => 12,
    }
}

/// Parses `std::env::args`, runs the command and returns the exit code.
pub fn main() -> i32 {
    main_with_args(std::env::args_os())
}

pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Gen(a) => cmd_gen(&a),
        Command::Det(a) => cmd_det(&a),
        Command::Minors(a) => cmd_minors(&a),
        Command::Study(a) => cmd_study(&a),
        Command::Bench(a) => cmd_bench(&a),
        Command::Verify(a) => cmd_verify(&a),
        Command::Worker => crate::parexec::run_worker_stdio().map_err(|e| {
            CliError::Par(ParError::WorkerFailure { worker: 0, reason: e.to_string() })
        }),
    }
}

fn precision(bits: u32) -> Result<Precision, CliError> {
    Ok(Precision::new(bits)?)
}

fn cmd_gen(a: &GenArgs) -> Result<(), CliError> {
    let prec = precision(a.prec_bits)?;
    let need_n = || a.n.filter(|&n| n > 0).ok_or_else(|| CliError::Config("--n is required".into()));
    let zeros = |count: usize| -> Result<_, CliError> {
        let path = a.zeros.as_ref().ok_or_else(|| CliError::Config("--zeros is required".into()))?;
        let zprec = precision(a.zeros_prec_bits.unwrap_or(a.prec_bits))?;
        Ok(load_zeros(path, zprec, count)?)
    };
    let m: AnyMatrix = match a.family {
        GenFamily::Hilbert => synth_matrix(Family::Hilbert, need_n()?, a.seed, prec).into(),
        GenFamily::RandomUniform => synth_matrix(Family::RandomUniform, need_n()?, a.seed, prec).into(),
        GenFamily::RandomIllcond => synth_matrix(Family::RandomIllcond, need_n()?, a.seed, prec).into(),
        GenFamily::Power => {
            let m = a.m.ok_or_else(|| CliError::Config("--m is required".into()))?;
            let t = PrecReal::parse_decimal(&a.t, prec).map_err(|e| CliError::Config(format!("--t: {e}")))?;
            power_matrix(&zeros(m)?, m, &t, prec)?.into()
        }
        GenFamily::Beta => {
            let n = need_n()?;
            beta_matrix(&zeros(n)?, n, &Spouge::default(), prec)?.into()
        }
    };
    match &a.out {
        Some(path) => save_matrix(&m, path)?,
        None => crate::format::write_any_matrix(&m, io::stdout().lock())?,
    }
    Ok(())
}

/// Reads the input, tags it with its content fingerprint and rounds it to
/// the working precision.
fn load_input(path: &Path, prec_bits: Option<u32>) -> Result<AnyMatrix, CliError> {
    let m = load_matrix(path)?;
    let fp = m.fingerprint();
    let m = match prec_bits {
        Some(bits) => m.with_precision(precision(bits)?),
        None => m,
    };
    Ok(match m {
        AnyMatrix::Real(mut b) => {
            b.set_source_fingerprint(Some(fp));
            AnyMatrix::Real(b)
        }
        AnyMatrix::Complex(mut b) => {
            b.set_source_fingerprint(Some(fp));
            AnyMatrix::Complex(b)
        }
    })
}

fn interrupt_flag() -> Arc<AtomicBool> {
    static FLAG: OnceLock<Arc<AtomicBool>> = OnceLock::new();
    FLAG.get_or_init(|| {
        let flag = Arc::new(AtomicBool::new(false));
        let f = flag.clone();
        // A second signal while the first is being handled exits at once.
        let _ = ctrlc::set_handler(move || {
            if f.swap(true, Ordering::SeqCst) {
                std::process::exit(10);
            }
        });
        flag
    })
    .clone()
}

fn validate(run: &RunArgs, collect_minors: bool) -> Result<(), CliError> {
    if run.pivot == PivotMode::Partial && collect_minors {
        return Err(CliError::Config("--pivot partial cannot produce minors".into()));
    }
    if run.workers == 0 {
        return Err(CliError::Config("--workers must be at least 1".into()));
    }
    if run.block_size > 0 {
        if run.workers > 1 {
            return Err(CliError::Config("--block-size and --workers > 1 are exclusive".into()));
        }
        if run.paging_dir.is_none() {
            return Err(CliError::Config("--block-size needs --paging-dir".into()));
        }
    }
    Ok(())
}

fn elim_options(run: &RunArgs, collect_minors: bool, series: bool) -> ElimOptions {
    ElimOptions {
        collect_minors,
        series,
        pivoting: match run.pivot {
            PivotMode::None => Pivoting::None,
            PivotMode::Partial => Pivoting::Partial,
        },
        limit_n: run.limit_n,
    }
}

/// Writes each row to `minors_<n>.txt` as it arrives and keeps the small
/// ones for the oracle check.
struct RowSink<'a, S> {
    dir: Option<&'a Path>,
    digits: usize,
    keep_upto: usize,
    kept: Vec<MinorRow<S>>,
}

impl<S: FloatScalar> MinorSink<S> for RowSink<'_, S> {
    fn accept(&mut self, row: MinorRow<S>) -> io::Result<()> {
        if let Some(dir) = self.dir {
            write_minor_file(dir, &row, self.digits)?;
        }
        if row.normalized.is_none() {
            eprintln!("n={}: normalized minors undefined (leading signed minor is zero)", row.n);
        }
        if row.n <= self.keep_upto {
            self.kept.push(row);
        }
        Ok(())
    }
}

fn write_minor_file<S: FloatScalar>(dir: &Path, row: &MinorRow<S>, digits: usize) -> io::Result<()> {
    let mut w = io::BufWriter::new(fs::File::create(dir.join(format!("minors_{}.txt", row.n)))?);
    for (k, s) in row.signed.iter().enumerate() {
        let norm = match &row.normalized {
            Some(v) => v[k].to_decimal(digits),
            None => "undefined".to_string(),
        };
        writeln!(w, "{} {} {}", k + 1, s.to_decimal(digits), norm)?;
    }
    w.flush()
}

fn write_dets<S: FloatScalar, W: Write>(trace: &EliminationTrace<S>, digits: usize, out: W) -> io::Result<()> {
    let mut w = io::BufWriter::new(out);
    for (i, d) in trace.det_series.iter().enumerate() {
        writeln!(w, "{} {}", i + 1, d.to_decimal(digits))?;
    }
    w.flush()
}

/// Which engine ran and what it produced; `error` is set after a partial run.
struct RunResult<S> {
    trace: EliminationTrace<S>,
    kept: Vec<MinorRow<S>>,
    error: Option<CliError>,
}

struct Plan<'a> {
    run: &'a RunArgs,
    opts: ElimOptions,
    out: Option<&'a Path>,
    digits: usize,
    checkpoint: Option<&'a Path>,
    checkpoint_every: usize,
}

fn execute<S: FloatScalar>(a: MatrixBuffer<S>, plan: &Plan) -> Result<RunResult<S>, CliError> {
    let keep_upto = if plan.run.oracle { ORACLE_MAX_N } else { 0 };
    let mut sink = RowSink { dir: plan.out, digits: plan.digits, keep_upto, kept: Vec::new() };
    let flag = interrupt_flag();
    let run = plan.run;

    let (trace, error) = if run.block_size > 0 {
        if plan.opts.limit_n.is_some() {
            return Err(CliError::Config("--limit-n is not available with --block-size".into()));
        }
        let dir = run.paging_dir.as_deref().expect("validated");
        let store = open_or_create_store(dir, &a, run.block_size)?;
        let opts = PagedOptions { elim: plan.opts.clone(), fault: None, cancel: Some(flag) };
        let out = paged_eliminate_into(&store, &opts, &mut sink);
        (out.trace, out.error.map(CliError::from))
    } else if run.workers > 1 {
        let transport = match run.transport {
            TransportMode::Thread => Transport::InProcess,
            TransportMode::Process => Transport::Process { exe: std::env::current_exe()? },
        };
        let cfg = ParConfig { workers: run.workers, transport, fail_at: None };
        let out = par_eliminate_into(&a, &cfg, &plan.opts, &mut sink);
        (out.trace, out.error.map(CliError::from))
    } else {
        let mut el = match plan.checkpoint.filter(|p| p.exists()) {
            Some(path) => {
                let el = Eliminator::<S>::read_snapshot(io::BufReader::new(fs::File::open(path)?))?;
                if el.buffer().source_fingerprint() != a.source_fingerprint() || el.options() != &plan.opts {
                    return Err(CliError::Config(format!("checkpoint {} belongs to a different run", path.display())));
                }
                el
            }
            None => Eliminator::new(a, plan.opts.clone())?,
        };
        let error = loop {
            match el.step_once(&mut sink) {
                Ok(more) => {
                    let step = el.completed_steps();
                    let stop = flag.load(Ordering::SeqCst);
                    if let Some(path) = plan.checkpoint {
                        if stop || (more && plan.checkpoint_every > 0 && step % plan.checkpoint_every == 0) {
                            save_snapshot(&el, path)?;
                        }
                    }
                    if !more {
                        if let Some(path) = plan.checkpoint {
                            let _ = fs::remove_file(path);
                        }
                        break None;
                    }
                    if stop {
                        break Some(CliError::Interrupted);
                    }
                }
                Err(e) => break Some(e.into()),
            }
        };
        (el.trace().clone(), error)
    };
    Ok(RunResult { trace, kept: sink.kept, error })
}

fn save_snapshot<S: FloatScalar>(el: &Eliminator<S>, path: &Path) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    let mut w = io::BufWriter::new(fs::File::create(&tmp)?);
    el.write_snapshot(&mut w)?;
    w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Opens an existing store in `dir` (resuming it, or extending it when the
/// input has grown by whole block rows) or creates a new one.
fn open_or_create_store<S: FloatScalar>(dir: &Path, a: &MatrixBuffer<S>, nb: usize) -> Result<BlockStore<S>, CliError> {
    if !dir.join("store.meta").exists() {
        return Ok(BlockStore::create(dir, a, nb)?);
    }
    let store = BlockStore::<S>::open(dir)?;
    let n = a.dim();
    if store.block_dim() != nb || store.precision() != a.precision() || n < store.dim() || !(n - store.dim()).is_multiple_of(nb) {
        return Err(CliError::Config(format!("store in {} does not match this input", dir.display())));
    }
    let extra = (n - store.dim()) / nb;
    Ok(extend_grid(store, extra, |i, j| a.get(i, j).clone())?)
}

fn output_digits(run: &RunArgs, prec: Precision) -> usize {
    run.digits.unwrap_or_else(|| prec.decimal_digits()).max(1)
}

fn cmd_det(args: &DetArgs) -> Result<(), CliError> {
    let run = &args.run;
    validate(run, false)?;
    let m = load_input(&run.input, run.prec_bits)?;
    let digits = output_digits(run, m.precision());
    let opts = elim_options(run, false, false);
    let plan = Plan { run, opts, out: None, digits, checkpoint: None, checkpoint_every: 0 };
    match m {
        AnyMatrix::Real(a) => finish_det(a, &plan, args.series),
        AnyMatrix::Complex(a) => finish_det(a, &plan, args.series),
    }
}

fn finish_det<S: OracleScalar>(a: MatrixBuffer<S>, plan: &Plan, series: bool) -> Result<(), CliError> {
    let source = a.clone();
    let res = execute(a, plan)?;
    if let Some(e) = res.error {
        return Err(e);
    }
    let mut out = io::stdout().lock();
    if series {
        write_dets(&res.trace, plan.digits, &mut out)?;
    } else if let Some(d) = res.trace.det() {
        writeln!(out, "{} {}", res.trace.step(), d.to_decimal(plan.digits))?;
    }
    if plan.run.oracle {
        report_oracle(&source, &res.trace, &[], default_min_digits(source.precision()))?;
    }
    Ok(())
}

fn cmd_minors(args: &MinorsArgs) -> Result<(), CliError> {
    let run = &args.run;
    validate(run, true)?;
    if args.checkpoint.is_some() && (run.workers > 1 || run.block_size > 0) {
        return Err(CliError::Config("--checkpoint applies to single-worker in-memory runs".into()));
    }
    let m = load_input(&run.input, run.prec_bits)?;
    fs::create_dir_all(&args.out)?;
    let digits = output_digits(run, m.precision());
    let plan = Plan {
        run,
        opts: elim_options(run, true, !args.final_only),
        out: Some(&args.out),
        digits,
        checkpoint: args.checkpoint.as_deref(),
        checkpoint_every: args.checkpoint_every,
    };
    let n_eff = plan.opts.limit_n.map_or(m.dim(), |l| l.clamp(1, m.dim()));
    let meta = format!(
        "MPMINORS 1 {} {} {} {} {}\n",
        m.kind(),
        n_eff,
        m.precision().bits(),
        digits,
        m.fingerprint()
    );
    fs::write(args.out.join("meta.txt"), meta)?;
    match m {
        AnyMatrix::Real(a) => finish_minors(a, &plan),
        AnyMatrix::Complex(a) => finish_minors(a, &plan),
    }
}

fn finish_minors<S: OracleScalar>(a: MatrixBuffer<S>, plan: &Plan) -> Result<(), CliError> {
    let source = if plan.run.oracle { Some(a.clone()) } else { None };
    let res = execute(a, plan)?;
    let out = plan.out.expect("minors has an output directory");
    write_dets(&res.trace, plan.digits, fs::File::create(out.join("dets.txt"))?)?;
    if let Some(e) = res.error {
        return Err(e);
    }
    if let Some(src) = source {
        report_oracle(&src, &res.trace, &res.kept, default_min_digits(src.precision()))?;
    }
    Ok(())
}

fn default_min_digits(prec: Precision) -> u64 {
    (prec.decimal_digits() / 2) as u64
}

/// Reference values for the leading `m × m` block: determinant and the
/// cofactors of its last column.
pub trait OracleScalar: FloatScalar {
    fn reference(a: &MatrixBuffer<Self>, m: usize) -> Result<(Self, Vec<Self>), CliError>;
}

impl OracleScalar for PrecReal {
    /// Exact rational expansion of the stored binary values.
    fn reference(a: &MatrixBuffer<Self>, m: usize) -> Result<(Self, Vec<Self>), CliError> {
        let exact = RationalMatrix::from_buffer(a).leading(m);
        let prec = Precision::new(a.precision().bits() + 64)?;
        let det = PrecReal::from_rational(&det_cofactor(&exact)?, prec);
        let cof = cofactors_of_column(&exact, m - 1)?.iter().map(|c| PrecReal::from_rational(c, prec)).collect();
        Ok((det, cof))
    }
}

impl OracleScalar for PrecComplex {
    /// Divide-variant condensation at 64 extra bits.
    fn reference(a: &MatrixBuffer<Self>, m: usize) -> Result<(Self, Vec<Self>), CliError> {
        let wide = a.with_precision(Precision::new(a.precision().bits() + 64)?);
        let lead = wide.leading(m);
        let det = det_condensation(&lead, Condensation::Divide)?;
        let mut cof = Vec::with_capacity(m);
        for k in 0..m {
            if m == 1 {
                cof.push(PrecComplex::one(wide.precision()));
                break;
            }
            let sub = MatrixBuffer::from_fn(m - 1, |i, j| lead.get(if i >= k { i + 1 } else { i }, j).clone());
            let d = det_condensation(&sub, Condensation::Divide)?;
            cof.push(if (k + m - 1).is_multiple_of(2) { d } else { d.neg() });
        }
        Ok((det, cof))
    }
}

/// Agreement of `got` with `want`; an exactly zero reference accepts values
/// below `10^-min_digits` times `scale`.
fn agreement<S: FloatScalar>(got: &S, want: &S, scale: &PrecReal, min_digits: u64) -> u64 {
    if want.is_zero() {
        if got.is_zero() {
            return crate::scalar::AGREE_CEILING;
        }
        let ratio = got.modulus().as_float().clone() / scale.as_float();
        let digits = -ratio.log10().to_f64();
        return if digits.is_finite() && digits >= min_digits as f64 { digits as u64 } else { 0 };
    }
    agree_digits(got, want)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleLine {
    pub n: usize,
    pub det_digits: u64,
    /// `None` when the row was not available (not collected or resumed past it).
    pub minor_digits: Option<u64>,
}

/// Compares leading sizes `1..=max_n` with the reference values.
pub fn oracle_lines<S: OracleScalar>(
    a: &MatrixBuffer<S>,
    trace: &EliminationTrace<S>,
    rows: &[MinorRow<S>],
    max_n: usize,
    min_digits: u64,
) -> Result<Vec<OracleLine>, CliError> {
    let mut lines = Vec::new();
    for m in 1..=max_n.min(trace.step()) {
        let (det, cof) = S::reference(a, m)?;
        let got = trace.det_leading(m).expect("within completed steps");
        let det_scale = det.modulus();
        let det_digits = agreement(got, &det, &det_scale, min_digits);
        let minor_digits = rows.iter().find(|r| r.n == m).map(|row| {
            let scale = cof.iter().map(FloatScalar::modulus).fold(PrecReal::with_val(det_scale.prec(), 0), |acc, x| {
                if x.as_float() > acc.as_float() {
                    x
                } else {
                    acc
                }
            });
            row.signed.iter().zip(&cof).map(|(g, w)| agreement(g, w, &scale, min_digits)).min().unwrap_or(0)
        });
        lines.push(OracleLine { n: m, det_digits, minor_digits });
    }
    Ok(lines)
}

fn report_oracle<S: OracleScalar>(
    a: &MatrixBuffer<S>,
    trace: &EliminationTrace<S>,
    rows: &[MinorRow<S>],
    min_digits: u64,
) -> Result<(), CliError> {
    let lines = oracle_lines(a, trace, rows, ORACLE_MAX_N, min_digits)?;
    check_lines(&lines, min_digits, &mut io::stderr().lock())
}

fn check_lines(lines: &[OracleLine], min_digits: u64, out: &mut dyn Write) -> Result<(), CliError> {
    let mut bad = Vec::new();
    for l in lines {
        let minor = l.minor_digits.map_or_else(|| "-".to_string(), |d| d.to_string());
        writeln!(out, "oracle n={} det_digits={} minor_digits={}", l.n, l.det_digits, minor)?;
        if l.det_digits < min_digits || l.minor_digits.is_some_and(|d| d < min_digits) {
            bad.push(l.n);
        }
    }
    if bad.is_empty() {
        Ok(())
    } else {
        Err(CliError::OracleMismatch(format!("sizes {bad:?} agree to fewer than {min_digits} digits")))
    }
}

fn cmd_verify(args: &VerifyArgs) -> Result<(), CliError> {
    let m = load_input(&args.input, args.prec_bits)?;
    let min_digits = args.min_digits.unwrap_or_else(|| default_min_digits(m.precision()));
    let max_n = args.max_n.min(crate::oracle::MAX_ORACLE_N);
    match m {
        AnyMatrix::Real(a) => verify_matrix(a, max_n, min_digits),
        AnyMatrix::Complex(a) => verify_matrix(a, max_n, min_digits),
    }
}

fn verify_matrix<S: OracleScalar>(a: MatrixBuffer<S>, max_n: usize, min_digits: u64) -> Result<(), CliError> {
    let opts = ElimOptions { limit_n: Some(max_n), ..Default::default() };
    let mut el = Eliminator::new(a.clone(), opts)?;
    let mut series = el.new_series();
    el.run(&mut series)?;
    let mut out = io::stdout().lock();
    let lines = oracle_lines(&a, el.trace(), &series.rows, max_n, min_digits)?;
    let exact = check_lines(&lines, min_digits, &mut out);

    // The full determinant against both condensation variants.
    let full = crate::elim::eliminate(a.clone(), &ElimOptions::determinant_only())?;
    let det = full.trace.det().expect("nonempty matrix").clone();
    let mut bad = Vec::new();
    for (name, v) in [("divide", Condensation::Divide), ("factor", Condensation::Factor)] {
        let c = det_condensation(&a, v)?;
        let digits = agree_digits(&c, &det);
        writeln!(out, "condensation {name} n={} digits={digits}", a.dim())?;
        if digits < min_digits {
            bad.push(name);
        }
    }
    exact?;
    if !bad.is_empty() {
        return Err(CliError::OracleMismatch(format!("condensation {bad:?} below {min_digits} digits")));
    }
    Ok(())
}

/// Reads a `minors` output directory back into a series.
pub fn read_minors_dir<S: FloatScalar>(dir: &Path) -> Result<MinorSeries<S>, CliError> {
    let meta_path = dir.join("meta.txt");
    let meta = fs::read_to_string(&meta_path)?;
    let f: Vec<&str> = meta.split_whitespace().collect();
    let bad = || CliError::Parse(format!("{}: bad header", meta_path.display()));
    let ["MPMINORS", "1", kind, n, bits, _digits, fp] = f[..] else { return Err(bad()) };
    if kind.parse::<Kind>().map_err(|_| bad())? != S::KIND {
        return Err(CliError::Config(format!("{} holds {kind} minors", dir.display())));
    }
    let n: usize = n.parse().map_err(|_| bad())?;
    let prec = precision(bits.parse().map_err(|_| bad())?)?;
    let source = parse_fingerprint(fp).ok_or_else(bad)?;
    let mut series = MinorSeries::new(n, Some(prec), Some(source));
    let width = if S::KIND == Kind::Complex { 2 } else { 1 };
    for size in 2..=n {
        let path = dir.join(format!("minors_{size}.txt"));
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => continue,
            Err(e) => return Err(e.into()),
        };
        let mut signed = Vec::with_capacity(size);
        let mut normalized = Some(Vec::with_capacity(size));
        for (lineno, line) in text.lines().enumerate() {
            let toks: Vec<&str> = line.split_whitespace().collect();
            let parse_err = || CliError::Parse(format!("{}:{}: malformed line", path.display(), lineno + 1));
            if toks.len() < 1 + width {
                return Err(parse_err());
            }
            signed.push(S::parse_decimal(&toks[1..1 + width].join(" "), prec).map_err(|_| parse_err())?);
            match &toks[1 + width..] {
                ["undefined"] => normalized = None,
                rest if rest.len() == width => {
                    let v = S::parse_decimal(&rest.join(" "), prec).map_err(|_| parse_err())?;
                    if let Some(nv) = normalized.as_mut() {
                        nv.push(v);
                    }
                }
                _ => return Err(parse_err()),
            }
        }
        series.rows.push(MinorRow { n: size, signed, normalized });
    }
    Ok(series)
}

fn parse_fingerprint(s: &str) -> Option<Fingerprint> {
    if s.len() != 64 {
        return None;
    }
    let mut out = [0u8; 32];
    for (i, b) in out.iter_mut().enumerate() {
        *b = u8::from_str_radix(s.get(2 * i..2 * i + 2)?, 16).ok()?;
    }
    Some(Fingerprint(out))
}

fn cmd_study(args: &StudyArgs) -> Result<(), CliError> {
    let series = match (&args.input, &args.compare) {
        (_, Some(dirs)) => {
            let kind = fs::read_to_string(dirs[0].join("meta.txt"))?;
            if kind.split_whitespace().nth(2) == Some("complex") {
                digit_agreement(&read_minors_dir::<PrecComplex>(&dirs[0])?, &read_minors_dir(&dirs[1])?)?
            } else {
                digit_agreement(&read_minors_dir::<PrecReal>(&dirs[0])?, &read_minors_dir(&dirs[1])?)?
            }
        }
        (Some(input), None) => {
            let m = load_input(input, None)?;
            run_study(&m, precision(args.lo_bits)?, precision(args.hi_bits)?, args.limit_n)?
        }
        (None, None) => return Err(CliError::Config("give an input file or --compare".into())),
    };
    match &args.csv {
        Some(p) => write_csv(&series, fs::File::create(p)?)?,
        None => write_csv(&series, io::stdout().lock())?,
    }
    let n_max = args.n_max.unwrap_or_else(|| series.rows.last().map_or(0, |r| r.n));
    let fit = fit_decay(&series, args.n_min, n_max)?;
    match &args.fit {
        Some(p) => write_fit(&fit, fs::File::create(p)?)?,
        None => write_fit(&fit, io::stderr().lock())?,
    }
    Ok(())
}

fn cmd_bench(args: &BenchArgs) -> Result<(), CliError> {
    let report = run_grid(&args.sizes, &args.precs, &args.workers, args.seed, args.reps)?;
    print!("{}", report.render());
    Ok(())
}
