//! Worker loop: owns an interleaved class of rows and applies every
//! broadcast pivot row to them in increasing row order.

use std::collections::BTreeMap;
use std::io;

use super::transport::{Down, Setup, StreamLink, Up, WorkerLink};
use super::wire::{pack_row, unpack_row};
use crate::elim::{eliminate_row, minor_row_from_l, ElimOptions};
use crate::scalar::{FloatScalar, Kind, PrecComplex, PrecReal, Precision};

/// Serves one coordinator over stdin/stdout until told to finish.
pub fn run_worker_stdio() -> io::Result<()> {
    let stdin = io::stdin().lock();
    let stdout = io::stdout().lock();
    let mut link = StreamLink { reader: io::BufReader::new(stdin), writer: io::BufWriter::new(stdout) };
    let Some(Down::Setup(setup)) = link.recv() else {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "expected setup frame"));
    };
    let process_fault = |_: &Setup| std::process::exit(70);
    match setup.kind {
        Kind::Real => serve::<PrecReal, _>(setup, &mut link, &process_fault),
        Kind::Complex => serve::<PrecComplex, _>(setup, &mut link, &process_fault),
    }
    Ok(())
}

/// Runs after `Setup` has been received.
pub(crate) fn serve<S: FloatScalar, L: WorkerLink>(setup: Setup, link: &mut L, fault: &dyn Fn(&Setup)) {
    if let Err(msg) = serve_inner::<S, L>(&setup, link, fault) {
        link.send(Up::Failed(msg));
        // Drain until the coordinator releases us.
        while let Some(m) = link.recv() {
            if matches!(m, Down::Abort | Down::Finish) {
                break;
            }
        }
    }
}

fn serve_inner<S: FloatScalar, L: WorkerLink>(setup: &Setup, link: &mut L, fault: &dyn Fn(&Setup)) -> Result<(), String> {
    let prec = Precision::new(setup.prec_bits).map_err(|e| e.to_string())?;
    let n_eff = setup.n_eff as usize;
    let workers = setup.workers as usize;
    let me = setup.worker as usize;
    let opts = ElimOptions { collect_minors: setup.collect, series: setup.series, ..Default::default() };

    let mut rows: BTreeMap<usize, Vec<S>> = BTreeMap::new();
    match link.recv() {
        Some(Down::Rows(list)) => {
            for (idx, bytes) in list {
                let (_, row) = unpack_row::<S>(&bytes, prec).map_err(|e| e.to_string())?;
                rows.insert(idx as usize, row);
            }
        }
        Some(Down::Abort | Down::Finish) | None => return Ok(()),
        Some(other) => return Err(format!("expected rows, got {other:?}")),
    }
    let owns = |r: usize| r % workers == me;
    let mut scratch = S::zero(prec);

    if owns(0) && !offer_pivot(0, &rows, None, setup.collect, link) {
        return Ok(());
    }

    loop {
        let payload = match link.recv() {
            Some(Down::Broadcast(p)) => p,
            Some(Down::Abort | Down::Finish) | None => return Ok(()),
            Some(other) => return Err(format!("unexpected message {other:?}")),
        };
        let (step, mut seg) = unpack_row::<S>(&payload, prec).map_err(|e| e.to_string())?;
        let i = step as usize;
        if setup.fail_at == Some(step) {
            fault(setup);
            return Err(format!("injected failure at step {}", i + 1));
        }
        let det = seg.pop().ok_or("empty pivot payload")?;
        let pivot_row = if setup.collect {
            seg
        } else {
            // Only columns i.. travel for determinant-only runs.
            let mut full: Vec<S> = (0..i).map(|_| S::zero(prec)).collect();
            full.extend(seg);
            full
        };
        let pivot = pivot_row[i].clone();
        for (_, row) in rows.range_mut(i + 1..n_eff) {
            eliminate_row(row, &pivot_row, &pivot, i, n_eff, setup.collect, &mut scratch);
        }
        let next = i + 1;
        if next >= n_eff {
            link.send(Up::Done);
            continue;
        }
        if owns(next) {
            let size = next + 1;
            if opts.wants_row(size, n_eff) {
                let minor = minor_row_from_l(size, &rows[&next][..next], &det);
                if !link.send(Up::Minor(pack_row(size as u32, &minor.signed))) {
                    return Ok(());
                }
            }
            if !offer_pivot(next, &rows, Some(&det), setup.collect, link) {
                return Ok(());
            }
        }
    }
}

/// Sends pivot row `i` with the running determinant after step `i`, or
/// reports an exact zero pivot.
fn offer_pivot<S: FloatScalar, L: WorkerLink>(
    i: usize,
    rows: &BTreeMap<usize, Vec<S>>,
    det_before: Option<&S>,
    collect: bool,
    link: &mut L,
) -> bool {
    let row = &rows[&i];
    let pivot = &row[i];
    if pivot.is_zero() {
        return link.send(Up::ZeroPivot(i as u32));
    }
    let det = match det_before {
        Some(d) => d.mul(pivot),
        None => pivot.clone(),
    };
    let start = if collect { 0 } else { i };
    let mut seg: Vec<S> = row[start..].to_vec();
    seg.push(det);
    link.send(Up::Pivot(pack_row(i as u32, &seg)))
}
