//! Out-of-core elimination: interrupts a paged run partway, resumes it from
//! the journal, then grows the matrix by one block row and extends the
//! finished factorization instead of starting over.
//!
//! `cargo run --example paged_resume`

use mpdet::elim::{eliminate, ElimOptions};
use mpdet::genmat::{synth_matrix, Family};
use mpdet::paging::{extend_grid, paged_eliminate, paged_eliminate_into, BlockStore, Fault, PagedOptions};
use mpdet::{PrecReal, Precision};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let prec = Precision::new(256)?;
    let (nb, blocks) = (16, 3);
    let full = synth_matrix(Family::RandomUniform, nb * (blocks + 1), 5, prec);
    let dir = tempfile::tempdir()?;

    let store = BlockStore::create_with(dir.path(), blocks, nb, prec, |i, j| full.get(i, j).clone())?;
    let stop = PagedOptions { fault: Some(Fault { after_ops: 9, point: None }), ..Default::default() };
    let out = paged_eliminate_into(&store, &stop, &mut Vec::new());
    println!("first attempt: {} ops, then {:?}", out.stats.ops_run, out.error);
    drop(store);

    let store = BlockStore::<PrecReal>::open(dir.path())?;
    let (_, _, stats) = paged_eliminate(&store, &PagedOptions::default())?;
    println!(
        "resumed: skipped {} journaled ops, ran {}, peak {} resident blocks",
        stats.ops_skipped, stats.ops_run, stats.peak_resident_blocks
    );

    let store = extend_grid(store, 1, |i, j| full.get(i, j).clone())?;
    let (trace, minors, stats) = paged_eliminate(&store, &PagedOptions::default())?;
    println!("extended to {}x{}: ran {} new ops", store.dim(), store.dim(), stats.ops_run);

    let mem = eliminate(full, &ElimOptions::default())?;
    println!(
        "matches in-memory run: determinants {}, minors {}",
        trace.det_series == mem.trace.det_series,
        minors == mem.minors
    );
    Ok(())
}
