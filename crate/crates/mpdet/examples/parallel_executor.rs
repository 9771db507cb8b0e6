//! Runs the row-interleaved message-passing executor with several worker
//! counts and shows that results and broadcast counts do not change.
//!
//! `cargo run --release --example parallel_executor [N] [BITS]`

use std::time::Instant;

use mpdet::elim::ElimOptions;
use mpdet::genmat::{synth_matrix, Family};
use mpdet::parexec::{par_eliminate, ParConfig};
use mpdet::{FloatScalar, Precision};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(Ok(96), |s| s.parse())?;
    let bits: u32 = args.next().map_or(Ok(1024), |s| s.parse())?;
    let a = synth_matrix(Family::RandomUniform, n, 1, Precision::new(bits)?);

    let mut first = None;
    for workers in [1, 2, 4, 8] {
        let started = Instant::now();
        let out = par_eliminate(&a, &ParConfig::new(workers), &ElimOptions::default())?;
        let det = out.trace.det().expect("nonempty").to_decimal(30);
        let same = first.get_or_insert_with(|| out.minors.clone()) == &out.minors;
        println!(
            "T={workers}: {:>8.2?}  broadcasts={} bytes={} fanout_rounds={} identical={same}",
            started.elapsed(),
            out.stats.broadcasts,
            out.stats.bytes_total,
            out.stats.fanout_rounds,
        );
        println!("     det = {det}");
    }
    Ok(())
}
