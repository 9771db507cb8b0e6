//! Determinant series and normalized minors of a Hilbert matrix in one pass.
//!
//! `cargo run --example minors_series [N] [BITS]`

use mpdet::elim::{eliminate, ElimOptions};
use mpdet::genmat::{synth_matrix, Family};
use mpdet::{FloatScalar, Precision};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(Ok(8), |s| s.parse())?;
    let bits: u32 = args.next().map_or(Ok(256), |s| s.parse())?;
    let a = synth_matrix(Family::Hilbert, n, 0, Precision::new(bits)?);

    let run = eliminate(a, &ElimOptions::default())?;
    for (k, d) in run.trace.det_series.iter().enumerate() {
        println!("det H_{} = {}", k + 1, d.to_decimal(20));
    }
    let series = run.minors.expect("minors were requested");
    let last = series.get(n).expect("full run");
    println!("cofactors of column {n}:");
    for (k, (s, z)) in last.signed.iter().zip(last.normalized.iter().flatten()).enumerate() {
        println!("  k={:<3} signed {}  normalized {}", k + 1, s.to_decimal(15), z.to_decimal(15));
    }
    Ok(())
}
