//! Builds the power matrix and the β matrix from tabulated zeta zeros and
//! prints a few structural checks.
//!
//! `cargo run --example zeta_generators [M]`

use std::path::Path;

use mpdet::elim::{eliminate, ElimOptions};
use mpdet::gamma::Spouge;
use mpdet::genmat::{beta_matrix, load_zeros, power_matrix};
use mpdet::scalar::agree_digits;
use mpdet::{FloatScalar, PrecReal, Precision, Scalar};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m: usize = std::env::args().nth(1).map_or(Ok(4), |s| s.parse())?;
    let prec = Precision::new(512)?;
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/zeta_zeros_256.txt");
    let zeros = load_zeros(&path, prec, 2 * m + 1)?;
    println!("gamma_1 = {}", zeros.gammas[0].to_decimal(40));

    let t = PrecReal::parse_decimal("20.5", prec)?;
    let a = power_matrix(&zeros, m, &t, prec)?;
    let det = eliminate(a.clone(), &ElimOptions::determinant_only())?.trace.det().cloned().expect("nonempty");
    let swapped = eliminate(a.swap_columns(0, 1), &ElimOptions::determinant_only())?.trace.det().cloned().expect("nonempty");
    println!("power matrix {}x{}: det = {}", a.dim(), a.dim(), det.to_decimal(25));
    println!("swapping a conjugate pair negates it to {} digits", agree_digits(&swapped, &det.neg()));

    let n = 2 * m + 1;
    let b = beta_matrix(&zeros, n, &Spouge::default(), prec)?;
    println!("beta matrix {n}x{n}: b[0][0] = {}", b.get(0, 0).to_decimal(25));
    let run = eliminate(b, &ElimOptions::default())?;
    let last = run.minors.expect("minors were requested");
    if let Some(norm) = last.get(n).and_then(|r| r.normalized.as_ref()) {
        for (k, z) in norm.iter().enumerate() {
            println!("  delta_{n},{} = {}", k + 1, z.to_decimal(20));
        }
    }
    Ok(())
}
