//! Digit agreement of normalized minors of a power matrix computed at 1024
//! and 4096 bits, with the fitted decay line.
//!
//! `cargo run --release --example accuracy_study [M]` (default `M = 100`,
//! a `(2M+1) × (2M+1)` matrix built from `2M` zeros).

use std::path::Path;

use mpdet::genmat::{load_zeros, power_matrix};
use mpdet::study::{fit_decay, run_study, write_csv, write_fit};
use mpdet::{AnyMatrix, PrecReal, Precision};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m: usize = std::env::args().nth(1).map_or(Ok(100), |s| s.parse())?;
    let zeros_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/zeta_zeros_256.txt");
    let zeros = load_zeros(&zeros_path, Precision::new(2048)?, 2 * m)?;
    let hi = Precision::new(4096)?;
    let a = power_matrix(&zeros, m, &PrecReal::with_val(hi, 0), hi)?;

    let started = std::time::Instant::now();
    let series = run_study(&AnyMatrix::Complex(a), Precision::new(1024)?, hi, None)?;
    eprintln!("study of {}x{} took {:.1?}", 2 * m + 1, 2 * m + 1, started.elapsed());

    write_csv(&series, std::io::stdout())?;
    let n_max = 2 * m + 1;
    let fit = fit_decay(&series, 50.min(n_max / 4), n_max)?;
    write_fit(&fit, std::io::stderr())?;
    Ok(())
}
