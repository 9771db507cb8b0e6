//! Cross-checks floating elimination against the exact rational cofactor
//! oracle and both condensation variants.
//!
//! `cargo run --example oracle_check [N] [BITS]`

use mpdet::elim::{eliminate, ElimOptions};
use mpdet::oracle::{cofactors_of_column, det_cofactor, det_condensation, Condensation, RationalMatrix};
use mpdet::scalar::{agree_digits, AGREE_CEILING};
use mpdet::{FloatScalar, PrecReal, Precision};
use rug::Rational;

fn show(digits: u64) -> String {
    if digits == AGREE_CEILING { "all".into() } else { digits.to_string() }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(Ok(7), |s| s.parse())?;
    let prec = Precision::new(args.next().map_or(Ok(512), |s| s.parse())?)?;

    // Entries (i + 2j + 1) / (i + j + 3) with a shifted diagonal keep every leading block regular.
    let exact = RationalMatrix::from_fn(n, |i, j| {
        let base = Rational::from(((i + 2 * j + 1) as i64, (i + j + 3) as i64));
        if i == j { base + 2 } else { base }
    });
    let a: mpdet::MatrixBuffer<PrecReal> = exact.to_buffer(prec);
    let run = eliminate(a.clone(), &ElimOptions::default())?;
    let series = run.minors.expect("minors were requested");

    for m in 2..=n {
        let lead = exact.leading(m);
        let det = PrecReal::from_rational(&det_cofactor(&lead)?, prec);
        let cof = cofactors_of_column(&lead, m - 1)?;
        let worst = series.get(m).expect("row present").signed.iter().zip(&cof)
            .map(|(g, w)| agree_digits(g, &PrecReal::from_rational(w, prec)))
            .min()
            .unwrap_or(0);
        let d = agree_digits(&run.trace.det_series[m - 1], &det);
        println!("n={m}: det agrees to {} digits, cofactors to {}", show(d), show(worst));
    }
    let det = run.trace.det().expect("nonempty");
    for v in [Condensation::Divide, Condensation::Factor] {
        println!("{v:?} condensation agrees to {} digits", show(agree_digits(&det_condensation(&a, v)?, det)));
    }
    Ok(())
}
