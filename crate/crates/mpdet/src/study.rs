//! Precision-loss study: compare the normalized minors of one matrix
//! computed at two precisions and fit a line to the agreement.

use std::io::{self, Write};

use thiserror::Error;

use crate::elim::{ElimError, ElimOptions, Eliminator, MinorSeries};
use crate::matrix::{AnyMatrix, MatrixBuffer};
use crate::scalar::{agree_digits_with_ceiling, FloatScalar, Precision};

/// Fewest valid points [`fit_decay`] accepts.
pub const MIN_FIT_POINTS: usize = 10;

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("series are not comparable: {0}")]
    SeriesMismatch(String),
    #[error("need at least {need} valid points in range, found {have}")]
    InsufficientData { have: usize, need: usize },
    #[error("low precision {lo} must be below high precision {hi}")]
    PrecisionOrder { lo: u32, hi: u32 },
    #[error("source matrix has {have} bits, study needs at least {need}")]
    SourcePrecision { have: u32, need: u32 },
    #[error(transparent)]
    Elim(#[from] ElimError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Agreement of the size-`n` row. Entry `k = 1` is excluded because both
/// normalized rows start with an exact one.
#[derive(Debug, Clone, PartialEq)]
pub struct AgreementRow {
    pub n: usize,
    pub avg_digits: f64,
    pub min_digits: f64,
    pub count: usize,
    /// False when either run has no normalized row for this `n`.
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgreementSeries {
    pub rows: Vec<AgreementRow>,
    /// Value reported for exactly equal entries: the decimal digits of the
    /// lower precision.
    pub ceiling: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_range: (usize, usize),
    pub points: usize,
}

impl RegressionFit {
    /// Slope in bits lost per elimination step.
    pub fn slope_bits_per_op(&self) -> f64 {
        self.slope * std::f64::consts::LOG2_10
    }
}

/// Per-`n` digit agreement between two runs on the same matrix.
pub fn digit_agreement<S: FloatScalar>(
    a: &MinorSeries<S>,
    b: &MinorSeries<S>,
) -> Result<AgreementSeries, StudyError> {
    if a.source != b.source {
        return Err(StudyError::SeriesMismatch("matrix fingerprints differ".into()));
    }
    if a.target_n != b.target_n {
        return Err(StudyError::SeriesMismatch(format!("target sizes {} and {}", a.target_n, b.target_n)));
    }
    let bits = [a.precision, b.precision].iter().flatten().map(|p| p.bits()).min();
    let ceiling = bits.map_or(crate::scalar::AGREE_CEILING, |b| Precision::new(b).map_or(0, |p| p.decimal_digits() as u64));
    let mut rows = Vec::new();
    for n in 2..=a.target_n {
        let pair = a.get(n).zip(b.get(n)).and_then(|(x, y)| x.normalized.as_ref().zip(y.normalized.as_ref()));
        let row = match pair {
            Some((x, y)) => {
                let digits: Vec<u64> =
                    x.iter().zip(y).skip(1).map(|(u, v)| agree_digits_with_ceiling(u, v, ceiling)).collect();
                let sum: u64 = digits.iter().sum();
                AgreementRow {
                    n,
                    avg_digits: sum as f64 / digits.len() as f64,
                    min_digits: digits.iter().copied().min().unwrap_or(ceiling) as f64,
                    count: digits.len(),
                    valid: true,
                }
            }
            None => AgreementRow { n, avg_digits: 0.0, min_digits: 0.0, count: 0, valid: false },
        };
        rows.push(row);
    }
    Ok(AgreementSeries { rows, ceiling })
}

/// Ordinary least squares of `avg_digits` against `n` over the valid rows
/// with `n_min <= n <= n_max`. A constant series has `r² = 1`.
pub fn fit_decay(series: &AgreementSeries, n_min: usize, n_max: usize) -> Result<RegressionFit, StudyError> {
    let pts: Vec<(f64, f64)> = series
        .rows
        .iter()
        .filter(|r| r.valid && (n_min..=n_max).contains(&r.n))
        .map(|r| (r.n as f64, r.avg_digits))
        .collect();
    fit_points(&pts, (n_min, n_max))
}

fn fit_points(pts: &[(f64, f64)], n_range: (usize, usize)) -> Result<RegressionFit, StudyError> {
    if pts.len() < MIN_FIT_POINTS {
        return Err(StudyError::InsufficientData { have: pts.len(), need: MIN_FIT_POINTS });
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Ok(RegressionFit { slope, intercept, r_squared, n_range, points: pts.len() })
}

/// `n,avg_digits,min_digits,valid`, one row per `n`.
pub fn write_csv<W: Write>(series: &AgreementSeries, out: W) -> io::Result<()> {
    let mut w = io::BufWriter::new(out);
    writeln!(w, "n,avg_digits,min_digits,valid")?;
    for r in &series.rows {
        writeln!(w, "{},{:.6},{:.6},{}", r.n, r.avg_digits, r.min_digits, r.valid)?;
    }
    w.flush()
}

pub fn write_fit<W: Write>(fit: &RegressionFit, mut out: W) -> io::Result<()> {
    writeln!(
        out,
        "slope={:.12}\nintercept={:.12}\nr2={:.12}\nslope_bits_per_op={:.12}\nn_min={}\nn_max={}\npoints={}",
        fit.slope,
        fit.intercept,
        fit.r_squared,
        fit.slope_bits_per_op(),
        fit.n_range.0,
        fit.n_range.1,
        fit.points
    )
}

/// Eliminates `a` rounded to `prec`, keeping the series collected before a
/// zero pivot.
pub fn minors_at<S: FloatScalar>(
    a: &MatrixBuffer<S>,
    prec: Precision,
    limit_n: Option<usize>,
) -> Result<MinorSeries<S>, StudyError> {
    let opts = ElimOptions { limit_n, ..Default::default() };
    let mut el = Eliminator::new(a.with_precision(prec), opts)?;
    let mut series = el.new_series();
    match el.run(&mut series) {
        Ok(()) | Err(ElimError::ZeroPivot { .. }) => Ok(series),
        Err(e) => Err(e.into()),
    }
}

/// Runs both precisions concurrently and compares them.
pub fn run_study(a: &AnyMatrix, lo: Precision, hi: Precision, limit_n: Option<usize>) -> Result<AgreementSeries, StudyError> {
    if lo >= hi {
        return Err(StudyError::PrecisionOrder { lo: lo.bits(), hi: hi.bits() });
    }
    let have = a.precision().bits();
    if have < hi.bits() {
        return Err(StudyError::SourcePrecision { have, need: hi.bits() });
    }
    fn both<S: FloatScalar>(
        m: &MatrixBuffer<S>,
        lo: Precision,
        hi: Precision,
        limit_n: Option<usize>,
    ) -> Result<AgreementSeries, StudyError> {
        let (x, y) = std::thread::scope(|s| {
            let h = s.spawn(|| minors_at(m, hi, limit_n));
            let x = minors_at(m, lo, limit_n);
            (x, h.join().expect("study thread panicked"))
        });
        digit_agreement(&x?, &y?)
    }
    match a {
        AnyMatrix::Real(m) => both(m, lo, hi, limit_n),
        AnyMatrix::Complex(m) => both(m, lo, hi, limit_n),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(f: impl Fn(usize) -> f64, ns: std::ops::RangeInclusive<usize>) -> AgreementSeries {
        let rows = ns
            .map(|n| AgreementRow { n, avg_digits: f(n), min_digits: f(n), count: n - 1, valid: true })
            .collect();
        AgreementSeries { rows, ceiling: 300 }
    }

    #[test]
    fn exact_line_is_recovered() {
        let s = synthetic(|n| -0.5 * n as f64 + 300.0, 2..=120);
        let fit = fit_decay(&s, 10, 120).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-9);
        assert!((fit.intercept - 300.0).abs() < 1e-9);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert_eq!(fit.points, 111);
        assert!((fit.slope_bits_per_op() + 0.5 * 10f64.log2()).abs() < 1e-9);
    }

    #[test]
    fn constant_series_has_zero_slope() {
        let fit = fit_decay(&synthetic(|_| 42.0, 2..=40), 2, 40).unwrap();
        assert_eq!(fit.slope, 0.0);
        assert_eq!(fit.r_squared, 1.0);
    }

    #[test]
    fn too_few_points() {
        let mut s = synthetic(|n| n as f64, 2..=30);
        for r in &mut s.rows[..25] {
            r.valid = false;
        }
        assert!(matches!(fit_decay(&s, 2, 30), Err(StudyError::InsufficientData { have: 4, need: 10 })));
    }

    #[test]
    fn csv_and_summary_layout() {
        let s = synthetic(|n| 10.0 - n as f64, 2..=12);
        let mut csv = Vec::new();
        write_csv(&s, &mut csv).unwrap();
        let csv = String::from_utf8(csv).unwrap();
        assert!(csv.starts_with("n,avg_digits,min_digits,valid\n2,8.000000,8.000000,true\n"));
        let mut text = Vec::new();
        write_fit(&fit_decay(&s, 2, 12).unwrap(), &mut text).unwrap();
        let text = String::from_utf8(text).unwrap();
        assert!(text.starts_with("slope=-1.000000000000\nintercept=10.000000000000\nr2=1.000000000000\nslope_bits_per_op="));
    }
}
