//! Wall-time measurements over sizes, precisions and worker counts.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use crate::elim::{ElimOptions, NullSink};
use crate::genmat::{synth_matrix, Family};
use crate::parexec::{par_eliminate_into, ParConfig, ParError};
use crate::scalar::Precision;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BenchCase {
    pub n: usize,
    pub prec_bits: u32,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub case: BenchCase,
    /// Fastest of the repetitions.
    pub time: Duration,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

/// Times one full minors run of a seeded uniform matrix through the
/// message-passing executor, taking the best of `reps`.
pub fn time_case(case: BenchCase, seed: u64, reps: usize) -> Result<Duration, ParError> {
    let prec = Precision::new(case.prec_bits).map_err(|e| ParError::Io(std::io::Error::other(e.to_string())))?;
    let a = synth_matrix(Family::RandomUniform, case.n, seed, prec);
    let cfg = ParConfig::new(case.workers);
    let opts = ElimOptions::default();
    let mut best = Duration::MAX;
    for _ in 0..reps.max(1) {
        let start = Instant::now();
        let out = par_eliminate_into(&a, &cfg, &opts, &mut NullSink);
        let elapsed = start.elapsed();
        if let Some(e) = out.error {
            return Err(e);
        }
        best = best.min(elapsed);
    }
    Ok(best)
}

/// Times every combination of the given sizes, precisions and worker counts.
pub fn run_grid(ns: &[usize], precs: &[u32], workers: &[usize], seed: u64, reps: usize) -> Result<BenchReport, ParError> {
    let mut rows = Vec::new();
    for &n in ns {
        for &prec_bits in precs {
            for &w in workers {
                let case = BenchCase { n, prec_bits, workers: w };
                rows.push(BenchRow { case, time: time_case(case, seed, reps)? });
            }
        }
    }
    Ok(BenchReport { rows })
}

impl BenchReport {
    pub fn time(&self, case: BenchCase) -> Option<Duration> {
        self.rows.iter().find(|r| r.case == case).map(|r| r.time)
    }

    fn ratio(&self, num: BenchCase, den: BenchCase) -> Option<f64> {
        Some(self.time(num)?.as_secs_f64() / self.time(den)?.as_secs_f64())
    }

    /// `time(2p) / time(p)`.
    pub fn precision_ratio(&self, c: BenchCase) -> Option<f64> {
        self.ratio(BenchCase { prec_bits: c.prec_bits * 2, ..c }, c)
    }

    /// `time(2n) / time(n)`.
    pub fn size_ratio(&self, c: BenchCase) -> Option<f64> {
        self.ratio(BenchCase { n: c.n * 2, ..c }, c)
    }

    /// `time(T) / time(2T)`.
    pub fn worker_ratio(&self, c: BenchCase) -> Option<f64> {
        self.ratio(c, BenchCase { workers: c.workers * 2, ..c })
    }

    /// Whitespace-separated table; `-` marks ratios whose partner case was
    /// not measured.
    pub fn render(&self) -> String {
        let fmt = |r: Option<f64>| r.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
        let mut out = String::from("n prec_bits workers seconds ratio_2p ratio_2n ratio_2t\n");
        for row in &self.rows {
            let c = row.case;
            let _ = writeln!(
                out,
                "{} {} {} {:.6} {} {} {}",
                c.n,
                c.prec_bits,
                c.workers,
                row.time.as_secs_f64(),
                fmt(self.precision_ratio(c)),
                fmt(self.size_ratio(c)),
                fmt(self.worker_ratio(c)),
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratios_pair_up_cases() {
        let case = |n, prec_bits, workers| BenchCase { n, prec_bits, workers };
        let row = |c, ms| BenchRow { case: c, time: Duration::from_millis(ms) };
        let report = BenchReport {
            rows: vec![row(case(8, 64, 1), 1000), row(case(16, 64, 1), 8000), row(case(8, 128, 1), 3000), row(case(8, 64, 2), 500)],
        };
        let base = case(8, 64, 1);
        assert_eq!(report.size_ratio(base), Some(8.0));
        assert_eq!(report.precision_ratio(base), Some(3.0));
        assert_eq!(report.worker_ratio(base), Some(2.0));
        assert_eq!(report.size_ratio(case(16, 64, 1)), None);
        let text = report.render();
        assert!(text.starts_with("n prec_bits workers seconds ratio_2p ratio_2n ratio_2t\n8 64 1 1.000000 3.000 8.000 2.000\n"));
    }

    #[test]
    fn small_case_runs() {
        let report = run_grid(&[6], &[64], &[1, 2], 1, 1).unwrap();
        assert_eq!(report.rows.len(), 2);
    }
}
