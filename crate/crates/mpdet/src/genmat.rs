//! Matrix generators: the zero-based interpolation matrices and synthetic
//! test families.

use std::fmt;
use std::fs;
use std::io::{self, Read};
use std::path::Path;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rug::float::Constant;
use rug::integer::Order;
use rug::{Float, Integer};
use thiserror::Error;

use crate::format::data_lines;
use crate::gamma::{Cx, GammaError, GammaEvaluator};
use crate::matrix::MatrixBuffer;
use crate::scalar::{FloatScalar, PrecComplex, PrecReal, Precision, Scalar};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("line {line}: cannot parse {text:?}")]
    Parse { line: usize, text: String },
    #[error("zeros not strictly increasing and positive at entry {index}")]
    NotMonotone { index: usize },
    #[error("need {needed} zeros, only {available} available")]
    InsufficientZeros { needed: usize, available: usize },
    #[error("Gamma evaluation failed: {0}")]
    GammaEvaluationFailed(#[from] GammaError),
    #[error("beta_{n}(t) has imaginary residue above tolerance")]
    ImaginaryResidue { n: usize },
    #[error("unknown matrix family {0:?}")]
    UnknownFamily(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Imaginary parts `γ_1 < γ_2 < …` of zeros on the critical line.
#[derive(Debug, Clone, PartialEq)]
pub struct ZetaZeros {
    pub gammas: Vec<PrecReal>,
    pub source_precision: Precision,
}

impl ZetaZeros {
    pub fn len(&self) -> usize {
        self.gammas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gammas.is_empty()
    }

    fn require(&self, needed: usize) -> Result<(), GenError> {
        if self.gammas.len() < needed {
            return Err(GenError::InsufficientZeros { needed, available: self.gammas.len() });
        }
        Ok(())
    }
}

/// Reads the first `count` values; `#` lines and blank lines are skipped.
pub fn read_zeros<R: Read>(input: R, prec: Precision, count: usize) -> Result<ZetaZeros, GenError> {
    let mut gammas: Vec<PrecReal> = Vec::with_capacity(count);
    for item in data_lines(input) {
        if gammas.len() == count {
            break;
        }
        let (line, text) = item?;
        let g = PrecReal::parse_decimal(&text, prec).map_err(|_| GenError::Parse { line, text: text.clone() })?;
        let ok = match gammas.last() {
            Some(prev) => g.as_float() > prev.as_float(),
            None => *g.as_float() > 0,
        };
        if !ok {
            return Err(GenError::NotMonotone { index: gammas.len() + 1 });
        }
        gammas.push(g);
    }
    if gammas.len() < count {
        return Err(GenError::InsufficientZeros { needed: count, available: gammas.len() });
    }
    Ok(ZetaZeros { gammas, source_precision: prec })
}

pub fn load_zeros(path: &Path, prec: Precision, count: usize) -> Result<ZetaZeros, GenError> {
    read_zeros(fs::File::open(path)?, prec, count)
}

/// `n^(-1/2) · e^(i·sign·θ·ln n)` at `bits`.
fn inverse_sqrt_power(n: usize, theta: &Float, sign: i8, bits: u32) -> Cx {
    let ln_n = Float::with_val(bits, n).ln();
    let mut angle = Float::with_val(bits, theta * &ln_n);
    if sign < 0 {
        angle = -angle;
    }
    let r = Float::with_val(bits, n).sqrt().recip();
    Cx::from_polar(r, &angle)
}

fn round_cx(c: &Cx, prec: Precision) -> PrecComplex {
    PrecComplex::from_floats(Float::with_val(prec.bits(), &c.re), Float::with_val(prec.bits(), &c.im))
}

/// `N = 2M+1` matrix with row `n` equal to
/// `n^-ρ̄_1, n^-ρ_1, …, n^-ρ̄_M, n^-ρ_M, n^(-1/2-it)`, where `ρ_m = 1/2 + iγ_m`.
pub fn power_matrix(zeros: &ZetaZeros, m: usize, t: &PrecReal, prec: Precision) -> Result<MatrixBuffer<PrecComplex>, GenError> {
    zeros.require(m)?;
    let n = 2 * m + 1;
    let bits = prec.bits() + 32;
    let mut data = Vec::with_capacity(n * n);
    for row in 1..=n {
        for pair in 0..m {
            let g = zeros.gammas[pair].as_float();
            // n^-ρ̄ = n^(-1/2) e^(+iγ ln n), n^-ρ = n^(-1/2) e^(-iγ ln n).
            data.push(round_cx(&inverse_sqrt_power(row, g, 1, bits), prec));
            data.push(round_cx(&inverse_sqrt_power(row, g, -1, bits), prec));
        }
        data.push(round_cx(&inverse_sqrt_power(row, t.as_float(), -1, bits), prec));
    }
    Ok(MatrixBuffer::from_data(n, data))
}

/// The two conjugate summands of `β_n(t)`, before the leading minus sign:
///
/// ```text
/// π^(-1/4 ± it/2) (t² + 1/4) Γ(1/4 ∓ it/2) / (4 n^(1/2 ∓ it))
/// ```
pub fn beta_terms(
    n: usize,
    t: &PrecReal,
    gamma: &dyn GammaEvaluator,
    prec: Precision,
) -> Result<(PrecComplex, PrecComplex), GenError> {
    let bits = prec.bits() + gamma.guard_bits();
    let work = Precision::new(bits).expect("precision above floor");
    let t = Float::with_val(bits, t.as_float());
    let quarter = Float::with_val(bits, 0.25f64);
    let half_t = Float::with_val(bits, &t / 2u32);
    let arg_lo = PrecComplex::from_floats(quarter.clone(), Float::with_val(bits, -&half_t));
    let arg_hi = PrecComplex::from_floats(quarter.clone(), half_t.clone());
    let g_lo = gamma.gamma(&arg_lo, work)?;
    let g_hi = gamma.gamma(&arg_hi, work)?;
    let ln_pi = Float::with_val(bits, Constant::Pi).ln();
    let pi_mod = Float::with_val(bits, &ln_pi * -0.25f64).exp();
    let pi_angle = Float::with_val(bits, &half_t * &ln_pi);
    let scale = (Float::with_val(bits, t.square_ref()) + &quarter) / 4u32;

    let term = |sign: i8, g: &PrecComplex| {
        let angle = if sign > 0 { pi_angle.clone() } else { -pi_angle.clone() };
        let pi_pow = Cx::from_polar(Float::with_val(bits, &pi_mod * &scale), &angle);
        let gcx = Cx::new(g.re_float().clone(), g.im_float().clone());
        // 1 / n^(1/2 ∓ it) = n^(-1/2) e^(±it ln n)
        let npow = inverse_sqrt_power(n, &t, sign, bits);
        round_cx(&pi_pow.mul(&gcx).mul(&npow), prec)
    };
    Ok((term(1, &g_lo), term(-1, &g_hi)))
}

/// `β_n(t) = -2·Re(first summand)`.
pub fn beta_entry(n: usize, t: &PrecReal, gamma: &dyn GammaEvaluator, prec: Precision) -> Result<PrecReal, GenError> {
    let (first, second) = beta_terms(n, t, gamma, prec)?;
    check_residue(n, &first, &second, gamma.guard_bits())?;
    Ok(first.re().scale_pow2(1).neg())
}

/// Fails when `|Im(first + second)| > 2^(g-p)·(|first| + |second|)`.
fn check_residue(n: usize, first: &PrecComplex, second: &PrecComplex, guard: u32) -> Result<(), GenError> {
    let bits = first.prec().bits();
    let im = Float::with_val(bits, first.im_float() + second.im_float()).abs();
    let size = Float::with_val(bits, first.modulus().as_float() + second.modulus().as_float());
    let shift = i32::try_from(bits).unwrap_or(i32::MAX) - i32::try_from(guard).unwrap_or(0);
    let tol = size >> shift;
    if im > tol {
        return Err(GenError::ImaginaryResidue { n });
    }
    Ok(())
}

/// `a_{n,j} = β_n(γ_j)` for `n, j = 1…N`.
pub fn beta_matrix(zeros: &ZetaZeros, n: usize, gamma: &dyn GammaEvaluator, prec: Precision) -> Result<MatrixBuffer<PrecReal>, GenError> {
    zeros.require(n)?;
    let mut cols: Vec<Vec<PrecReal>> = Vec::with_capacity(n);
    for g in &zeros.gammas[..n] {
        let col = (1..=n).map(|row| beta_entry(row, g, gamma, prec)).collect::<Result<_, _>>()?;
        cols.push(col);
    }
    Ok(MatrixBuffer::from_fn(n, |i, j| cols[j][i].clone()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Hilbert,
    RandomUniform,
    RandomIllcond,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Hilbert => "hilbert",
            Family::RandomUniform => "random_uniform",
            Family::RandomIllcond => "random_illcond",
        })
    }
}

impl FromStr for Family {
    type Err = GenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hilbert" => Ok(Family::Hilbert),
            "random_uniform" => Ok(Family::RandomUniform),
            "random_illcond" => Ok(Family::RandomIllcond),
            other => Err(GenError::UnknownFamily(other.to_string())),
        }
    }
}

/// Uniform draw from `(-1, 1)` carrying exactly `prec` random mantissa bits.
pub fn uniform_entry(rng: &mut impl RngCore, prec: Precision) -> PrecReal {
    let bits = prec.bits();
    let limbs = bits.div_ceil(64) as usize;
    loop {
        let raw: Vec<u64> = (0..limbs).map(|_| rng.next_u64()).collect();
        let mut m = Integer::from_digits(&raw, Order::Lsf);
        m >>= limbs as u32 * 64 - bits;
        if m == 0 {
            continue;
        }
        // x = m / 2^bits in (0,1); 2x - 1 = (m - 2^(bits-1)) / 2^(bits-1).
        m -= Integer::from(1) << (bits - 1);
        let mut f = Float::with_val(bits, &m);
        f >>= bits - 1;
        return PrecReal::from_float(f);
    }
}

pub fn synth_matrix(family: Family, n: usize, seed: u64, prec: Precision) -> MatrixBuffer<PrecReal> {
    assert!(n >= 1, "matrix dimension must be positive");
    let hilbert = |i: usize, j: usize| PrecReal::from_float(Float::with_val(prec.bits(), (i + j + 1) as u32).recip());
    match family {
        Family::Hilbert => MatrixBuffer::from_fn(n, hilbert),
        Family::RandomUniform => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            MatrixBuffer::from_fn(n, |_, _| uniform_entry(&mut rng, prec))
        }
        Family::RandomIllcond => {
            let r = synth_matrix(Family::RandomUniform, n, seed, prec);
            let h = MatrixBuffer::from_fn(n, hilbert);
            MatrixBuffer::from_fn(n, |i, j| {
                let mut acc = PrecReal::zero(prec);
                for k in 0..n {
                    acc = acc.add(&r.get(i, k).mul(h.get(k, j)));
                }
                acc
            })
        }
    }
}
