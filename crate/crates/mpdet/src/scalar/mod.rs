//! Arbitrary-precision scalars.
//!
//! Every algorithm in the crate is generic over [`Scalar`]. The two binary
//! floating-point kinds, [`PrecReal`] and [`PrecComplex`], are backed by MPFR
//! and carry their precision with them; they also implement [`FloatScalar`],
//! which adds conversion, encoding and formatting. [`ExactRational`] runs the
//! same elimination code in exact arithmetic and is what the tests use to pin
//! the minor-normalization convention.

mod complex;
mod exact;
mod real;

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rug::Float;
use thiserror::Error;

pub use complex::PrecComplex;
pub use exact::ExactRational;
pub use real::PrecReal;
pub use rug::Rational;

/// Value returned by [`agree_digits`] when both inputs are exactly equal.
pub const AGREE_CEILING: u64 = 1_000_000;

const LOG10_2: f64 = std::f64::consts::LOG10_2;

/// Number of mantissa bits shared by every scalar in one computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Precision(u32);

impl Precision {
    pub const MIN_BITS: u32 = 64;

    pub fn new(bits: u32) -> Result<Self, ScalarError> {
        if bits < Self::MIN_BITS {
            return Err(ScalarError::PrecisionTooLow(bits));
        }
        Ok(Precision(bits))
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    /// Decimal digits carried by the mantissa, rounded down.
    pub fn decimal_digits(self) -> usize {
        (f64::from(self.0) * LOG10_2).floor() as usize
    }

    /// Decimal digits needed so that printing and re-parsing is lossless.
    pub fn round_trip_digits(self) -> usize {
        1 + (f64::from(self.0) * LOG10_2).ceil() as usize
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Real or complex entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    Real,
    Complex,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Real => "real",
            Kind::Complex => "complex",
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            Kind::Real => 0,
            Kind::Complex => 1,
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Kind {
    type Err = ScalarError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "real" => Ok(Kind::Real),
            "complex" => Ok(Kind::Complex),
            other => Err(ScalarError::UnknownKind(other.to_string())),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScalarError {
    #[error("precision must be at least 64 bits, got {0}")]
    PrecisionTooLow(u32),
    #[error("malformed scalar {0:?}")]
    Parse(String),
    #[error("unknown scalar kind {0:?}")]
    UnknownKind(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("truncated scalar record")]
    Truncated,
    #[error("invalid sign byte {0}")]
    BadSign(u8),
    #[error("mantissa of {limbs} limbs does not fit {bits} bits")]
    MantissaTooWide { limbs: u32, bits: u32 },
    #[error("exponent {0} out of range")]
    BadExponent(i64),
}

/// Field arithmetic needed by the elimination routines.
///
/// Binary operations round to the precision of `self`.
pub trait Scalar: Clone + fmt::Debug + Send + Sync + 'static {
    fn zero_like(&self) -> Self;
    fn one_like(&self) -> Self;
    /// `None` for exact scalars.
    fn precision(&self) -> Option<Precision>;
    fn is_zero(&self) -> bool;
    fn neg(&self) -> Self;
    fn add(&self, rhs: &Self) -> Self;
    fn sub(&self, rhs: &Self) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    fn div(&self, rhs: &Self) -> Self;
    /// `self = self - a*b`, with the product rounded before the subtraction.
    ///
    /// This is the only update the elimination kernels use, so every executor
    /// that calls it in the same per-entry order produces identical bits.
    fn sub_mul_assign(&mut self, a: &Self, b: &Self, scratch: &mut Self);
    /// Compares magnitudes; used for pivot selection only.
    fn cmp_magnitude(&self, other: &Self) -> Ordering;
    /// Multiplies by `2^exp` exactly.
    fn scale_pow2(&self, exp: i64) -> Self;
    /// Binary exponent of the largest component, `None` for zero.
    fn exponent(&self) -> Option<i64>;
}

/// Scalars with an MPFR representation.
pub trait FloatScalar: Scalar + PartialEq {
    const KIND: Kind;

    fn zero(prec: Precision) -> Self;
    fn one(prec: Precision) -> Self;
    fn prec(&self) -> Precision;
    fn from_rational(re: &Rational, prec: Precision) -> Self;
    fn from_real(re: PrecReal) -> Self;
    /// Real and imaginary parts (the latter `None` for real scalars).
    fn parts(&self) -> (&Float, Option<&Float>);
    /// Exact rational value of the real and imaginary parts.
    fn to_rationals(&self) -> (Rational, Rational);
    fn modulus(&self) -> PrecReal;
    fn round_to(&self, prec: Precision) -> Self;
    fn encode(&self, out: &mut Vec<u8>);
    fn decode(input: &mut &[u8], prec: Precision) -> Result<Self, DecodeError>;
    /// Whitespace-separated decimal tokens in scientific notation.
    fn to_decimal(&self, digits: usize) -> String;
    fn parse_decimal(text: &str, prec: Precision) -> Result<Self, ScalarError>;
}

/// A parsed scalar of either kind.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyScalar {
    Real(PrecReal),
    Complex(PrecComplex),
}

/// Parses a decimal scalar, rounding to nearest at `prec`.
///
/// Real input is one token, complex input two tokens (`<re> <im>`).
pub fn parse_scalar(text: &str, prec: Precision, kind: Kind) -> Result<AnyScalar, ScalarError> {
    match kind {
        Kind::Real => PrecReal::parse_decimal(text, prec).map(AnyScalar::Real),
        Kind::Complex => PrecComplex::parse_decimal(text, prec).map(AnyScalar::Complex),
    }
}

/// Number of coinciding leading decimal digits of `a` and `b`.
///
/// `floor(-log10(|a-b| / max(|a|,|b|)))`, 0 once the relative gap reaches 1
/// (which covers opposite signs), and [`AGREE_CEILING`] on exact equality.
pub fn agree_digits<S: FloatScalar>(a: &S, b: &S) -> u64 {
    agree_digits_with_ceiling(a, b, AGREE_CEILING)
}

pub fn agree_digits_with_ceiling<S: FloatScalar>(a: &S, b: &S, ceiling: u64) -> u64 {
    let prec = a.prec().bits().max(b.prec().bits()) + 64;
    let (are, aim) = a.parts();
    let (bre, bim) = b.parts();
    let dre = Float::with_val(prec, are - bre);
    let diff = match (aim, bim) {
        (Some(ai), Some(bi)) => {
            let dim = Float::with_val(prec, ai - bi);
            dre.hypot(&dim)
        }
        _ => dre.abs(),
    };
    if diff.is_zero() {
        return ceiling;
    }
    let scale = a.modulus().into_float().max(b.modulus().as_float());
    let rel = Float::with_val(64, &diff / &scale);
    if rel >= 1 {
        return 0;
    }
    let digits = Float::with_val(64, -rel.log10()).floor();
    digits.to_f64().min(ceiling as f64) as u64
}

/// Checks the `[-+]?digits[.digits][(e|E)[-+]?digits]` grammar.
pub(crate) fn is_decimal_token(tok: &str) -> bool {
    fn digits(s: &[u8]) -> usize {
        s.iter().take_while(|c| c.is_ascii_digit()).count()
    }
    let b = tok.as_bytes();
    let mut i = 0;
    if i < b.len() && (b[i] == b'-' || b[i] == b'+') {
        i += 1;
    }
    let d = digits(&b[i..]);
    if d == 0 {
        return false;
    }
    i += d;
    if i < b.len() && b[i] == b'.' {
        i += 1;
        let d = digits(&b[i..]);
        if d == 0 {
            return false;
        }
        i += d;
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        i += 1;
        if i < b.len() && (b[i] == b'-' || b[i] == b'+') {
            i += 1;
        }
        let d = digits(&b[i..]);
        if d == 0 {
            return false;
        }
        i += d;
    }
    i == b.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(bits: u32) -> Precision {
        Precision::new(bits).unwrap()
    }

    #[test]
    fn precision_floor() {
        assert!(Precision::new(63).is_err());
        assert_eq!(p(64).bits(), 64);
        assert_eq!(p(256).decimal_digits(), 77);
    }

    #[test]
    fn grammar() {
        for ok in ["1", "-1.5", "+0.25e-3", "12E7", "3.0e+2"] {
            assert!(is_decimal_token(ok), "{ok}");
        }
        for bad in ["", "-", ".5", "1.", "1e", "1.5.2", "abc", "1e+", "0x10", "1 2"] {
            assert!(!is_decimal_token(bad), "{bad}");
        }
    }

    #[test]
    fn parse_examples() {
        let AnyScalar::Real(x) = parse_scalar("1.5", p(64), Kind::Real).unwrap() else {
            panic!()
        };
        assert_eq!(x.to_rationals().0, Rational::from((3, 2)));

        let AnyScalar::Real(x) = parse_scalar("0.1", p(256), Kind::Real).unwrap() else {
            panic!()
        };
        let nearest = Float::with_val(256, &Rational::from((1, 10)));
        assert_eq!(x.as_float(), &nearest);

        let AnyScalar::Complex(z) = parse_scalar("-2 3", p(128), Kind::Complex).unwrap() else {
            panic!()
        };
        assert_eq!(z.re().to_rationals().0, Rational::from(-2));
        assert_eq!(z.im().to_rationals().0, Rational::from(3));

        assert!(parse_scalar("1.2.3", p(64), Kind::Real).is_err());
        assert!(parse_scalar("1", p(64), Kind::Complex).is_err());
        assert!(parse_scalar("1 2", p(64), Kind::Real).is_err());
    }

    #[test]
    fn agree_digits_examples() {
        let r = |s: &str| PrecReal::parse_decimal(s, p(256)).unwrap();
        assert_eq!(agree_digits(&r("1.23456"), &r("1.23499")), 3);
        assert_eq!(agree_digits(&r("7"), &r("7")), AGREE_CEILING);
        assert_eq!(agree_digits(&r("1"), &r("-1")), 0);
        assert_eq!(agree_digits_with_ceiling(&r("2"), &r("2"), 50), 50);
        assert_eq!(agree_digits(&r("1e-300"), &r("1.0001e-300")), 4);
    }

    #[test]
    fn agree_digits_mixed_precision() {
        let hi = PrecReal::parse_decimal("0.1", p(1024)).unwrap();
        let lo = hi.round_to(p(128));
        let d = agree_digits(&lo, &hi);
        assert!((37..=39).contains(&d), "{d}");
        assert_eq!(d, agree_digits(&hi, &lo));
    }

    #[test]
    fn agree_digits_complex() {
        let a = PrecComplex::parse_decimal("1 1", p(128)).unwrap();
        let b = PrecComplex::parse_decimal("1 1.000001", p(128)).unwrap();
        assert_eq!(agree_digits(&a, &b), 6);
    }
}
