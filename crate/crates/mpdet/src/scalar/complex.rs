use std::cmp::Ordering;

use rug::{Assign, Float, Rational};

use super::real::{decode_float, encode_float, format_float, parse_float};
use super::{DecodeError, FloatScalar, Kind, PrecReal, Precision, Scalar, ScalarError};

/// Complex number with MPFR parts of equal precision.
///
/// Products round each partial product and then the sum, so
/// `re = ∘(∘(ac) − ∘(bd))` and `im = ∘(∘(ad) + ∘(bc))`. Division multiplies by
/// the conjugate and divides both parts by the rounded `|y|²`.
#[derive(Clone, Debug, PartialEq)]
pub struct PrecComplex {
    re: Float,
    im: Float,
}

impl PrecComplex {
    /// Both parts must share a precision.
    pub fn new(re: PrecReal, im: PrecReal) -> Self {
        let re = re.into_float();
        let im = Float::with_val(re.prec(), im.into_float());
        PrecComplex { re, im }
    }

    pub fn from_floats(re: Float, im: Float) -> Self {
        let im = Float::with_val(re.prec(), im);
        PrecComplex { re, im }
    }

    pub fn re(&self) -> PrecReal {
        PrecReal::from_float(self.re.clone())
    }

    pub fn im(&self) -> PrecReal {
        PrecReal::from_float(self.im.clone())
    }

    pub fn re_float(&self) -> &Float {
        &self.re
    }

    pub fn im_float(&self) -> &Float {
        &self.im
    }

    pub fn conj(&self) -> Self {
        PrecComplex { re: self.re.clone(), im: -self.im.clone() }
    }

    fn norm_sqr(&self) -> Float {
        let p = self.re.prec();
        let mut a = Float::with_val(p, self.re.square_ref());
        let b = Float::with_val(p, self.im.square_ref());
        a += &b;
        a
    }
}

impl Scalar for PrecComplex {
    fn zero_like(&self) -> Self {
        let p = self.re.prec();
        PrecComplex { re: Float::new(p), im: Float::new(p) }
    }

    fn one_like(&self) -> Self {
        let p = self.re.prec();
        PrecComplex { re: Float::with_val(p, 1), im: Float::new(p) }
    }

    fn precision(&self) -> Option<Precision> {
        Some(self.prec())
    }

    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    fn neg(&self) -> Self {
        PrecComplex { re: -self.re.clone(), im: -self.im.clone() }
    }

    fn add(&self, rhs: &Self) -> Self {
        let p = self.re.prec();
        PrecComplex {
            re: Float::with_val(p, &self.re + &rhs.re),
            im: Float::with_val(p, &self.im + &rhs.im),
        }
    }

    fn sub(&self, rhs: &Self) -> Self {
        let p = self.re.prec();
        PrecComplex {
            re: Float::with_val(p, &self.re - &rhs.re),
            im: Float::with_val(p, &self.im - &rhs.im),
        }
    }

    fn mul(&self, rhs: &Self) -> Self {
        let mut out = self.zero_like();
        mul_into(&mut out, self, rhs);
        out
    }

    fn div(&self, rhs: &Self) -> Self {
        let mut out = self.zero_like();
        mul_into(&mut out, self, &rhs.conj());
        let d = rhs.norm_sqr();
        out.re /= &d;
        out.im /= &d;
        out
    }

    fn sub_mul_assign(&mut self, a: &Self, b: &Self, scratch: &mut Self) {
        scratch.re.assign(&a.re * &b.re);
        scratch.im.assign(&a.im * &b.im);
        scratch.re -= &scratch.im;
        self.re -= &scratch.re;
        scratch.re.assign(&a.re * &b.im);
        scratch.im.assign(&a.im * &b.re);
        scratch.re += &scratch.im;
        self.im -= &scratch.re;
    }

    fn cmp_magnitude(&self, other: &Self) -> Ordering {
        self.norm_sqr().partial_cmp(&other.norm_sqr()).unwrap_or(Ordering::Equal)
    }

    fn scale_pow2(&self, exp: i64) -> Self {
        PrecComplex {
            re: PrecReal::from_float(self.re.clone()).scale_pow2(exp).into_float(),
            im: PrecReal::from_float(self.im.clone()).scale_pow2(exp).into_float(),
        }
    }

    fn exponent(&self) -> Option<i64> {
        match (self.re.get_exp(), self.im.get_exp()) {
            (Some(a), Some(b)) => Some(i64::from(a.max(b))),
            (a, b) => a.or(b).map(i64::from),
        }
    }
}

fn mul_into(out: &mut PrecComplex, x: &PrecComplex, y: &PrecComplex) {
    let p = out.re.prec();
    out.re.assign(&x.re * &y.re);
    let bd = Float::with_val(p, &x.im * &y.im);
    out.re -= &bd;
    out.im.assign(&x.re * &y.im);
    let bc = Float::with_val(p, &x.im * &y.re);
    out.im += &bc;
}

impl FloatScalar for PrecComplex {
    const KIND: Kind = Kind::Complex;

    fn zero(prec: Precision) -> Self {
        PrecComplex { re: Float::new(prec.bits()), im: Float::new(prec.bits()) }
    }

    fn one(prec: Precision) -> Self {
        PrecComplex { re: Float::with_val(prec.bits(), 1), im: Float::new(prec.bits()) }
    }

    fn prec(&self) -> Precision {
        Precision(self.re.prec())
    }

    fn from_rational(re: &Rational, prec: Precision) -> Self {
        PrecComplex { re: Float::with_val(prec.bits(), re), im: Float::new(prec.bits()) }
    }

    fn from_real(re: PrecReal) -> Self {
        let re = re.into_float();
        let im = Float::new(re.prec());
        PrecComplex { re, im }
    }

    fn parts(&self) -> (&Float, Option<&Float>) {
        (&self.re, Some(&self.im))
    }

    fn to_rationals(&self) -> (Rational, Rational) {
        (
            self.re.to_rational().expect("finite scalar"),
            self.im.to_rational().expect("finite scalar"),
        )
    }

    fn modulus(&self) -> PrecReal {
        PrecReal::from_float(Float::with_val(self.re.prec(), self.re.hypot_ref(&self.im)))
    }

    fn round_to(&self, prec: Precision) -> Self {
        PrecComplex {
            re: Float::with_val(prec.bits(), &self.re),
            im: Float::with_val(prec.bits(), &self.im),
        }
    }

    fn encode(&self, out: &mut Vec<u8>) {
        encode_float(&self.re, out);
        encode_float(&self.im, out);
    }

    fn decode(input: &mut &[u8], prec: Precision) -> Result<Self, DecodeError> {
        let re = decode_float(input, prec)?;
        let im = decode_float(input, prec)?;
        Ok(PrecComplex { re, im })
    }

    fn to_decimal(&self, digits: usize) -> String {
        format!("{} {}", format_float(&self.re, digits), format_float(&self.im, digits))
    }

    fn parse_decimal(text: &str, prec: Precision) -> Result<Self, ScalarError> {
        let mut toks = text.split_whitespace();
        let (Some(re), Some(im), None) = (toks.next(), toks.next(), toks.next()) else {
            return Err(ScalarError::Parse(text.to_string()));
        };
        Ok(PrecComplex { re: parse_float(re, prec)?, im: parse_float(im, prec)? })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(bits: u32) -> Precision {
        Precision::new(bits).unwrap()
    }

    fn arb_complex() -> impl Strategy<Value = PrecComplex> {
        (any::<i64>(), any::<i64>(), 1u32..1000, -60i32..60).prop_map(|(a, b, d, e)| {
            let mut re = Float::with_val(192, a) / Float::with_val(192, d);
            let im = Float::with_val(192, b) / Float::with_val(192, d + 2);
            re <<= e;
            PrecComplex::from_floats(re, im)
        })
    }

    #[test]
    fn division_inverts_multiplication() {
        let x = PrecComplex::parse_decimal("1.5 -2.25", p(256)).unwrap();
        let y = PrecComplex::parse_decimal("-0.3 7", p(256)).unwrap();
        let back = x.mul(&y).div(&y);
        assert!(crate::scalar::agree_digits(&back, &x) >= 75);
    }

    #[test]
    fn sub_mul_matches_mul() {
        let x = PrecComplex::parse_decimal("1.1 2.2", p(128)).unwrap();
        let y = PrecComplex::parse_decimal("-3.3 0.4", p(128)).unwrap();
        let mut acc = PrecComplex::parse_decimal("5 6", p(128)).unwrap();
        let expect = acc.sub(&x.mul(&y));
        let mut scratch = acc.zero_like();
        acc.sub_mul_assign(&x, &y, &mut scratch);
        assert_eq!(acc, expect);
    }

    proptest! {
        #[test]
        fn conjugation_symmetry(x in arb_complex(), y in arb_complex()) {
            prop_assert_eq!(x.mul(&y).conj(), x.conj().mul(&y.conj()));
        }

        #[test]
        fn encode_round_trip(x in arb_complex()) {
            let mut buf = Vec::new();
            x.encode(&mut buf);
            prop_assert_eq!(PrecComplex::decode(&mut buf.as_slice(), p(192)).unwrap(), x);
        }
    }
}
