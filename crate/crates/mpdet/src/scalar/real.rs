use std::cmp::Ordering;

use rug::float::Special;
use rug::integer::Order;
use rug::ops::NegAssign;
use rug::{Assign, Float, Integer, Rational};

use super::{is_decimal_token, DecodeError, FloatScalar, Kind, Precision, Scalar, ScalarError};

/// MPFR real rounded to nearest at its own precision.
#[derive(Clone, Debug, PartialEq, PartialOrd)]
pub struct PrecReal(Float);

impl PrecReal {
    pub fn from_float(value: Float) -> Self {
        PrecReal(value)
    }

    /// Rounds `value` to `prec`.
    pub fn with_val<T>(prec: Precision, value: T) -> Self
    where
        Float: Assign<T>,
    {
        PrecReal(Float::with_val(prec.bits(), value))
    }

    pub fn as_float(&self) -> &Float {
        &self.0
    }

    pub fn into_float(self) -> Float {
        self.0
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64()
    }

    pub fn abs(&self) -> Self {
        PrecReal(self.0.clone().abs())
    }

    pub fn is_sign_negative(&self) -> bool {
        self.0.is_sign_negative()
    }
}

impl Scalar for PrecReal {
    fn zero_like(&self) -> Self {
        PrecReal(Float::new(self.0.prec()))
    }

    fn one_like(&self) -> Self {
        PrecReal(Float::with_val(self.0.prec(), 1))
    }

    fn precision(&self) -> Option<Precision> {
        Some(self.prec())
    }

    fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    fn neg(&self) -> Self {
        PrecReal(-self.0.clone())
    }

    fn add(&self, rhs: &Self) -> Self {
        PrecReal(Float::with_val(self.0.prec(), &self.0 + &rhs.0))
    }

    fn sub(&self, rhs: &Self) -> Self {
        PrecReal(Float::with_val(self.0.prec(), &self.0 - &rhs.0))
    }

    fn mul(&self, rhs: &Self) -> Self {
        PrecReal(Float::with_val(self.0.prec(), &self.0 * &rhs.0))
    }

    fn div(&self, rhs: &Self) -> Self {
        PrecReal(Float::with_val(self.0.prec(), &self.0 / &rhs.0))
    }

    fn sub_mul_assign(&mut self, a: &Self, b: &Self, scratch: &mut Self) {
        scratch.0.assign(&a.0 * &b.0);
        self.0 -= &scratch.0;
    }

    fn cmp_magnitude(&self, other: &Self) -> Ordering {
        self.0.cmp_abs(&other.0).unwrap_or(Ordering::Equal)
    }

    fn scale_pow2(&self, exp: i64) -> Self {
        let mut out = self.0.clone();
        shift(&mut out, exp);
        PrecReal(out)
    }

    fn exponent(&self) -> Option<i64> {
        self.0.get_exp().map(i64::from)
    }
}

fn shift(f: &mut Float, exp: i64) {
    let mut left = exp;
    while left != 0 {
        let step = left.clamp(i64::from(i32::MIN / 2), i64::from(i32::MAX / 2));
        *f <<= step as i32;
        left -= step;
    }
}

impl FloatScalar for PrecReal {
    const KIND: Kind = Kind::Real;

    fn zero(prec: Precision) -> Self {
        PrecReal(Float::new(prec.bits()))
    }

    fn one(prec: Precision) -> Self {
        PrecReal(Float::with_val(prec.bits(), 1))
    }

    fn prec(&self) -> Precision {
        Precision(self.0.prec())
    }

    fn from_rational(re: &Rational, prec: Precision) -> Self {
        PrecReal(Float::with_val(prec.bits(), re))
    }

    fn from_real(re: PrecReal) -> Self {
        re
    }

    fn parts(&self) -> (&Float, Option<&Float>) {
        (&self.0, None)
    }

    fn to_rationals(&self) -> (Rational, Rational) {
        (self.0.to_rational().expect("finite scalar"), Rational::new())
    }

    fn modulus(&self) -> PrecReal {
        self.abs()
    }

    fn round_to(&self, prec: Precision) -> Self {
        PrecReal(Float::with_val(prec.bits(), &self.0))
    }

    fn encode(&self, out: &mut Vec<u8>) {
        encode_float(&self.0, out);
    }

    fn decode(input: &mut &[u8], prec: Precision) -> Result<Self, DecodeError> {
        decode_float(input, prec).map(PrecReal)
    }

    fn to_decimal(&self, digits: usize) -> String {
        format_float(&self.0, digits)
    }

    fn parse_decimal(text: &str, prec: Precision) -> Result<Self, ScalarError> {
        let mut toks = text.split_whitespace();
        let (Some(tok), None) = (toks.next(), toks.next()) else {
            return Err(ScalarError::Parse(text.to_string()));
        };
        parse_float(tok, prec).map(PrecReal)
    }
}

pub(super) fn parse_float(tok: &str, prec: Precision) -> Result<Float, ScalarError> {
    if !is_decimal_token(tok) {
        return Err(ScalarError::Parse(tok.to_string()));
    }
    let parsed = Float::parse(tok).map_err(|_| ScalarError::Parse(tok.to_string()))?;
    Ok(Float::with_val(prec.bits(), parsed))
}

/// `d.ddd…e<exp>` with `digits` significant digits.
pub(super) fn format_float(f: &Float, digits: usize) -> String {
    let digits = digits.max(1);
    if f.is_zero() {
        return if f.is_sign_negative() { "-0.0e0" } else { "0.0e0" }.to_string();
    }
    let (neg, s, exp) = f.to_sign_string_exp(10, Some(digits));
    let exp = exp.expect("finite nonzero value has an exponent") - 1;
    let sign = if neg { "-" } else { "" };
    let (lead, rest) = s.split_at(1);
    if rest.is_empty() {
        format!("{sign}{lead}.0e{exp}")
    } else {
        format!("{sign}{lead}.{rest}e{exp}")
    }
}

/// Sign byte, i64 exponent, u32 limb count, little-endian u64 limbs.
pub(super) fn encode_float(f: &Float, out: &mut Vec<u8>) {
    out.push(u8::from(f.is_sign_negative()));
    if f.is_zero() {
        out.extend_from_slice(&0i64.to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes());
        return;
    }
    let (mantissa, exp) = f.to_integer_exp().expect("finite scalar");
    let limbs = mantissa.as_abs().to_digits::<u64>(Order::Lsf);
    out.extend_from_slice(&i64::from(exp).to_le_bytes());
    out.extend_from_slice(&(limbs.len() as u32).to_le_bytes());
    for limb in limbs {
        out.extend_from_slice(&limb.to_le_bytes());
    }
}

fn take<'a>(input: &mut &'a [u8], len: usize) -> Result<&'a [u8], DecodeError> {
    if input.len() < len {
        return Err(DecodeError::Truncated);
    }
    let (head, tail) = input.split_at(len);
    *input = tail;
    Ok(head)
}

pub(super) fn decode_float(input: &mut &[u8], prec: Precision) -> Result<Float, DecodeError> {
    let sign = take(input, 1)?[0];
    if sign > 1 {
        return Err(DecodeError::BadSign(sign));
    }
    let exp = i64::from_le_bytes(take(input, 8)?.try_into().unwrap());
    let count = u32::from_le_bytes(take(input, 4)?.try_into().unwrap());
    if count == 0 {
        let special = if sign == 1 { Special::NegZero } else { Special::Zero };
        return Ok(Float::with_val(prec.bits(), special));
    }
    if u64::from(count) * 64 > u64::from(prec.bits()) + 63 {
        return Err(DecodeError::MantissaTooWide { limbs: count, bits: prec.bits() });
    }
    let raw = take(input, count as usize * 8)?;
    let limbs: Vec<u64> = raw
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let mantissa = Integer::from_digits(&limbs, Order::Lsf);
    if mantissa.significant_bits() > prec.bits() {
        return Err(DecodeError::MantissaTooWide { limbs: count, bits: prec.bits() });
    }
    let exp = i32::try_from(exp).map_err(|_| DecodeError::BadExponent(exp))?;
    let mut f = Float::with_val(prec.bits(), &mantissa);
    f <<= exp;
    if sign == 1 {
        f.neg_assign();
    }
    Ok(f)
}
