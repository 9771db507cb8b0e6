//! Complex Gamma function at arbitrary precision.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rug::float::Constant;
use rug::ops::Pow;
use rug::Float;
use thiserror::Error;

use crate::scalar::{PrecComplex, Precision};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GammaError {
    #[error("Gamma has a pole at {0}")]
    Pole(String),
    #[error("Gamma evaluation did not produce a finite value")]
    NonFinite,
}

/// Evaluates `Γ(z)` with relative error at most `2^(guard_bits - p)`.
pub trait GammaEvaluator: Send + Sync {
    fn gamma(&self, z: &PrecComplex, prec: Precision) -> Result<PrecComplex, GammaError>;

    fn guard_bits(&self) -> u32;
}

/// Spouge's approximation
///
/// ```text
/// Γ(z+1) = (z+a)^(z+1/2) e^-(z+a) [c_0 + Σ_{k=1}^{a-1} c_k/(z+k)]
/// c_0 = √(2π),  c_k = (-1)^(k-1)/(k-1)! · (a-k)^(k-1/2) · e^(a-k)
/// ```
///
/// whose relative error for `Re z > 0` is below `(2π)^-(a+1/2) / √a`.
/// The coefficients alternate and peak near `e^a`, so they are summed with
/// about `1.44·a` extra bits.
pub struct Spouge {
    guard_bits: u32,
    cache: Mutex<HashMap<u32, Arc<Coefficients>>>,
}

struct Coefficients {
    work_bits: u32,
    c: Vec<Float>,
}

impl Default for Spouge {
    fn default() -> Self {
        Spouge::new(32)
    }
}

impl Spouge {
    pub fn new(guard_bits: u32) -> Self {
        Spouge { guard_bits, cache: Mutex::new(HashMap::new()) }
    }

    /// Number of terms `a` for a target of `bits` correct bits.
    pub fn term_count(bits: u32) -> u32 {
        let ratio = std::f64::consts::LN_2 / (2.0 * std::f64::consts::PI).ln();
        (f64::from(bits) * ratio).ceil() as u32 + 1
    }

    fn coefficients(&self, prec: Precision) -> Arc<Coefficients> {
        let target = prec.bits() + self.guard_bits;
        let mut cache = self.cache.lock().expect("coefficient cache poisoned");
        cache.entry(target).or_insert_with(|| Arc::new(Self::build(target))).clone()
    }

    fn build(target: u32) -> Coefficients {
        let a = Self::term_count(target);
        let work_bits = target + (1.45 * f64::from(a)).ceil() as u32 + 64;
        let mut c = Vec::with_capacity(a as usize);
        let two_pi = Float::with_val(work_bits, Constant::Pi) * 2u32;
        c.push(two_pi.sqrt());
        let mut factorial = Float::with_val(work_bits, 1);
        for k in 1..a {
            if k > 1 {
                factorial *= k - 1;
            }
            let base = Float::with_val(work_bits, a - k);
            let power = base.clone().pow(Float::with_val(work_bits, k) - 0.5f64);
            let mut ck = power * base.exp() / &factorial;
            if k % 2 == 0 {
                ck = -ck;
            }
            c.push(ck);
        }
        Coefficients { work_bits, c }
    }

    /// `Γ(z+1)` for `Re z > 0` at the cached working precision.
    fn gamma_plus_one(&self, re: &Float, im: &Float, coef: &Coefficients) -> Cx {
        let w = coef.work_bits;
        let a = coef.c.len() as u32;
        let z = Cx::new(Float::with_val(w, re), Float::with_val(w, im));
        let mut sum = Cx::new(coef.c[0].clone(), Float::new(w));
        for (k, ck) in coef.c.iter().enumerate().skip(1) {
            let denom = z.add_real(k as u32);
            sum = sum.add(&denom.recip().scale(ck));
        }
        let za = z.add_real(a);
        let half = Cx::new(Float::with_val(w, &z.re + 0.5f64), z.im.clone());
        // (z+a)^(z+1/2) e^-(z+a) = exp((z+1/2) ln(z+a) - (z+a))
        let expo = half.mul(&za.ln()).sub(&za);
        expo.exp().mul(&sum)
    }
}

impl GammaEvaluator for Spouge {
    fn gamma(&self, z: &PrecComplex, prec: Precision) -> Result<PrecComplex, GammaError> {
        let coef = self.coefficients(prec);
        let w = coef.work_bits;
        let mut re = Float::with_val(w, z.re_float());
        let im = Float::with_val(w, z.im_float());
        if im.is_zero() && re <= 0 && re.is_integer() {
            return Err(GammaError::Pole(re.to_string()));
        }
        // Γ(z) = Γ(z+1+s) / (z (z+1) ... (z+s)) moves the argument to Re > 0.
        let mut divisor = Cx::new(Float::with_val(w, 1), Float::new(w));
        let mut arg = Cx::new(re.clone(), im.clone());
        while re <= 0 {
            divisor = divisor.mul(&arg);
            re += 1;
            arg = Cx::new(re.clone(), im.clone());
        }
        // Spouge yields Γ(arg + 1); divide by arg to get Γ(arg).
        divisor = divisor.mul(&arg);
        let value = self.gamma_plus_one(&arg.re, &arg.im, &coef).div(&divisor);
        if !value.re.is_finite() || !value.im.is_finite() {
            return Err(GammaError::NonFinite);
        }
        Ok(PrecComplex::from_floats(
            Float::with_val(prec.bits(), &value.re),
            Float::with_val(prec.bits(), &value.im),
        ))
    }

    fn guard_bits(&self) -> u32 {
        self.guard_bits
    }
}

/// Minimal complex arithmetic on MPFR reals at a fixed working precision.
#[derive(Clone, Debug)]
pub(crate) struct Cx {
    pub(crate) re: Float,
    pub(crate) im: Float,
}

impl Cx {
    pub(crate) fn new(re: Float, im: Float) -> Self {
        Cx { re, im }
    }

    fn prec(&self) -> u32 {
        self.re.prec()
    }

    pub(crate) fn from_polar(r: Float, theta: &Float) -> Self {
        let p = r.prec();
        let (s, c) = Float::with_val(p, theta).sin_cos(Float::new(p));
        Cx { re: Float::with_val(p, &r * &c), im: Float::with_val(p, &r * &s) }
    }

    fn add(&self, o: &Cx) -> Cx {
        let p = self.prec();
        Cx { re: Float::with_val(p, &self.re + &o.re), im: Float::with_val(p, &self.im + &o.im) }
    }

    fn sub(&self, o: &Cx) -> Cx {
        let p = self.prec();
        Cx { re: Float::with_val(p, &self.re - &o.re), im: Float::with_val(p, &self.im - &o.im) }
    }

    fn add_real(&self, k: u32) -> Cx {
        Cx { re: Float::with_val(self.prec(), &self.re + k), im: self.im.clone() }
    }

    fn scale(&self, s: &Float) -> Cx {
        let p = self.prec();
        Cx { re: Float::with_val(p, &self.re * s), im: Float::with_val(p, &self.im * s) }
    }

    pub(crate) fn mul(&self, o: &Cx) -> Cx {
        let p = self.prec();
        let re = Float::with_val(p, &self.re * &o.re) - Float::with_val(p, &self.im * &o.im);
        let im = Float::with_val(p, &self.re * &o.im) + Float::with_val(p, &self.im * &o.re);
        Cx { re, im }
    }

    fn norm_sqr(&self) -> Float {
        let p = self.prec();
        Float::with_val(p, self.re.square_ref()) + Float::with_val(p, self.im.square_ref())
    }

    fn recip(&self) -> Cx {
        let d = self.norm_sqr();
        Cx { re: Float::with_val(self.prec(), &self.re / &d), im: -Float::with_val(self.prec(), &self.im / &d) }
    }

    fn div(&self, o: &Cx) -> Cx {
        self.mul(&o.recip())
    }

    fn ln(&self) -> Cx {
        let p = self.prec();
        let modulus = Float::with_val(p, self.re.hypot_ref(&self.im));
        Cx { re: modulus.ln(), im: Float::with_val(p, self.im.atan2_ref(&self.re)) }
    }

    fn exp(&self) -> Cx {
        Cx::from_polar(Float::with_val(self.prec(), self.re.exp_ref()), &self.im)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{agree_digits, FloatScalar, PrecReal, Scalar};

    fn p(bits: u32) -> Precision {
        Precision::new(bits).unwrap()
    }

    fn cx(re: f64, im: f64, prec: Precision) -> PrecComplex {
        PrecComplex::from_floats(Float::with_val(prec.bits(), re), Float::with_val(prec.bits(), im))
    }

    #[test]
    fn real_arguments_match_mpfr() {
        let g = Spouge::default();
        for bits in [64u32, 256, 1024] {
            let prec = p(bits);
            for x in [0.25f64, 0.5, 1.0, 3.7, 10.0, -2.5] {
                let got = g.gamma(&cx(x, 0.0, prec), prec).unwrap();
                let want = PrecComplex::from_real(PrecReal::from_float(Float::with_val(bits, x).gamma()));
                let digits = agree_digits(&got, &want);
                let need = ((bits - 40) as f64 * std::f64::consts::LOG10_2) as u64;
                assert!(digits >= need, "Γ({x}) at {bits} bits: {digits} < {need}");
            }
        }
    }

    #[test]
    fn poles_rejected() {
        let g = Spouge::default();
        assert!(matches!(g.gamma(&cx(-3.0, 0.0, p(128)), p(128)), Err(GammaError::Pole(_))));
    }

    #[test]
    fn reflection_identities() {
        // |Γ(1/2+iy)|² = π/cosh(πy) and Γ(1+iy)Γ(1-iy) = πy/sinh(πy).
        let g = Spouge::default();
        let prec = p(512);
        let w = 512;
        for y in [0.5f64, 7.0, 21.0] {
            let v = g.gamma(&cx(0.5, y, prec), prec).unwrap();
            let lhs = v.mul(&v.conj());
            let pi = Float::with_val(w, Constant::Pi);
            let rhs = Float::with_val(w, &pi / Float::with_val(w, &pi * y).cosh());
            assert!(agree_digits(&lhs, &PrecComplex::from_real(PrecReal::from_float(rhs))) >= 140);

            let a = g.gamma(&cx(1.0, y, prec), prec).unwrap();
            let b = g.gamma(&cx(1.0, -y, prec), prec).unwrap();
            let piy = Float::with_val(w, &pi * y);
            let rhs = Float::with_val(w, &piy / Float::with_val(w, piy.sinh_ref()));
            assert!(agree_digits(&a.mul(&b), &PrecComplex::from_real(PrecReal::from_float(rhs))) >= 140);
        }
    }

    #[test]
    fn quarter_line_value() {
        // Γ(1/4 - 7i) from an independent 50-digit evaluation.
        let g = Spouge::default();
        let prec = p(256);
        let want = PrecComplex::parse_decimal(
            "2.58200350940334180802727652238390664641986827876229304114067e-5 1.37038694976761684753741449573716044420221991347593160422503e-6",
            prec,
        )
        .unwrap();
        let got = g.gamma(&cx(0.25, -7.0, prec), prec).unwrap();
        assert!(agree_digits(&got, &want) >= 45);
    }
}
