use std::cmp::Ordering;

use rug::{Assign, Rational};

use super::{Precision, Scalar};

/// Exact rational scalar; lets the float algorithms run without rounding.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExactRational(pub Rational);

impl ExactRational {
    pub fn from_ratio(num: i64, den: i64) -> Self {
        ExactRational(Rational::from((num, den)))
    }
}

impl From<Rational> for ExactRational {
    fn from(r: Rational) -> Self {
        ExactRational(r)
    }
}

impl Scalar for ExactRational {
    fn zero_like(&self) -> Self {
        ExactRational(Rational::new())
    }

    fn one_like(&self) -> Self {
        ExactRational(Rational::from(1))
    }

    fn precision(&self) -> Option<Precision> {
        None
    }

    fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    fn neg(&self) -> Self {
        ExactRational(Rational::from(-&self.0))
    }

    fn add(&self, rhs: &Self) -> Self {
        ExactRational(Rational::from(&self.0 + &rhs.0))
    }

    fn sub(&self, rhs: &Self) -> Self {
        ExactRational(Rational::from(&self.0 - &rhs.0))
    }

    fn mul(&self, rhs: &Self) -> Self {
        ExactRational(Rational::from(&self.0 * &rhs.0))
    }

    fn div(&self, rhs: &Self) -> Self {
        ExactRational(Rational::from(&self.0 / &rhs.0))
    }

    fn sub_mul_assign(&mut self, a: &Self, b: &Self, scratch: &mut Self) {
        scratch.0.assign(&a.0 * &b.0);
        self.0 -= &scratch.0;
    }

    fn cmp_magnitude(&self, other: &Self) -> Ordering {
        self.0.cmp_abs(&other.0)
    }

    fn scale_pow2(&self, exp: i64) -> Self {
        let shift = u32::try_from(exp.unsigned_abs()).expect("shift fits u32");
        let mut r = self.0.clone();
        if exp >= 0 {
            r <<= shift;
        } else {
            r >>= shift;
        }
        ExactRational(r)
    }

    fn exponent(&self) -> Option<i64> {
        if self.0.is_zero() {
            return None;
        }
        let num = i64::from(self.0.numer().significant_bits());
        let den = i64::from(self.0.denom().significant_bits());
        Some(num - den + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        // Lowest terms and cross-multiplication agree for small inputs.
        #[test]
        fn addition_is_exact(a in -1000i64..1000, b in 1i64..1000, c in -1000i64..1000, d in 1i64..1000) {
            let sum = ExactRational::from_ratio(a, b).add(&ExactRational::from_ratio(c, d));
            let num = i128::from(a) * i128::from(d) + i128::from(c) * i128::from(b);
            let den = i128::from(b) * i128::from(d);
            prop_assert_eq!(sum.0.numer().to_i128().unwrap() * den, num * sum.0.denom().to_i128().unwrap());
            prop_assert!(*sum.0.denom() > 0);
            let g = rug::Integer::from(sum.0.numer().gcd_ref(sum.0.denom()));
            prop_assert_eq!(g, 1);
        }

        #[test]
        fn product_is_exact(a in -1000i64..1000, b in 1i64..1000, c in -1000i64..1000, d in 1i64..1000) {
            let prod = ExactRational::from_ratio(a, b).mul(&ExactRational::from_ratio(c, d));
            prop_assert_eq!(prod.0, Rational::from((a * c, b * d)));
        }
    }

    #[test]
    fn pow2_scaling() {
        let x = ExactRational::from_ratio(3, 5);
        assert_eq!(x.scale_pow2(3).scale_pow2(-3), x);
        assert_eq!(x.scale_pow2(2), ExactRational::from_ratio(12, 5));
    }
}
