#![allow(dead_code)]

use mpdet::oracle::{det_cofactor, RationalMatrix};
use mpdet::{ExactRational, MatrixBuffer, Precision};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rug::Rational;

pub fn p(bits: u32) -> Precision {
    Precision::new(bits).unwrap()
}

/// Random `num/den` entries with `|num| <= 20`, `1 <= den <= 9`, redrawn
/// until every leading block is nonsingular.
pub fn random_rational(n: usize, seed: u64) -> RationalMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let m = RationalMatrix::from_fn(n, |_, _| Rational::from((rng.gen_range(-20i64..=20), rng.gen_range(1i64..=9))));
        if (1..=n).all(|k| !det_cofactor(&m.leading(k)).unwrap().is_zero()) {
            return m;
        }
    }
}

pub fn exact_buffer(m: &RationalMatrix) -> MatrixBuffer<ExactRational> {
    MatrixBuffer::from_fn(m.dim(), |i, j| ExactRational(m.get(i, j).clone()))
}
