mod common;

use common::p;
use mpdet::parexec::{pack_row, unpack_row, WireError};
use mpdet::{FloatScalar, PrecComplex, PrecReal, Precision};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rug::integer::Order;
use rug::{Float, Integer};

fn random_float(rng: &mut impl Rng, prec: Precision) -> Float {
    let bits = prec.bits();
    match rng.gen_range(0..20) {
        0 => return Float::with_val(bits, 0),
        1 => return -Float::with_val(bits, 0),
        _ => {}
    }
    let limbs: Vec<u64> = (0..bits.div_ceil(64)).map(|_| rng.gen()).collect();
    let mantissa = Integer::from_digits(&limbs, Order::Lsf);
    let mut x = Float::with_val(bits, mantissa);
    x >>= bits as i32;
    x <<= rng.gen_range(-40_000i32..40_000);
    if rng.gen() {
        x = -x;
    }
    x
}

fn random_reals(rng: &mut impl Rng, len: usize, prec: Precision) -> Vec<PrecReal> {
    (0..len).map(|_| PrecReal::from_float(random_float(rng, prec))).collect()
}

fn same_bits<S: FloatScalar>(a: &[S], b: &[S]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            let (xr, xi) = x.parts();
            let (yr, yi) = y.parts();
            let eq = |u: &Float, v: &Float| u.prec() == v.prec() && u.is_sign_negative() == v.is_sign_negative() && u == v;
            eq(xr, yr) && xi.zip(yi).map_or(xi.is_none() && yi.is_none(), |(u, v)| eq(u, v))
        })
}

#[test]
fn ten_thousand_reals_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut total = 0;
    for (step, bits) in [64u32, 113, 256, 1000, 4096].into_iter().cycle().take(100).enumerate() {
        let prec = p(bits);
        let row = random_reals(&mut rng, 100, prec);
        let bytes = pack_row(step as u32, &row);
        let (got_step, got) = unpack_row::<PrecReal>(&bytes, prec).unwrap();
        assert_eq!(got_step, step as u32);
        assert!(same_bits(&row, &got), "step {step} at {bits} bits");
        total += row.len();
    }
    assert_eq!(total, 10_000);
}

#[test]
fn complex_rows_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for bits in [64u32, 300, 2048] {
        let prec = p(bits);
        let row: Vec<PrecComplex> =
            (0..200).map(|_| PrecComplex::from_floats(random_float(&mut rng, prec), random_float(&mut rng, prec))).collect();
        let (_, got) = unpack_row::<PrecComplex>(&pack_row(3, &row), prec).unwrap();
        assert!(same_bits(&row, &got));
    }
}

#[test]
fn empty_row_round_trips() {
    let (step, got) = unpack_row::<PrecReal>(&pack_row::<PrecReal>(9, &[]), p(64)).unwrap();
    assert_eq!(step, 9);
    assert!(got.is_empty());
}

#[test]
fn every_single_bit_flip_is_detected() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let prec = p(192);
    let row = random_reals(&mut rng, 6, prec);
    let bytes = pack_row(1, &row);
    for bit in 0..bytes.len() * 8 {
        let mut bad = bytes.clone();
        bad[bit / 8] ^= 1 << (bit % 8);
        assert!(
            matches!(unpack_row::<PrecReal>(&bad, prec), Err(WireError::CorruptPayload(_))),
            "flip of bit {bit} went unnoticed"
        );
    }
}

#[test]
fn truncation_is_detected() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let prec = p(128);
    let bytes = pack_row(0, &random_reals(&mut rng, 4, prec));
    for len in 0..bytes.len() {
        assert!(unpack_row::<PrecReal>(&bytes[..len], prec).is_err(), "prefix of {len} bytes accepted");
    }
}
