mod common;

use std::path::Path;

use common::p;
use mpdet::elim::{eliminate, ElimOptions};
use mpdet::gamma::{GammaEvaluator, Spouge};
use mpdet::genmat::{beta_entry, beta_matrix, beta_terms, load_zeros, power_matrix, synth_matrix, Family, ZetaZeros};
use mpdet::scalar::agree_digits;
use mpdet::{FloatScalar, PrecComplex, PrecReal, Scalar};
use rug::{Float, Rational};

fn zeros(count: usize, bits: u32) -> ZetaZeros {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/zeta_zeros_256.txt");
    load_zeros(&path, p(bits), count).unwrap()
}

#[test]
fn power_matrix_structure() {
    let prec = p(512);
    let z = zeros(6, 512);
    let t = PrecReal::with_val(prec, 3);
    let a = power_matrix(&z, 6, &t, prec).unwrap();
    assert_eq!(a.dim(), 13);
    let one = PrecComplex::one(prec);
    assert!((0..13).all(|j| a.get(0, j) == &one));
    for n in 1..=13usize {
        let want = PrecReal::from_float(Float::with_val(512, n).sqrt().recip());
        for j in 0..13 {
            let m = a.get(n - 1, j).modulus();
            assert!(agree_digits(&m, &want) >= 150, "row {n} col {j}");
        }
        // Columns 2m and 2m+1 are complex conjugates.
        for pair in 0..6 {
            assert!(agree_digits(a.get(n - 1, 2 * pair), &a.get(n - 1, 2 * pair + 1).conj()) >= 150);
        }
    }
}

#[test]
fn conjugate_column_swap_negates_determinant() {
    let prec = p(512);
    let a = power_matrix(&zeros(4, 512), 4, &PrecReal::with_val(prec, 1), prec).unwrap();
    let det = |m: mpdet::MatrixBuffer<PrecComplex>| eliminate(m, &ElimOptions::determinant_only()).unwrap().trace.det().unwrap().clone();
    let d = det(a.clone());
    for pair in 0..4 {
        let swapped = det(a.swap_columns(2 * pair, 2 * pair + 1));
        assert!(agree_digits(&swapped, &d.neg()) >= 120, "pair {pair}");
    }
}

#[test]
fn beta_is_even_and_real() {
    let g = Spouge::default();
    let prec = p(256);
    let tol_bits = prec.bits() - g.guard_bits();
    for t in ["0.5", "14.134725141734693790", "37.5"] {
        let t = PrecReal::parse_decimal(t, prec).unwrap();
        for n in [1usize, 2, 7, 30] {
            let plus = beta_entry(n, &t, &g, prec).unwrap();
            let minus = beta_entry(n, &t.neg(), &g, prec).unwrap();
            let scale = plus.abs().into_float();
            let gap = Float::with_val(prec.bits(), plus.as_float() - minus.as_float()).abs();
            assert!(gap <= scale >> tol_bits as i32, "n={n}");

            let (first, second) = beta_terms(n, &t, &g, prec).unwrap();
            let im = Float::with_val(prec.bits(), first.im_float() + second.im_float()).abs();
            let size = Float::with_val(prec.bits(), first.modulus().as_float() + second.modulus().as_float());
            assert!(im <= size >> tol_bits as i32);
        }
    }
}

#[test]
fn beta_matrix_columns_follow_zeros() {
    let prec = p(192);
    let z = zeros(5, 192);
    let g = Spouge::default();
    let b = beta_matrix(&z, 5, &g, prec).unwrap();
    for j in 0..5 {
        for i in 0..5 {
            assert_eq!(b.get(i, j), &beta_entry(i + 1, &z.gammas[j], &g, prec).unwrap());
        }
    }
}

#[test]
fn hilbert_four_determinant() {
    let prec = p(512);
    let h = synth_matrix(Family::Hilbert, 4, 0, prec);
    let det = eliminate(h, &ElimOptions::determinant_only()).unwrap().trace.det().unwrap().clone();
    let want = PrecReal::from_rational(&Rational::from((1, 6_048_000)), prec);
    assert!(agree_digits(&det, &want) >= 140);
}

#[test]
fn zero_file_precision_is_respected() {
    let z = zeros(3, 2048);
    assert_eq!(z.source_precision.bits(), 2048);
    assert_eq!(z.gammas[0].prec().bits(), 2048);
    let want = "14.13472514173469379045725198356247027078425711569924317568556746014996342980925676494901039317156101277920297154879743676614269146988225458250536323944713778041338123720597054962195586586020055";
    let exact = PrecReal::parse_decimal(want, p(2048)).unwrap();
    assert!(agree_digits(&z.gammas[0], &exact) >= 190);
}
