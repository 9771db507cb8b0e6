//! Slow reference implementations: exact cofactor expansion over the
//! rationals and the two condensation variants.

use std::collections::HashMap;

use rug::Rational;
use thiserror::Error;

use crate::matrix::{MatrixBuffer, MatrixError};
use crate::scalar::{FloatScalar, Scalar};

/// Largest dimension the exact expansion accepts.
pub const MAX_ORACLE_N: usize = 12;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("oracle limited to n <= {MAX_ORACLE_N}, got {0}")]
    SizeTooLarge(usize),
    #[error("column {col} out of range for n = {n}")]
    ColumnOutOfRange { col: usize, n: usize },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// Exact square matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalMatrix {
    n: usize,
    entries: Vec<Rational>,
}

impl RationalMatrix {
    pub fn from_rows(rows: Vec<Vec<Rational>>) -> Result<Self, OracleError> {
        let n = rows.len();
        if n == 0 {
            return Err(MatrixError::Empty.into());
        }
        if let Some((bad, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(MatrixError::NotSquare { rows: n, bad, len: r.len() }.into());
        }
        Ok(RationalMatrix { n, entries: rows.into_iter().flatten().collect() })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Rational) -> Self {
        let entries = (0..n * n).map(|i| f(i / n, i % n)).collect();
        RationalMatrix { n, entries }
    }

    pub fn from_i64(rows: &[&[i64]]) -> Result<Self, OracleError> {
        Self::from_rows(rows.iter().map(|r| r.iter().map(|&v| Rational::from(v)).collect()).collect())
    }

    /// `h_ij = 1/(i+j-1)` with 1-based indices.
    pub fn hilbert(n: usize) -> Self {
        Self::from_fn(n, |i, j| Rational::from((1, (i + j + 1) as u64)))
    }

    /// Exact values of a real floating matrix.
    pub fn from_buffer<S: FloatScalar>(a: &MatrixBuffer<S>) -> Self {
        let n = a.dim();
        Self::from_fn(n, |i, j| a.get(i, j).to_rationals().0)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &Rational {
        &self.entries[i * self.n + j]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self.get(j, i).clone())
    }

    pub fn leading(&self, m: usize) -> Self {
        Self::from_fn(m, |i, j| self.get(i, j).clone())
    }

    /// Rounds every entry to a float buffer of kind `S`.
    pub fn to_buffer<S: FloatScalar>(&self, prec: crate::scalar::Precision) -> MatrixBuffer<S> {
        MatrixBuffer::from_fn(self.n, |i, j| S::from_rational(self.get(i, j), prec))
    }

    fn without(&self, row: usize, col: usize) -> Self {
        let m = self.n - 1;
        Self::from_fn(m, |i, j| {
            let i = if i >= row { i + 1 } else { i };
            let j = if j >= col { j + 1 } else { j };
            self.get(i, j).clone()
        })
    }
}

/// Exact determinant by Laplace expansion along successive rows.
///
/// Sub-determinants are memoized by the set of columns already used, so the
/// cost is `O(n·2^n)` rather than `O(n!)`.
pub fn det_cofactor(a: &RationalMatrix) -> Result<Rational, OracleError> {
    let n = a.n;
    if n > MAX_ORACLE_N {
        return Err(OracleError::SizeTooLarge(n));
    }
    let mut memo = HashMap::new();
    Ok(expand(a, 0, &mut memo))
}

fn expand(a: &RationalMatrix, used: u32, memo: &mut HashMap<u32, Rational>) -> Rational {
    let n = a.n;
    let row = used.count_ones() as usize;
    if row == n {
        return Rational::from(1);
    }
    if let Some(v) = memo.get(&used) {
        return v.clone();
    }
    let mut total = Rational::new();
    let mut position = 0;
    for col in 0..n {
        if used & (1 << col) != 0 {
            continue;
        }
        let entry = a.get(row, col);
        if !entry.is_zero() {
            let term = entry * expand(a, used | (1 << col), memo);
            if position % 2 == 0 {
                total += term;
            } else {
                total -= term;
            }
        }
        position += 1;
    }
    memo.insert(used, total.clone());
    total
}

/// `(-1)^{k+col} det(A without row k and column col)` for each row `k`.
pub fn cofactors_of_column(a: &RationalMatrix, col: usize) -> Result<Vec<Rational>, OracleError> {
    let n = a.n;
    if n > MAX_ORACLE_N {
        return Err(OracleError::SizeTooLarge(n));
    }
    if col >= n {
        return Err(OracleError::ColumnOutOfRange { col, n });
    }
    if n == 1 {
        return Ok(vec![Rational::from(1)]);
    }
    (0..n)
        .map(|k| {
            let d = det_cofactor(&a.without(k, col))?;
            Ok(if (k + col).is_multiple_of(2) { d } else { -d })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condensation {
    /// 2×2 cross products with the final division by `a_{1l}^{N-2}` per step.
    Divide,
    /// Pivot column pre-divided so the determinant is the product of pivots.
    Factor,
}

/// Determinant by repeated condensation of the first row.
///
/// The pivot of each step is the leftmost nonzero entry `a_{1l}` of the
/// current first row; an all-zero first row means the determinant is zero.
/// The divide variant rescales each condensed matrix by a power of two so
/// the undivided cross products stay in range.
pub fn det_condensation<S: Scalar>(a: &MatrixBuffer<S>, variant: Condensation) -> Result<S, OracleError> {
    a.common_precision()?;
    let mut m = a.dim();
    let mut cur: Vec<S> = a.data().to_vec();
    let one = cur[0].one_like();
    let mut scratch = cur[0].zero_like();
    // Divide: det(A) = value · 2^shift / divisor. Factor: det(A) = value · product.
    let mut divisor = one.clone();
    let mut product = one.clone();
    let mut shift: i64 = 0;

    while m > 1 {
        let Some(l) = (0..m).find(|&j| !cur[j].is_zero()) else {
            return Ok(one.zero_like());
        };
        let p = cur[l].clone();
        let w = m - 1;
        let mut next = Vec::with_capacity(w * w);
        match variant {
            Condensation::Divide => {
                for i in 1..m {
                    let row = &cur[i * m..(i + 1) * m];
                    for j in 0..w {
                        let b = if j < l {
                            // Column j lies left of the pivot: −a_{i+1,j}·a_{1,l}.
                            row[j].mul(&p).neg()
                        } else {
                            let mut b = p.mul(&row[j + 1]);
                            b.sub_mul_assign(&cur[j + 1], &row[l], &mut scratch);
                            b
                        };
                        next.push(b);
                    }
                }
                for _ in 0..w.saturating_sub(1) {
                    divisor = divisor.mul(&p);
                }
                let top = next.iter().filter_map(Scalar::exponent).max();
                let Some(top) = top else {
                    return Ok(one.zero_like());
                };
                if top != 0 {
                    for x in &mut next {
                        *x = x.scale_pow2(-top);
                    }
                    shift += top * w as i64;
                }
            }
            Condensation::Factor => {
                for i in 1..m {
                    let row = &cur[i * m..(i + 1) * m];
                    let z = row[l].div(&p);
                    for j in 0..w {
                        let b = if j < l {
                            row[j].neg()
                        } else {
                            let mut b = row[j + 1].clone();
                            b.sub_mul_assign(&z, &cur[j + 1], &mut scratch);
                            b
                        };
                        next.push(b);
                    }
                }
                product = product.mul(&p);
            }
        }
        cur = next;
        m = w;
    }
    Ok(match variant {
        Condensation::Divide => cur[0].div(&divisor).scale_pow2(shift),
        Condensation::Factor => product.mul(&cur[0]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{agree_digits, ExactRational, PrecReal, Precision};

    fn r(n: i64, d: i64) -> Rational {
        Rational::from((n, d))
    }

    #[test]
    fn small_determinants() {
        let a = RationalMatrix::from_i64(&[&[1, 2], &[3, 4]]).unwrap();
        assert_eq!(det_cofactor(&a).unwrap(), -2);
        let id = RationalMatrix::from_fn(5, |i, j| Rational::from(u8::from(i == j)));
        assert_eq!(det_cofactor(&id).unwrap(), 1);
        assert_eq!(det_cofactor(&RationalMatrix::hilbert(4)).unwrap(), r(1, 6_048_000));
        let big = RationalMatrix::from_fn(13, |_, _| Rational::new());
        assert_eq!(det_cofactor(&big), Err(OracleError::SizeTooLarge(13)));
    }

    #[test]
    fn column_cofactors() {
        let a = RationalMatrix::from_i64(&[&[1, 2], &[3, 4]]).unwrap();
        assert_eq!(cofactors_of_column(&a, 1).unwrap(), vec![r(-3, 1), r(1, 1)]);
        let id = RationalMatrix::from_fn(3, |i, j| Rational::from(u8::from(i == j)));
        assert_eq!(cofactors_of_column(&id, 2).unwrap(), vec![r(0, 1), r(0, 1), r(1, 1)]);
        let b = RationalMatrix::from_i64(&[&[2, 1, 1], &[1, 3, 2], &[1, 0, 0]]).unwrap();
        assert_eq!(cofactors_of_column(&b, 2).unwrap(), vec![r(-3, 1), r(1, 1), r(5, 1)]);
    }

    #[test]
    fn condensation_exact() {
        let h = RationalMatrix::hilbert(4);
        let exact: MatrixBuffer<ExactRational> =
            MatrixBuffer::from_fn(4, |i, j| ExactRational(h.get(i, j).clone()));
        for v in [Condensation::Divide, Condensation::Factor] {
            assert_eq!(det_condensation(&exact, v).unwrap().0, r(1, 6_048_000));
        }
    }

    #[test]
    fn condensation_pivot_selection() {
        // First row starts with a zero, so l = 2 in the first step.
        let a = RationalMatrix::from_i64(&[&[0, 2, 1], &[3, 1, 4], &[5, 9, 2]]).unwrap();
        let want = det_cofactor(&a).unwrap();
        let exact: MatrixBuffer<ExactRational> = MatrixBuffer::from_fn(3, |i, j| ExactRational(a.get(i, j).clone()));
        for v in [Condensation::Divide, Condensation::Factor] {
            assert_eq!(det_condensation(&exact, v).unwrap().0, want);
        }
        let z = RationalMatrix::from_i64(&[&[0, 0], &[3, 1]]).unwrap();
        let exact: MatrixBuffer<ExactRational> = MatrixBuffer::from_fn(2, |i, j| ExactRational(z.get(i, j).clone()));
        assert!(det_condensation(&exact, Condensation::Divide).unwrap().0.is_zero());
    }

    #[test]
    fn hilbert_at_512_bits() {
        let p = Precision::new(512).unwrap();
        let h: MatrixBuffer<PrecReal> = RationalMatrix::hilbert(4).to_buffer(p);
        let want = PrecReal::from_rational(&r(1, 6_048_000), p);
        for v in [Condensation::Divide, Condensation::Factor] {
            assert!(agree_digits(&det_condensation(&h, v).unwrap(), &want) >= 140);
        }
    }
}
