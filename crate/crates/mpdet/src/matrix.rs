//! Dense square matrix storage shared by `A` and its triangular factor.

use std::fmt;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::scalar::{FloatScalar, Kind, PrecComplex, PrecReal, Precision, Scalar};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MatrixError {
    #[error("matrix must be square and nonempty (got {rows} rows, row {bad} has {len} entries)")]
    NotSquare { rows: usize, bad: usize, len: usize },
    #[error("empty matrix")]
    Empty,
    #[error("entries carry different precisions ({first} and {other} bits)")]
    PrecisionMismatch { first: u32, other: u32 },
}

/// SHA-256 of a matrix's encoded entries.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fingerprint(pub [u8; 32]);

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fingerprint({self})")
    }
}

/// Row-major `n × n` buffer plus one auxiliary diagonal.
///
/// During elimination the strict lower triangle is overwritten with the
/// factor `L` while the upper triangle holds the echelon form; `aux_diag`
/// stores the diagonal of `L` (which overlaps the echelon diagonal).
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixBuffer<S> {
    n: usize,
    data: Vec<S>,
    aux_diag: Vec<S>,
    source: Option<Fingerprint>,
}

impl<S: Scalar> MatrixBuffer<S> {
    pub fn from_rows(rows: Vec<Vec<S>>) -> Result<Self, MatrixError> {
        let n = rows.len();
        if n == 0 {
            return Err(MatrixError::Empty);
        }
        if let Some((bad, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(MatrixError::NotSquare { rows: n, bad, len: r.len() });
        }
        let data: Vec<S> = rows.into_iter().flatten().collect();
        Ok(Self::from_data(n, data))
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        assert!(n > 0, "empty matrix");
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self::from_data(n, data)
    }

    pub(crate) fn from_data(n: usize, data: Vec<S>) -> Self {
        debug_assert_eq!(data.len(), n * n);
        let aux_diag = (0..n).map(|_| data[0].one_like()).collect();
        MatrixBuffer { n, data, aux_diag, source: None }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &S {
        &self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: S) {
        self.data[i * self.n + j] = value;
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn aux_diag(&self) -> &[S] {
        &self.aux_diag
    }

    pub(crate) fn parts_mut(&mut self) -> (usize, &mut [S], &mut [S]) {
        (self.n, &mut self.data, &mut self.aux_diag)
    }

    /// Copy of the top-left `m × m` corner.
    pub fn leading(&self, m: usize) -> Self {
        assert!(m >= 1 && m <= self.n);
        Self::from_fn(m, |i, j| self.get(i, j).clone())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self.get(j, i).clone())
    }

    /// Copy with column `col` replaced by `values`.
    pub fn with_column(&self, col: usize, values: &[S]) -> Self {
        assert_eq!(values.len(), self.n);
        Self::from_fn(self.n, |i, j| if j == col { values[i].clone() } else { self.get(i, j).clone() })
    }

    pub fn swap_columns(&self, a: usize, b: usize) -> Self {
        Self::from_fn(self.n, |i, j| {
            let j = if j == a {
                b
            } else if j == b {
                a
            } else {
                j
            };
            self.get(i, j).clone()
        })
    }

    /// The precision every entry shares, or `None` for exact entries.
    pub fn common_precision(&self) -> Result<Option<Precision>, MatrixError> {
        let first = self.data[0].precision();
        for x in &self.data[1..] {
            let p = x.precision();
            if p != first {
                return Err(MatrixError::PrecisionMismatch {
                    first: first.map_or(0, Precision::bits),
                    other: p.map_or(0, Precision::bits),
                });
            }
        }
        Ok(first)
    }

    pub fn source_fingerprint(&self) -> Option<Fingerprint> {
        self.source
    }

    pub fn set_source_fingerprint(&mut self, fp: Option<Fingerprint>) {
        self.source = fp;
    }
}

impl<S: FloatScalar> MatrixBuffer<S> {
    pub fn precision(&self) -> Precision {
        self.data[0].prec()
    }

    pub fn kind(&self) -> Kind {
        S::KIND
    }

    /// Hash of the entries as stored.
    pub fn content_fingerprint(&self) -> Fingerprint {
        let mut h = Sha256::new();
        h.update([S::KIND.tag()]);
        h.update((self.n as u64).to_le_bytes());
        h.update(self.precision().bits().to_le_bytes());
        let mut buf = Vec::new();
        for x in &self.data {
            buf.clear();
            x.encode(&mut buf);
            h.update(&buf);
        }
        Fingerprint(h.finalize().into())
    }

    /// Fingerprint of the matrix this one was derived from, else of itself.
    pub fn fingerprint(&self) -> Fingerprint {
        self.source.unwrap_or_else(|| self.content_fingerprint())
    }

    /// Rounded copy that remembers the fingerprint of its source.
    pub fn with_precision(&self, prec: Precision) -> Self {
        let mut out = Self::from_data(self.n, self.data.iter().map(|x| x.round_to(prec)).collect());
        out.source = Some(self.fingerprint());
        out
    }
}

/// A matrix of either kind, as read from a file.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyMatrix {
    Real(MatrixBuffer<PrecReal>),
    Complex(MatrixBuffer<PrecComplex>),
}

impl AnyMatrix {
    pub fn dim(&self) -> usize {
        match self {
            AnyMatrix::Real(m) => m.dim(),
            AnyMatrix::Complex(m) => m.dim(),
        }
    }

    pub fn kind(&self) -> Kind {
        match self {
            AnyMatrix::Real(_) => Kind::Real,
            AnyMatrix::Complex(_) => Kind::Complex,
        }
    }

    pub fn precision(&self) -> Precision {
        match self {
            AnyMatrix::Real(m) => m.precision(),
            AnyMatrix::Complex(m) => m.precision(),
        }
    }

    pub fn fingerprint(&self) -> Fingerprint {
        match self {
            AnyMatrix::Real(m) => m.fingerprint(),
            AnyMatrix::Complex(m) => m.fingerprint(),
        }
    }

    pub fn with_precision(&self, prec: Precision) -> AnyMatrix {
        match self {
            AnyMatrix::Real(m) => AnyMatrix::Real(m.with_precision(prec)),
            AnyMatrix::Complex(m) => AnyMatrix::Complex(m.with_precision(prec)),
        }
    }
}

impl From<MatrixBuffer<PrecReal>> for AnyMatrix {
    fn from(m: MatrixBuffer<PrecReal>) -> Self {
        AnyMatrix::Real(m)
    }
}

impl From<MatrixBuffer<PrecComplex>> for AnyMatrix {
    fn from(m: MatrixBuffer<PrecComplex>) -> Self {
        AnyMatrix::Complex(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ExactRational;

    fn p(bits: u32) -> Precision {
        Precision::new(bits).unwrap()
    }

    #[test]
    fn rejects_ragged_rows() {
        let r = |v: i64| ExactRational::from_ratio(v, 1);
        let err = MatrixBuffer::from_rows(vec![vec![r(1), r(2)], vec![r(3)]]).unwrap_err();
        assert!(matches!(err, MatrixError::NotSquare { bad: 1, .. }));
        assert_eq!(MatrixBuffer::<ExactRational>::from_rows(vec![]).unwrap_err(), MatrixError::Empty);
    }

    #[test]
    fn precision_mismatch_detected() {
        let mut m = MatrixBuffer::from_fn(2, |_, _| PrecReal::zero(p(128)));
        assert_eq!(m.common_precision().unwrap(), Some(p(128)));
        m.set(1, 0, PrecReal::zero(p(256)));
        assert!(matches!(m.common_precision(), Err(MatrixError::PrecisionMismatch { .. })));
    }

    #[test]
    fn fingerprint_survives_rounding() {
        let m = MatrixBuffer::from_fn(3, |i, j| PrecReal::with_val(p(512), (i * 3 + j) as u32) );
        let lo = m.with_precision(p(128));
        assert_eq!(lo.fingerprint(), m.fingerprint());
        assert_ne!(lo.content_fingerprint(), m.content_fingerprint());
        let other = m.with_column(0, &[PrecReal::zero(p(512)), PrecReal::zero(p(512)), PrecReal::zero(p(512))]);
        assert_ne!(other.fingerprint(), m.fingerprint());
    }
}
