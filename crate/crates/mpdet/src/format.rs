//! Text formats: `MPMAT` matrix files and zero lists.

use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::matrix::{AnyMatrix, MatrixBuffer};
use crate::scalar::{FloatScalar, Kind, PrecComplex, PrecReal, Precision, ScalarError};

pub const MPMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad header: {0}")]
    Header(String),
    #[error("line {line}: {source}")]
    Scalar { line: usize, source: ScalarError },
    #[error("expected {expected} entries, found {found}")]
    Count { expected: usize, found: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Writes `MPMAT 1 <kind> <n> <prec_bits>` and one scalar per line with
/// enough digits to round-trip exactly.
pub fn write_matrix<S: FloatScalar, W: Write>(m: &MatrixBuffer<S>, out: W) -> io::Result<()> {
    let mut w = BufWriter::new(out);
    let prec = m.precision();
    writeln!(w, "MPMAT {MPMAT_VERSION} {} {} {}", S::KIND, m.dim(), prec.bits())?;
    let digits = prec.round_trip_digits();
    for x in m.data() {
        writeln!(w, "{}", x.to_decimal(digits))?;
    }
    w.flush()
}

pub fn write_any_matrix<W: Write>(m: &AnyMatrix, out: W) -> io::Result<()> {
    match m {
        AnyMatrix::Real(m) => write_matrix(m, out),
        AnyMatrix::Complex(m) => write_matrix(m, out),
    }
}

pub fn save_matrix(m: &AnyMatrix, path: &Path) -> io::Result<()> {
    write_any_matrix(m, fs::File::create(path)?)
}

pub fn read_matrix<R: Read>(input: R) -> Result<AnyMatrix, FormatError> {
    let mut lines = BufReader::new(input).lines();
    let header = lines.next().ok_or_else(|| FormatError::Header("empty file".into()))??;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let [magic, version, kind, n, bits] = fields[..] else {
        return Err(FormatError::Header(header.clone()));
    };
    if magic != "MPMAT" || version != MPMAT_VERSION.to_string() {
        return Err(FormatError::Header(header.clone()));
    }
    let kind: Kind = kind.parse().map_err(|_| FormatError::Header(header.clone()))?;
    let n: usize = n.parse().ok().filter(|&n| n > 0).ok_or_else(|| FormatError::Header(header.clone()))?;
    let bits: u32 = bits.parse().map_err(|_| FormatError::Header(header.clone()))?;
    let prec = Precision::new(bits).map_err(|e| FormatError::Header(e.to_string()))?;
    match kind {
        Kind::Real => read_entries::<PrecReal>(lines, n, prec).map(AnyMatrix::Real),
        Kind::Complex => read_entries::<PrecComplex>(lines, n, prec).map(AnyMatrix::Complex),
    }
}

fn read_entries<S: FloatScalar>(
    lines: impl Iterator<Item = io::Result<String>>,
    n: usize,
    prec: Precision,
) -> Result<MatrixBuffer<S>, FormatError> {
    let mut data = Vec::with_capacity(n * n);
    for (idx, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if data.len() == n * n {
            return Err(FormatError::Count { expected: n * n, found: data.len() + 1 });
        }
        let x = S::parse_decimal(line.trim(), prec).map_err(|source| FormatError::Scalar { line: idx + 2, source })?;
        data.push(x);
    }
    if data.len() != n * n {
        return Err(FormatError::Count { expected: n * n, found: data.len() });
    }
    Ok(MatrixBuffer::from_data(n, data))
}

pub fn load_matrix(path: &Path) -> Result<AnyMatrix, FormatError> {
    read_matrix(fs::File::open(path)?)
}

/// Non-comment, non-blank lines of a zeros file with their 1-based numbers.
pub(crate) fn data_lines<R: Read>(input: R) -> impl Iterator<Item = io::Result<(usize, String)>> {
    BufReader::new(input).lines().enumerate().filter_map(|(i, line)| match line {
        Ok(l) if l.trim().is_empty() || l.trim_start().starts_with('#') => None,
        Ok(l) => Some(Ok((i + 1, l.trim().to_string()))),
        Err(e) => Some(Err(e)),
    })
}

/// One value per line, `#` comments allowed.
pub fn write_reals<W: Write>(values: &[PrecReal], header: &str, out: W) -> io::Result<()> {
    let mut w = BufWriter::new(out);
    for line in header.lines() {
        writeln!(w, "# {line}")?;
    }
    for v in values {
        writeln!(w, "{}", v.to_decimal(v.prec().round_trip_digits()))?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Scalar;

    #[test]
    fn matrix_round_trip() {
        let p = Precision::new(200).unwrap();
        let m = MatrixBuffer::from_fn(3, |i, j| {
            PrecComplex::new(PrecReal::with_val(p, 1 + i as u32), PrecReal::with_val(p, j as u32 + 1))
                .div(&PrecComplex::new(PrecReal::with_val(p, 3), PrecReal::with_val(p, 7)))
        });
        let mut buf = Vec::new();
        write_matrix(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("MPMAT 1 complex 3 200\n"));
        assert_eq!(read_matrix(buf.as_slice()).unwrap(), AnyMatrix::Complex(m));
    }

    #[test]
    fn rejects_bad_files() {
        assert!(matches!(read_matrix("MPMAT 2 real 1 64\n1\n".as_bytes()), Err(FormatError::Header(_))));
        assert!(matches!(read_matrix("MPMAT 1 real 2 64\n1\n2\n3\n".as_bytes()), Err(FormatError::Count { .. })));
        assert!(matches!(
            read_matrix("MPMAT 1 real 1 64\n1.5x\n".as_bytes()),
            Err(FormatError::Scalar { line: 2, .. })
        ));
    }
}
