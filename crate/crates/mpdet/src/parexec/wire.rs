//! Versioned binary encoding of row segments.
//!
//! ```text
//! "MPRW" | u8 version | u32 step | u32 scalar count | records… | u32 CRC32
//! record = u8 sign | i64 exponent | u32 limb count | u64 limbs (LSF)
//! ```
//!
//! All integers are little-endian. A complex scalar is two records. The
//! CRC covers every preceding byte.

use thiserror::Error;

use crate::scalar::{FloatScalar, Precision};

pub const WIRE_MAGIC: &[u8; 4] = b"MPRW";
pub const WIRE_VERSION: u8 = 1;
const HEADER_LEN: usize = 4 + 1 + 4 + 4;
const CRC_LEN: usize = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("corrupt payload: {0}")]
    CorruptPayload(String),
}

fn corrupt(msg: impl Into<String>) -> WireError {
    WireError::CorruptPayload(msg.into())
}

pub fn pack_row<S: FloatScalar>(step: u32, row: &[S]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + CRC_LEN + row.len() * 32);
    out.extend_from_slice(WIRE_MAGIC);
    out.push(WIRE_VERSION);
    out.extend_from_slice(&step.to_le_bytes());
    out.extend_from_slice(&u32::try_from(row.len()).expect("row fits u32").to_le_bytes());
    for x in row {
        x.encode(&mut out);
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

/// Returns the step tag and the scalars, rejecting any damage.
pub fn unpack_row<S: FloatScalar>(bytes: &[u8], prec: Precision) -> Result<(u32, Vec<S>), WireError> {
    if bytes.len() < HEADER_LEN + CRC_LEN {
        return Err(corrupt(format!("{} bytes is shorter than the header", bytes.len())));
    }
    let (body, tail) = bytes.split_at(bytes.len() - CRC_LEN);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    if crc32fast::hash(body) != stored {
        return Err(corrupt("CRC mismatch"));
    }
    if &body[..4] != WIRE_MAGIC {
        return Err(corrupt("bad magic"));
    }
    if body[4] != WIRE_VERSION {
        return Err(corrupt(format!("unsupported version {}", body[4])));
    }
    let step = u32::from_le_bytes(body[5..9].try_into().unwrap());
    let count = u32::from_le_bytes(body[9..13].try_into().unwrap()) as usize;
    let mut input = &body[HEADER_LEN..];
    let mut row = Vec::with_capacity(count.min(input.len()));
    for _ in 0..count {
        row.push(S::decode(&mut input, prec).map_err(|e| corrupt(e.to_string()))?);
    }
    if !input.is_empty() {
        return Err(corrupt(format!("{} trailing bytes", input.len())));
    }
    Ok((step, row))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{PrecComplex, PrecReal};
    use proptest::prelude::*;
    use rug::Float;

    fn p(bits: u32) -> Precision {
        Precision::new(bits).unwrap()
    }

    #[test]
    fn empty_segment_is_header_only() {
        let bytes = pack_row::<PrecReal>(7, &[]);
        assert_eq!(bytes.len(), HEADER_LEN + CRC_LEN);
        assert_eq!(unpack_row::<PrecReal>(&bytes, p(64)).unwrap(), (7, vec![]));
    }

    #[test]
    fn complex_round_trip() {
        let x = PrecComplex::from_floats(Float::with_val(128, 1.5), Float::with_val(128, -0.1));
        let bytes = pack_row(3, &[x.clone(), x.clone()]);
        assert_eq!(unpack_row::<PrecComplex>(&bytes, p(128)).unwrap().1, vec![x.clone(), x]);
    }

    #[test]
    fn truncation_detected() {
        let bytes = pack_row(0, &[PrecReal::with_val(p(64), 3)]);
        for cut in 0..bytes.len() {
            assert!(unpack_row::<PrecReal>(&bytes[..cut], p(64)).is_err());
        }
    }

    proptest! {
        #[test]
        fn any_single_bit_flip_detected(v in any::<i64>(), e in -100i32..100, bit in 0usize..8 * 60) {
            let mut f = Float::with_val(192, v);
            f <<= e;
            let mut bytes = pack_row(9, &[PrecReal::from_float(f)]);
            let bit = bit % (bytes.len() * 8);
            bytes[bit / 8] ^= 1 << (bit % 8);
            prop_assert!(unpack_row::<PrecReal>(&bytes, p(192)).is_err());
        }
    }
}
