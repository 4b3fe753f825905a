//! Binary tensor snapshots.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! offset  size  field
//! 0       4     magic  b"ETAT"
//! 4       4     dtype  u32, element width in bytes (4 = f32, 8 = f64)
//! 8       8     rows   u64
//! 16      8     cols   u64
//! 24      ...   rows*cols elements, row-major, little-endian
//! ```
//!
//! A checkpoint stream is a plain concatenation of snapshots.

use std::io::{Read, Write};

use super::{DenseMatrix, NumericError};
use crate::scalar::{DType, Scalar};

pub const MAGIC: &[u8; 4] = b"ETAT";
const HEADER_LEN: usize = 24;

pub fn write_tensor<T: Scalar, W: Write>(out: &mut W, m: &DenseMatrix<T>) -> Result<(), NumericError> {
    let mut buf = Vec::with_capacity(HEADER_LEN + m.as_slice().len() * T::DTYPE.width());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&T::DTYPE.code().to_le_bytes());
    buf.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    buf.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for &v in m.as_slice() {
        v.write_le(&mut buf);
    }
    out.write_all(&buf)?;
    Ok(())
}

/// Reads one snapshot. A stored dtype different from `T` is converted.
pub fn read_tensor<T: Scalar, R: Read>(input: &mut R) -> Result<DenseMatrix<T>, NumericError> {
    let mut header = [0u8; HEADER_LEN];
    input.read_exact(&mut header)?;
    if &header[0..4] != MAGIC {
        return Err(NumericError::Snapshot("bad magic".into()));
    }
    let code = u32::from_le_bytes(header[4..8].try_into().expect("4 bytes"));
    let dtype = DType::from_code(code).ok_or_else(|| NumericError::Snapshot(format!("unknown dtype code {code}")))?;
    let rows = u64::from_le_bytes(header[8..16].try_into().expect("8 bytes")) as usize;
    let cols = u64::from_le_bytes(header[16..24].try_into().expect("8 bytes")) as usize;
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| NumericError::Snapshot("tensor size overflows".into()))?;
    let width = dtype.width();
    let mut payload = vec![0u8; count * width];
    input.read_exact(&mut payload)?;
    let data: Vec<T> = match dtype {
        DType::F64 => payload.chunks_exact(8).map(|c| T::cast_from(f64::read_le(c))).collect(),
        DType::F32 => payload.chunks_exact(4).map(|c| T::cast_from(f32::read_le(c).as_f64())).collect(),
    };
    DenseMatrix::from_vec(rows, cols, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout_is_fixed() {
        let m = DenseMatrix::from_rows(&[vec![1.0f64, 2.0, 3.0]]);
        let mut buf = Vec::new();
        write_tensor(&mut buf, &m).unwrap();
        assert_eq!(&buf[0..4], b"ETAT");
        assert_eq!(&buf[4..8], &8u32.to_le_bytes());
        assert_eq!(&buf[8..16], &1u64.to_le_bytes());
        assert_eq!(&buf[16..24], &3u64.to_le_bytes());
        assert_eq!(buf.len(), 24 + 3 * 8);
    }

    #[test]
    fn bad_magic_is_rejected() {
        let buf = vec![0u8; 32];
        assert!(matches!(read_tensor::<f64, _>(&mut buf.as_slice()), Err(NumericError::Snapshot(_))));
    }

    #[test]
    fn f32_snapshot_reads_as_f64() {
        let m = DenseMatrix::from_rows(&[vec![0.5f32, -2.25]]);
        let mut buf = Vec::new();
        write_tensor(&mut buf, &m).unwrap();
        let back: DenseMatrix<f64> = read_tensor(&mut buf.as_slice()).unwrap();
        assert_eq!(back.as_slice(), &[0.5, -2.25]);
    }

    proptest! {
        #[test]
        fn concatenated_stream_round_trips(rows in 0usize..6, cols in 0usize..6, seed in any::<u64>()) {
            let a = DenseMatrix::from_fn(rows, cols, |i, j| ((seed ^ (i * 31 + j) as u64) % 1000) as f64 / 7.0 - 50.0);
            let b = a.transpose();
            let mut buf = Vec::new();
            write_tensor(&mut buf, &a).unwrap();
            write_tensor(&mut buf, &b).unwrap();
            let mut r = buf.as_slice();
            prop_assert_eq!(read_tensor::<f64, _>(&mut r).unwrap(), a);
            prop_assert_eq!(read_tensor::<f64, _>(&mut r).unwrap(), b);
            prop_assert!(r.is_empty());
        }
    }
}
