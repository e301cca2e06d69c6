//! Binary matrix files.
//!
//! Layout (all integers little-endian):
//!
//! | offset | size | field                         |
//! |--------|------|-------------------------------|
//! | 0      | 4    | magic `AMTX`                  |
//! | 4      | 2    | version, currently 1          |
//! | 6      | 1    | dtype: 0 = f32, 1 = f64       |
//! | 7      | 1    | flags, must be 0              |
//! | 8      | 8    | rows                          |
//! | 16     | 8    | cols                          |
//! | 24     | ...  | row-major payload             |
//!
//! f32 payloads are widened on read. Non-finite values are rejected both ways.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::error::PruneError;
use crate::linalg::{GramAccumulator, GramMatrix, Matrix};

pub const MAGIC: [u8; 4] = *b"AMTX";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 24;
/// Rows per block when streaming activations into a Gram matrix.
pub const STREAM_BLOCK_ROWS: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    pub fn code(self) -> u8 {
        match self {
            Dtype::F32 => 0,
            Dtype::F64 => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Dtype::F32),
            1 => Some(Dtype::F64),
            _ => None,
        }
    }

    pub fn width(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

#[derive(Debug, Error)]
pub enum MatrixFileError {
    #[error("bad magic bytes {0:02x?}, expected \"AMTX\"")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),
    #[error("unknown dtype code {0}")]
    UnknownDtype(u8),
    #[error("nonzero flags byte {0:#04x}")]
    UnsupportedFlags(u8),
    #[error("truncated file: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },
    #[error("{0} unexpected bytes after the payload")]
    TrailingBytes(u64),
    #[error("matrix dimensions {rows}x{cols} are empty or overflow")]
    BadShape { rows: u64, cols: u64 },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MatrixHeader {
    pub dtype: Dtype,
    pub rows: usize,
    pub cols: usize,
}

impl MatrixHeader {
    pub fn payload_len(&self) -> u64 {
        (self.rows as u64) * (self.cols as u64) * self.dtype.width() as u64
    }

    pub fn encode(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[0..4].copy_from_slice(&MAGIC);
        out[4..6].copy_from_slice(&VERSION.to_le_bytes());
        out[6] = self.dtype.code();
        out[7] = 0;
        out[8..16].copy_from_slice(&(self.rows as u64).to_le_bytes());
        out[16..24].copy_from_slice(&(self.cols as u64).to_le_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, MatrixFileError> {
        if bytes.len() < HEADER_LEN {
            // A short file with the wrong magic is reported as bad magic.
            if bytes.len() >= 4 && bytes[0..4] != MAGIC {
                return Err(MatrixFileError::BadMagic(bytes[0..4].try_into().unwrap()));
            }
            return Err(MatrixFileError::Truncated { expected: HEADER_LEN as u64, found: bytes.len() as u64 });
        }
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(MatrixFileError::BadMagic(magic));
        }
        let version = u16::from_le_bytes(bytes[4..6].try_into().unwrap());
        if version != VERSION {
            return Err(MatrixFileError::UnsupportedVersion(version));
        }
        let dtype = Dtype::from_code(bytes[6]).ok_or(MatrixFileError::UnknownDtype(bytes[6]))?;
        if bytes[7] != 0 {
            return Err(MatrixFileError::UnsupportedFlags(bytes[7]));
        }
        let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let cols = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
        let fits = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(dtype.width() as u64))
            .is_some_and(|n| usize::try_from(n).is_ok());
        if rows == 0 || cols == 0 || !fits {
            return Err(MatrixFileError::BadShape { rows, cols });
        }
        Ok(Self { dtype, rows: rows as usize, cols: cols as usize })
    }
}

/// Serialises `m` into a complete file image.
pub fn encode_matrix(m: &Matrix, dtype: Dtype) -> Result<Vec<u8>, MatrixFileError> {
    let header = MatrixHeader { dtype, rows: m.rows(), cols: m.cols() };
    let mut out = Vec::with_capacity(HEADER_LEN + header.payload_len() as usize);
    out.extend_from_slice(&header.encode());
    for (idx, &v) in m.as_slice().iter().enumerate() {
        match dtype {
            Dtype::F64 => out.extend_from_slice(&v.to_le_bytes()),
            Dtype::F32 => {
                let narrow = v as f32;
                if !narrow.is_finite() {
                    return Err(MatrixFileError::NonFinite { row: idx / m.cols(), col: idx % m.cols() });
                }
                out.extend_from_slice(&narrow.to_le_bytes());
            }
        }
    }
    Ok(out)
}

/// Parses a complete file image.
pub fn decode_matrix(bytes: &[u8]) -> Result<Matrix, MatrixFileError> {
    let header = MatrixHeader::decode(bytes)?;
    let expected = HEADER_LEN as u64 + header.payload_len();
    let found = bytes.len() as u64;
    if found < expected {
        return Err(MatrixFileError::Truncated { expected, found });
    }
    if found > expected {
        return Err(MatrixFileError::TrailingBytes(found - expected));
    }
    let data = decode_values(&bytes[HEADER_LEN..], header.dtype, header.cols, 0)?;
    Ok(Matrix::new(header.rows, header.cols, data).expect("shape and values already validated"))
}

fn decode_values(payload: &[u8], dtype: Dtype, cols: usize, first_row: usize) -> Result<Vec<f64>, MatrixFileError> {
    let width = dtype.width();
    let mut out = Vec::with_capacity(payload.len() / width);
    for (idx, chunk) in payload.chunks_exact(width).enumerate() {
        let v = match dtype {
            Dtype::F64 => f64::from_le_bytes(chunk.try_into().unwrap()),
            Dtype::F32 => f32::from_le_bytes(chunk.try_into().unwrap()) as f64,
        };
        if !v.is_finite() {
            return Err(MatrixFileError::NonFinite { row: first_row + idx / cols, col: idx % cols });
        }
        out.push(v);
    }
    Ok(out)
}

pub fn write_matrix(path: impl AsRef<Path>, m: &Matrix, dtype: Dtype) -> Result<(), MatrixFileError> {
    let bytes = encode_matrix(m, dtype)?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<Matrix, MatrixFileError> {
    decode_matrix(&std::fs::read(path)?)
}

/// Reads a matrix file a block of rows at a time.
pub struct RowBlockReader<R: Read> {
    inner: R,
    header: MatrixHeader,
    rows_read: usize,
}

impl RowBlockReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, MatrixFileError> {
        Self::new(BufReader::new(File::open(path)?))
    }
}

impl<R: Read> RowBlockReader<R> {
    pub fn new(mut inner: R) -> Result<Self, MatrixFileError> {
        let mut buf = [0u8; HEADER_LEN];
        let n = read_full(&mut inner, &mut buf)?;
        let header = MatrixHeader::decode(&buf[..n])?;
        Ok(Self { inner, header, rows_read: 0 })
    }

    pub fn header(&self) -> MatrixHeader {
        self.header
    }

    /// The next block of at most `max_rows` rows, or `None` after the last row.
    /// Trailing bytes are reported once the payload has been consumed.
    pub fn next_block(&mut self, max_rows: usize) -> Result<Option<Matrix>, MatrixFileError> {
        let h = self.header;
        if self.rows_read == h.rows {
            let mut probe = [0u8; 64];
            let extra = read_full(&mut self.inner, &mut probe)? as u64;
            if extra > 0 {
                let rest = std::io::copy(&mut self.inner, &mut std::io::sink())?;
                return Err(MatrixFileError::TrailingBytes(extra + rest));
            }
            return Ok(None);
        }
        let rows = max_rows.max(1).min(h.rows - self.rows_read);
        let mut buf = vec![0u8; rows * h.cols * h.dtype.width()];
        let n = read_full(&mut self.inner, &mut buf)?;
        if n < buf.len() {
            let done = HEADER_LEN as u64 + (self.rows_read * h.cols * h.dtype.width()) as u64;
            return Err(MatrixFileError::Truncated { expected: HEADER_LEN as u64 + h.payload_len(), found: done + n as u64 });
        }
        let data = decode_values(&buf, h.dtype, h.cols, self.rows_read)?;
        self.rows_read += rows;
        Ok(Some(Matrix::new(rows, h.cols, data).expect("block shape and values already validated")))
    }
}

fn read_full(r: &mut impl Read, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

/// Accumulates `X^T X` from an activations file without loading it whole.
pub fn gram_from_activation_file(path: impl AsRef<Path>) -> Result<GramMatrix, PruneError> {
    let mut reader = RowBlockReader::open(path)?;
    let mut acc = GramAccumulator::new(reader.header().cols)?;
    while let Some(block) = reader.next_block(STREAM_BLOCK_ROWS)? {
        acc.push(&block)?;
    }
    acc.finish()
}
