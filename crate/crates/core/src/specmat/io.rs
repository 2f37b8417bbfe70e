//! Matrix serialisation.
//!
//! * CSV: one matrix row per line, comma separated, `.` decimal separator, no
//!   header. Values are written in shortest round-trip form.
//! * Binary: 16-byte header followed by the row-major payload, all
//!   little-endian:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "ISOM"
//! 4       4     u32 rows
//! 8       4     u32 cols
//! 12      4     u32 reserved, written as 0
//! 16      8*r*c f64 entries, row-major
//! ```

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::matrix::RealMatrix;
use crate::error::{Error, Result};

pub const BINARY_MAGIC: [u8; 4] = *b"ISOM";
pub const BINARY_HEADER_LEN: usize = 16;

pub fn write_csv<W: Write>(m: &RealMatrix, mut w: W) -> Result<()> {
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<RealMatrix> {
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .enumerate()
            .map(|(j, cell)| {
                cell.trim().parse::<f64>().map_err(|e| Error::Parse {
                    line: i + 1,
                    column: j + 1,
                    message: format!("{:?}: {e}", cell.trim()),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first().map(Vec::len) {
            if row.len() != first {
                return Err(Error::Parse {
                    line: i + 1,
                    column: row.len(),
                    message: format!("expected {first} columns"),
                });
            }
        }
        rows.push(row);
    }
    RealMatrix::from_rows(&rows)
}

pub fn to_binary(m: &RealMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(BINARY_HEADER_LEN + 8 * m.as_slice().len());
    out.extend_from_slice(&BINARY_MAGIC);
    out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u32).to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn from_binary(bytes: &[u8]) -> Result<RealMatrix> {
    if bytes.len() < BINARY_HEADER_LEN {
        return Err(Error::Truncated { what: "matrix header".into(), expected: BINARY_HEADER_LEN, found: bytes.len() });
    }
    if bytes[..4] != BINARY_MAGIC {
        return Err(Error::BadMagic {
            what: "matrix file".into(),
            expected: u32::from_be_bytes(BINARY_MAGIC),
            found: u32::from_be_bytes(bytes[..4].try_into().unwrap()),
        });
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let (rows, cols) = (u32_at(4), u32_at(8));
    let expected = BINARY_HEADER_LEN + 8 * rows * cols;
    if bytes.len() != expected {
        return Err(Error::Truncated { what: "matrix payload".into(), expected, found: bytes.len() });
    }
    let data = bytes[BINARY_HEADER_LEN..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    RealMatrix::from_vec(rows, cols, data)
}

pub fn save_binary(m: &RealMatrix, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_binary(m))?;
    Ok(())
}

pub fn load_binary(path: impl AsRef<Path>) -> Result<RealMatrix> {
    from_binary(&fs::read(path)?)
}

pub fn save_csv(m: &RealMatrix, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_csv(m, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<RealMatrix> {
    read_csv(fs::File::open(path)?)
}
