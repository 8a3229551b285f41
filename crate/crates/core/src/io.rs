//! File formats: varint walk logs with a JSON sidecar, and CSV tables.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn write_varint<W: Write>(out: &mut W, mut v: u64) -> Result<()> {
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            out.write_all(&[byte])?;
            return Ok(());
        }
        out.write_all(&[byte | 0x80])?;
    }
}

pub fn read_varints(bytes: &[u8]) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    let mut v = 0u64;
    let mut shift = 0;
    for &b in bytes {
        if shift >= 64 {
            return Err(Error::Parse("varint overflow".into()));
        }
        v |= ((b & 0x7f) as u64) << shift;
        if b & 0x80 == 0 {
            out.push(v);
            v = 0;
            shift = 0;
        } else {
            shift += 7;
        }
    }
    if shift != 0 {
        return Err(Error::Parse("truncated varint".into()));
    }
    Ok(out)
}

/// Sidecar describing a binary walk log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkLogMeta {
    pub seed: u64,
    pub steps: usize,
    pub tree_vertices: usize,
    pub tree_hash: String,
}

pub fn write_walk_log<W: Write>(mut out: W, steps: &[u32]) -> Result<()> {
    for &s in steps {
        write_varint(&mut out, s as u64)?;
    }
    Ok(())
}

pub fn read_walk_log<R: Read>(mut input: R) -> Result<Vec<u32>> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    read_varints(&bytes)?
        .into_iter()
        .map(|v| u32::try_from(v).map_err(|_| Error::Parse("vertex id too large".into())))
        .collect()
}

/// Writes a CSV table with a header row; floats get 17 significant digits.
pub fn write_csv_table<W: Write>(mut out: W, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn varint_round_trip() {
        let steps = vec![0u32, 1, 127, 128, 300, 16_384, u32::MAX];
        let mut buf = Vec::new();
        write_walk_log(&mut buf, &steps).unwrap();
        assert_eq!(read_walk_log(&buf[..]).unwrap(), steps);
        assert!(read_varints(&[0x80]).is_err());
    }
}
