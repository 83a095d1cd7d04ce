//! Binary snapshot format for sampled trajectory data.
//!
//! Layout, all integers little-endian u64:
//! magic `RLXA1\0`, then dim, n_nodes, n_boundary, n_samples, n_columns,
//! then per column a u64 byte length + UTF-8 name, then the payload of
//! n_samples * n_columns f64 values in row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::{Error, Result};

pub const MAGIC: &[u8; 6] = b"RLXA1\0";

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub dim: u64,
    pub n_nodes: u64,
    pub n_boundary: u64,
    pub column_names: Vec<String>,
    /// Row-major, n_samples rows by column_names.len() columns.
    pub data: Vec<f64>,
}

fn snap_err(msg: impl Into<String>) -> Error {
    Error::Snapshot(msg.into())
}

impl Snapshot {
    pub fn new(
        dim: u64,
        n_nodes: u64,
        n_boundary: u64,
        column_names: Vec<String>,
        data: Vec<f64>,
    ) -> Result<Self> {
        if column_names.is_empty() {
            return Err(snap_err("snapshot needs at least one column"));
        }
        if data.len() % column_names.len() != 0 {
            return Err(snap_err(format!(
                "payload length {} not divisible by column count {}",
                data.len(),
                column_names.len()
            )));
        }
        Ok(Self { dim, n_nodes, n_boundary, column_names, data })
    }

    pub fn n_samples(&self) -> u64 {
        (self.data.len() / self.column_names.len()) as u64
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.column_names.iter().position(|c| c == name)?;
        let w = self.column_names.len();
        Some(self.data.iter().skip(idx).step_by(w).copied().collect())
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        for x in [
            self.dim,
            self.n_nodes,
            self.n_boundary,
            self.n_samples(),
            self.column_names.len() as u64,
        ] {
            w.write_all(&x.to_le_bytes())?;
        }
        for name in &self.column_names {
            w.write_all(&(name.len() as u64).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
        }
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 6];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(snap_err("bad magic bytes"));
        }
        let mut u64_buf = [0u8; 8];
        let mut next_u64 = |r: &mut dyn Read| -> Result<u64> {
            r.read_exact(&mut u64_buf)?;
            Ok(u64::from_le_bytes(u64_buf))
        };
        let dim = next_u64(r)?;
        let n_nodes = next_u64(r)?;
        let n_boundary = next_u64(r)?;
        let n_samples = next_u64(r)?;
        let n_columns = next_u64(r)?;
        if n_columns == 0 || n_columns > 1 << 20 {
            return Err(snap_err(format!("implausible column count {n_columns}")));
        }
        let mut column_names = Vec::with_capacity(n_columns as usize);
        for _ in 0..n_columns {
            let len = next_u64(r)? as usize;
            if len > 1 << 16 {
                return Err(snap_err("column name too long"));
            }
            let mut buf = vec![0u8; len];
            r.read_exact(&mut buf)?;
            column_names
                .push(String::from_utf8(buf).map_err(|_| snap_err("column name not UTF-8"))?);
        }
        let count = (n_samples as usize)
            .checked_mul(n_columns as usize)
            .ok_or_else(|| snap_err("payload size overflow"))?;
        let mut data = Vec::with_capacity(count);
        let mut f_buf = [0u8; 8];
        for _ in 0..count {
            r.read_exact(&mut f_buf)?;
            data.push(f64::from_le_bytes(f_buf));
        }
        // Must be at end of payload.
        let mut probe = [0u8; 1];
        if r.read(&mut probe)? != 0 {
            return Err(snap_err("trailing bytes after payload"));
        }
        Ok(Self { dim, n_nodes, n_boundary, column_names, data })
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        Self::read_from(&mut BufReader::new(File::open(path)?))
    }
}
