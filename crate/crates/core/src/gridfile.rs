//! Self-describing grid files: an 8-byte magic, a little-endian `u64`
//! header length, a JSON header, then `(re, im)` little-endian `f64` pairs in
//! row-major order. Small grids can also be written as CSV.

use std::io::{Read, Write};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::amplitude::{Adequacy, GridSpec, JointAmplitudeGrid, Kernel};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"MEGRID\0\x01";
pub const GRID_SCHEMA_VERSION: u32 = 1;
/// Largest grid written as CSV.
pub const CSV_MAX_NODES: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub schema_version: u32,
    /// Stored rows.
    pub n_q: usize,
    /// Stored columns, graded tail cells included.
    pub n_k: usize,
    pub q_min: f64,
    pub q_max: f64,
    pub k_min: f64,
    pub k_max: f64,
    pub scheme: crate::amplitude::Scheme,
    pub spec: GridSpec,
    pub params: Kernel,
    pub norm: f64,
    pub fingerprint: String,
    #[serde(default)]
    pub adequacy: Option<Adequacy>,
}

impl GridHeader {
    pub fn of(grid: &JointAmplitudeGrid) -> Self {
        let s = grid.spec;
        GridHeader {
            schema_version: GRID_SCHEMA_VERSION,
            n_q: grid.n_rows(),
            n_k: grid.n_cols(),
            q_min: s.q_min,
            q_max: s.q_max,
            k_min: s.k_min,
            k_max: s.k_max,
            scheme: s.scheme,
            spec: s,
            params: grid.kernel.clone(),
            norm: grid.norm,
            fingerprint: grid.params_fingerprint.clone(),
            adequacy: grid.adequacy,
        }
    }
}

pub fn write_binary<W: Write>(mut w: W, grid: &JointAmplitudeGrid) -> Result<()> {
    let header = serde_json::to_vec(&GridHeader::of(grid))?;
    w.write_all(MAGIC)?;
    w.write_all(&(header.len() as u64).to_le_bytes())?;
    w.write_all(&header)?;
    let mut buf = Vec::with_capacity(16 * grid.n_cols());
    for i in 0..grid.n_rows() {
        buf.clear();
        for z in grid.row(i) {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_binary<R: Read>(mut r: R) -> Result<(GridHeader, Vec<C64>)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a grid file (bad magic)".into()));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len);
    if len > 1 << 24 {
        return Err(Error::Format(format!("header length {len} is implausible")));
    }
    let mut header = vec![0u8; len as usize];
    r.read_exact(&mut header)?;
    let header: GridHeader = serde_json::from_slice(&header)?;
    if header.schema_version != GRID_SCHEMA_VERSION {
        return Err(Error::Format(format!(
            "unsupported schema version {}",
            header.schema_version
        )));
    }
    let count = header
        .n_q
        .checked_mul(header.n_k)
        .ok_or_else(|| Error::Format("node count overflows".into()))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != 16 * count {
        return Err(Error::Format(format!(
            "expected {} payload bytes, found {}",
            16 * count,
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            C64::new(re, im)
        })
        .collect();
    Ok((header, values))
}

/// Long-form CSV: `dq,dk,weight,re,im`, preceded by `#` header lines.
pub fn write_csv<W: Write>(mut w: W, grid: &JointAmplitudeGrid) -> Result<()> {
    let nodes = grid.n_rows() * grid.n_cols();
    if nodes > CSV_MAX_NODES {
        return Err(Error::BudgetExceeded {
            what: "CSV grid nodes",
            needed: nodes,
            budget: CSV_MAX_NODES,
        });
    }
    writeln!(w, "# {}", serde_json::to_string(&GridHeader::of(grid))?)?;
    writeln!(w, "dq,dk,weight,re,im")?;
    let (rows, cols) = (grid.rows(), grid.cols());
    for i in 0..grid.n_rows() {
        for j in 0..grid.n_cols() {
            let (dq, dk) = grid.coordinates(i, j);
            let b = grid.value(i, j);
            writeln!(
                w,
                "{dq:e},{dk:e},{:e},{:e},{:e}",
                rows.weights[i] * cols.weights[j],
                b.re,
                b.im
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amplitude::sample_grid;
    use crate::model::{derive, AtomParams};

    #[test]
    fn binary_round_trip() {
        let p = AtomParams::symmetric(0.1, 0.1, 0.2, 3.0);
        let spec = GridSpec::schmidt_default(&derive(&p).unwrap(), 0.1, 0.1);
        let grid = sample_grid(&p, &spec).unwrap();
        let mut buf = Vec::new();
        write_binary(&mut buf, &grid).unwrap();
        let (header, values) = read_binary(buf.as_slice()).unwrap();
        assert_eq!(header, GridHeader::of(&grid));
        assert_eq!(values, grid.values);
        assert_eq!(header.params, Kernel::Emission { params: p });
    }

    #[test]
    fn truncated_or_foreign_files_are_rejected() {
        let p = AtomParams::symmetric(0.1, 0.1, 0.2, 3.0);
        let spec = GridSpec::schmidt_default(&derive(&p).unwrap(), 0.1, 0.1);
        let grid = sample_grid(&p, &spec).unwrap();
        let mut buf = Vec::new();
        write_binary(&mut buf, &grid).unwrap();
        buf.pop();
        assert!(matches!(read_binary(buf.as_slice()), Err(Error::Format(_))));
        assert!(matches!(read_binary(&b"NOTAGRID00000000"[..]), Err(Error::Format(_))));
    }
}
