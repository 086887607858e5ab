//! File formats: the binary matrix container and CSV writers.
//!
//! Binary container layout (little-endian):
//!
//! ```text
//! b"SBMX"  u32 version = 1  u64 rows  u64 cols  rows*cols * (f64 re, f64 im), row-major
//! ```

use std::io::{Read, Write};

use nalgebra::DMatrix;

use crate::signal::SnapshotEnsemble;
use crate::{Error, Result, C64};

pub const MAGIC: &[u8; 4] = b"SBMX";
pub const VERSION: u32 = 1;

pub fn write_matrix<W: Write>(mut w: W, a: &DMatrix<C64>) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(a.nrows() as u64).to_le_bytes())?;
    w.write_all(&(a.ncols() as u64).to_le_bytes())?;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let z = a[(i, j)];
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_matrix<R: Read>(mut r: R) -> Result<DMatrix<C64>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let rows = u64::from_le_bytes(b8) as usize;
    r.read_exact(&mut b8)?;
    let cols = u64::from_le_bytes(b8) as usize;
    let count = rows.checked_mul(cols).ok_or_else(|| Error::Format("dimensions overflow".into()))?;
    let mut data = Vec::with_capacity(count);
    for _ in 0..count {
        r.read_exact(&mut b8)?;
        let re = f64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let im = f64::from_le_bytes(b8);
        data.push(C64::new(re, im));
    }
    Ok(DMatrix::from_row_iterator(rows, cols, data))
}

/// Rows `k,m,re,im`.
pub fn matrix_csv(a: &DMatrix<C64>) -> String {
    let mut s = String::from("k,m,re,im\n");
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let z = a[(i, j)];
            s.push_str(&format!("{i},{j},{:e},{:e}\n", z.re, z.im));
        }
    }
    s
}

/// Rows `k,lambda_k,lambda_k_over_lambda_1` with `k` starting at 1.
pub fn spectrum_csv(eigenvalues: &[f64]) -> String {
    let mut s = String::from("k,lambda_k,lambda_k_over_lambda_1\n");
    let top = eigenvalues.first().copied().unwrap_or(0.0);
    for (k, &v) in eigenvalues.iter().enumerate() {
        let ratio = if top > 0.0 { v / top } else { 0.0 };
        s.push_str(&format!("{},{:e},{:e}\n", k + 1, v, ratio));
    }
    s
}

/// Rows `t,element_index,re,im`, preceded by a seed comment.
pub fn ensemble_csv(e: &SnapshotEnsemble, seed: u64) -> String {
    let mut s = format!("# seed={seed}\nt,element_index,re,im\n");
    for (t, y) in e.timestamps.iter().zip(&e.samples) {
        for (m, z) in y.iter().enumerate() {
            s.push_str(&format!("{t:e},{m},{:e},{:e}\n", z.re, z.im));
        }
    }
    s
}
