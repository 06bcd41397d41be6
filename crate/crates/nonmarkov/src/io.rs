//! Plain-text exchange formats.
//!
//! Numbers are written with 17 significant digits in scientific notation so
//! that every `f64` round-trips exactly and repeated runs produce identical
//! bytes.

use std::io::{BufRead, Write};

use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};

/// Formats a float with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    if x == 0.0 {
        // Normalize -0.0 so dumps do not depend on the sign of zero.
        return format!("{:.16e}", 0.0f64);
    }
    format!("{x:.16e}")
}

pub const MATRIX_HEADER: &str = "row,col,re,im";

/// Writes `m` as CSV rows `(row, col, re, im)` in row-major order, header
/// included.
pub fn write_matrix_csv<W: Write>(mut w: W, m: &CMat) -> std::io::Result<()> {
    writeln!(w, "{MATRIX_HEADER}")?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            writeln!(w, "{i},{j},{},{}", fmt17(z.re), fmt17(z.im))?;
        }
    }
    Ok(())
}

/// Reads a matrix written by [`write_matrix_csv`]. Entries not listed are
/// zero; the shape is inferred from the largest indices.
pub fn read_matrix_csv<R: BufRead>(r: R) -> Result<CMat> {
    let mut entries = Vec::new();
    let (mut rows, mut cols) = (0usize, 0usize);
    for (k, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse { line: k + 1, message: e.to_string() })?;
        let line = line.trim();
        if line.is_empty() || (k == 0 && line == MATRIX_HEADER) {
            continue;
        }
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(Error::Parse { line: k + 1, message: format!("expected 4 fields, found {}", parts.len()) });
        }
        let bad = |what: &str| Error::Parse { line: k + 1, message: format!("cannot parse {what}") };
        let i: usize = parts[0].parse().map_err(|_| bad("row"))?;
        let j: usize = parts[1].parse().map_err(|_| bad("col"))?;
        let re: f64 = parts[2].parse().map_err(|_| bad("re"))?;
        let im: f64 = parts[3].parse().map_err(|_| bad("im"))?;
        rows = rows.max(i + 1);
        cols = cols.max(j + 1);
        entries.push((i, j, C64::new(re, im)));
    }
    let mut m = Mat::zeros(rows, cols);
    for (i, j, z) in entries {
        m[(i, j)] = z;
    }
    Ok(m)
}
