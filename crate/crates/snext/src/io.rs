//! Plain-text serialization for vectors and matrices.
//!
//! Matrices: one row per line, space-separated decimals. Vectors: one
//! decimal per line. Values are written with enough digits to round-trip
//! `f64` exactly.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub fn format_matrix(m: &DMatrix<f64>) -> String {
    let mut s = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:?}", m[(i, j)])).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>().map_err(|_| {
                    Error::Parse(format!("line {}: invalid number `{tok}`", lineno + 1))
                })
            })
            .collect::<Result<_>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse(format!(
                    "line {}: expected {} columns, got {}",
                    lineno + 1,
                    first.len(),
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse("empty matrix text".into()));
    }
    let nrows = rows.len();
    let ncols = rows[0].len();
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn format_vector(v: &DVector<f64>) -> String {
    let mut s = String::new();
    for x in v.iter() {
        s.push_str(&format!("{x:?}\n"));
    }
    s
}

pub fn parse_vector(text: &str) -> Result<DVector<f64>> {
    let vals: Vec<f64> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(lineno, l)| {
            l.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("line {}: invalid number", lineno + 1)))
        })
        .collect::<Result<_>>()?;
    if vals.is_empty() {
        return Err(Error::Parse("empty vector text".into()));
    }
    Ok(DVector::from_vec(vals))
}

pub fn write_vector(path: &Path, v: &DVector<f64>) -> Result<()> {
    std::fs::write(path, format_vector(v))?;
    Ok(())
}

pub fn read_vector(path: &Path) -> Result<DVector<f64>> {
    parse_vector(&std::fs::read_to_string(path)?)
}
