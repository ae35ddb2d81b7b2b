//! Per-iteration metrics and their CSV schema.
//!
//! The CSV layout is fixed: header
//! `iter,objective,consensus_err,stationarity,conservation_residual,alpha,rho,ms`
//! with one row per recorded iteration. Expensive columns hold `NaN` on
//! iterations where the metric period skips them.

use std::io::Write;
use std::path::Path;

use crate::error::Result;

pub const CSV_HEADER: &str =
    "iter,objective,consensus_err,stationarity,conservation_residual,alpha,rho,ms";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationMetrics {
    pub iter: usize,
    pub objective: f64,
    pub consensus_err: f64,
    pub stationarity: f64,
    pub conservation_residual: f64,
    pub alpha: f64,
    pub rho: f64,
    pub ms: f64,
}

impl IterationMetrics {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
            self.iter,
            self.objective,
            self.consensus_err,
            self.stationarity,
            self.conservation_residual,
            self.alpha,
            self.rho,
            self.ms
        )
    }
}

pub fn write_csv(path: &Path, rows: &[IterationMetrics]) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    writeln!(file, "{CSV_HEADER}")?;
    for row in rows {
        writeln!(file, "{}", row.csv_row())?;
    }
    file.flush()?;
    Ok(())
}
