//! CSV dataset ingestion: header-named target column, numeric feature
//! columns, seeded 80/20 train/test split, and feature standardization
//! computed from the training split only.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Per-feature affine transform `(x - mean) / scale` fitted on the
/// training rows. A constant column gets unit scale instead of zero, so
/// standardized values stay finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub means: DVector<f64>,
    pub scales: DVector<f64>,
}

impl Standardization {
    /// Fits means and standard deviations (population form, divisor `n`).
    pub fn fit(rows: &DMatrix<f64>) -> Result<Self> {
        let n = rows.nrows();
        if n == 0 {
            return Err(Error::Dataset("cannot standardize an empty split".into()));
        }
        let p = rows.ncols();
        let means = DVector::from_fn(p, |j, _| rows.column(j).sum() / n as f64);
        let scales = DVector::from_fn(p, |j, _| {
            let var = rows
                .column(j)
                .iter()
                .map(|v| (v - means[j]).powi(2))
                .sum::<f64>()
                / n as f64;
            if var < 1e-24 {
                1.0
            } else {
                var.sqrt()
            }
        });
        Ok(Self { means, scales })
    }

    pub fn apply(&self, rows: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(rows.nrows(), rows.ncols(), |i, j| {
            (rows[(i, j)] - self.means[j]) / self.scales[j]
        })
    }
}

/// Standardized train/test split of a regression table.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub train_features: DMatrix<f64>,
    pub train_targets: DVector<f64>,
    pub test_features: DMatrix<f64>,
    pub test_targets: DVector<f64>,
    pub standardization: Standardization,
}

impl Dataset {
    pub fn feature_count(&self) -> usize {
        self.train_features.ncols()
    }
}

fn parse_cell(raw: &str, row: usize, column: &str) -> Result<f64> {
    raw.trim().parse::<f64>().map_err(|_| {
        Error::Dataset(format!(
            "non-numeric value {raw:?} at data row {row}, column {column:?}"
        ))
    })
}

/// Loads a CSV with a header row, extracts `target_column`, splits 80/20
/// with a seeded shuffle, and standardizes features with training-split
/// statistics.
pub fn load_csv_dataset(path: &Path, target_column: &str, seed: u64) -> Result<Dataset> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Dataset(format!("cannot open {}: {e}", path.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Dataset(format!("bad header row: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let target_index = headers
        .iter()
        .position(|h| h == target_column)
        .ok_or_else(|| {
            Error::Dataset(format!(
                "target column {target_column:?} not found; columns: {headers:?}"
            ))
        })?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != target_index)
        .map(|(_, h)| h.clone())
        .collect();
    if feature_names.is_empty() {
        return Err(Error::Dataset("no feature columns besides the target".into()));
    }

    let mut features: Vec<Vec<f64>> = Vec::new();
    let mut targets: Vec<f64> = Vec::new();
    for (row_index, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Dataset(format!("row {row_index}: {e}")))?;
        if record.len() != headers.len() {
            return Err(Error::Dataset(format!(
                "row {row_index} has {} fields, expected {}",
                record.len(),
                headers.len()
            )));
        }
        let mut row = Vec::with_capacity(feature_names.len());
        for (j, raw) in record.iter().enumerate() {
            let value = parse_cell(raw, row_index, &headers[j])?;
            if j == target_index {
                targets.push(value);
            } else {
                row.push(value);
            }
        }
        features.push(row);
    }
    if features.is_empty() {
        return Err(Error::Dataset("no data rows".into()));
    }

    let n = features.len();
    let p = feature_names.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    // 80/20 split; at least one training row, and a test row whenever n > 1.
    let train_len = ((n as f64 * 0.8).round() as usize).clamp(1, n.saturating_sub(1).max(1));

    let gather = |idx: &[usize]| -> (DMatrix<f64>, DVector<f64>) {
        let m = DMatrix::from_fn(idx.len(), p, |i, j| features[idx[i]][j]);
        let t = DVector::from_fn(idx.len(), |i, _| targets[idx[i]]);
        (m, t)
    };
    let (train_raw, train_targets) = gather(&order[..train_len]);
    let (test_raw, test_targets) = gather(&order[train_len..]);

    let standardization = Standardization::fit(&train_raw)?;
    Ok(Dataset {
        feature_names,
        train_features: standardization.apply(&train_raw),
        train_targets,
        test_features: standardization.apply(&test_raw),
        test_targets,
        standardization,
    })
}
