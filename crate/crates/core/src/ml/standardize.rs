use serde::{Deserialize, Serialize};

use super::{Matrix, MlError};
use crate::dataset::mean;

/// Per-feature z-scoring with population statistics. Constant columns are
/// dropped rather than scaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Indices of the retained (non-constant) input columns.
    pub kept: Vec<usize>,
    pub n_input: usize,
}

pub fn fit_standardizer(x: &Matrix) -> Result<Standardizer, MlError> {
    if x.rows() < 2 {
        return Err(MlError::Domain(format!(
            "standardizer needs at least 2 rows, got {}",
            x.rows()
        )));
    }
    let n = x.rows() as f64;
    let mut mu = Vec::with_capacity(x.cols());
    let mut sigma = Vec::with_capacity(x.cols());
    let mut kept = Vec::new();
    for j in 0..x.cols() {
        let col: Vec<f64> = x.column(j).collect();
        let m = mean(&col);
        let s = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt();
        let constant = col.iter().all(|&v| v == col[0]);
        if !constant && s > 0.0 {
            kept.push(j);
        }
        mu.push(m);
        sigma.push(s);
    }
    Ok(Standardizer {
        mu,
        sigma,
        kept,
        n_input: x.cols(),
    })
}

impl Standardizer {
    pub fn n_features(&self) -> usize {
        self.kept.len()
    }

    pub fn dropped(&self) -> Vec<usize> {
        (0..self.n_input)
            .filter(|j| !self.kept.contains(j))
            .collect()
    }

    pub fn transform(&self, x: &Matrix) -> Result<Matrix, MlError> {
        if x.cols() != self.n_input {
            return Err(MlError::Dimension {
                expected: self.n_input,
                got: x.cols(),
            });
        }
        let mut data = Vec::with_capacity(x.rows() * self.kept.len());
        for row in x.iter_rows() {
            data.extend(
                self.kept
                    .iter()
                    .map(|&j| (row[j] - self.mu[j]) / self.sigma[j]),
            );
        }
        Ok(Matrix::new(x.rows(), self.kept.len(), data))
    }
}
