//! Regression models for the narrowband coefficient components.
//!
//! Each target component (real, imaginary) gets its own predictor. A
//! predictor owns the standardizer fitted on its training rows, so test
//! data can only ever be scaled with training statistics.

mod linear;
mod predictor;
mod standardize;
mod svr;
mod tree;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use linear::{fit_linear, LinearModel};
pub use predictor::{
    fit_predictor, predict, Hyper, Model, ModelFamily, Target, TrainMeta, TrainedPredictor,
};
pub use standardize::{fit_standardizer, Standardizer};
pub use svr::{fit_svr, SvrHyper, SvrModel};
pub use tree::{fit_tree, Node, TreeHyper, TreeModel};

#[derive(Debug, Error)]
pub enum MlError {
    #[error("{0}")]
    Domain(String),
    #[error("dimension mismatch: expected {expected} columns, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("SVR did not converge after {iterations} iterations (KKT violation {violation:.3e})")]
    SvrNotConverged { iterations: usize, violation: f64 },
    #[error("model document: {0}")]
    Document(#[from] serde_json::Error),
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Self { rows, cols, data }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.as_ref().len(), cols, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.rows).map(move |i| self.get(i, j))
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }
}
