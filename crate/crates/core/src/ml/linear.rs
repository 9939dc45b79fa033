use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Matrix, MlError};
use crate::dataset::mean;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Set when the centred design lost rank and the minimum-norm solution
    /// was used.
    pub rank_deficient: bool,
}

impl LinearModel {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }
}

/// Ordinary least squares with an intercept. The intercept is eliminated by
/// centring; the centred system is solved with Householder QR, or with an
/// SVD pseudo-inverse when it is numerically rank deficient.
pub fn fit_linear(x: &Matrix, y: &[f64]) -> Result<LinearModel, MlError> {
    let (n, p) = (x.rows(), x.cols());
    if y.len() != n {
        return Err(MlError::Dimension {
            expected: n,
            got: y.len(),
        });
    }
    if n < p + 1 {
        return Err(MlError::Domain(format!(
            "linear fit needs at least {} rows for {} features, got {}",
            p + 1,
            p,
            n
        )));
    }
    let y_mean = mean(y);
    if p == 0 {
        return Ok(LinearModel {
            weights: Vec::new(),
            bias: y_mean,
            rank_deficient: false,
        });
    }
    let x_mean: Vec<f64> = (0..p)
        .map(|j| mean(&x.column(j).collect::<Vec<_>>()))
        .collect();
    let xc = DMatrix::from_fn(n, p, |i, j| x.get(i, j) - x_mean[j]);
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));

    let svd = xc.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let tol = s_max * (n.max(p) as f64) * f64::EPSILON;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();

    let (w, rank_deficient) = if rank < p {
        let w = svd
            .solve(&yc, tol)
            .map_err(|e| MlError::Domain(format!("pseudo-inverse failed: {e}")))?;
        (w, true)
    } else {
        let qr = xc.qr();
        let qty = qr.q().transpose() * &yc;
        let w = qr
            .r()
            .solve_upper_triangular(&qty)
            .ok_or_else(|| MlError::Domain("singular triangular factor".into()))?;
        (w, false)
    };
    let weights: Vec<f64> = w.iter().copied().collect();
    let bias = y_mean - weights.iter().zip(&x_mean).map(|(w, m)| w * m).sum::<f64>();
    Ok(LinearModel {
        weights,
        bias,
        rank_deficient,
    })
}
