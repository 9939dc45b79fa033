//! ε-support vector regression with an RBF kernel, trained by sequential
//! minimal optimization.
//!
//! The dual is written in the usual 2n-variable form: β = (α, α*) with
//! signs s = (+1…, −1…), linear term p = (ε − z, ε + z), and
//! Q_ij = s_i s_j k(x_i, x_j). Each step picks the maximal-violating index
//! and its partner by the second-order gain rule, then solves the
//! two-variable subproblem analytically under 0 ≤ β ≤ C and sᵀβ = 0.
//!
//! Targets are z-scored before training and mapped back at prediction time,
//! so ε, C and the stopping tolerance are in standardized target units.

use serde::{Deserialize, Serialize};

use super::{Matrix, MlError};
use crate::dataset::{mean, population_variance};

const TAU_QUAD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvrHyper {
    pub c: f64,
    pub epsilon: f64,
    /// RBF width; `None` means 1 / n_features.
    pub gamma: Option<f64>,
    pub tol: f64,
    pub max_iter: Option<usize>,
}

impl Default for SvrHyper {
    fn default() -> Self {
        Self {
            c: 1.0,
            epsilon: 0.1,
            gamma: None,
            tol: 1e-3,
            max_iter: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    pub support_vectors: Vec<Vec<f64>>,
    /// α − α* per support vector, in standardized target units.
    pub dual_coeffs: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub c: f64,
    pub epsilon: f64,
    pub target_offset: f64,
    pub target_scale: f64,
    pub iterations: usize,
    pub kkt_violation: f64,
}

fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
    (-gamma * d2).exp()
}

impl SvrModel {
    /// Decision value in standardized target units.
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.bias
            + self
                .support_vectors
                .iter()
                .zip(&self.dual_coeffs)
                .map(|(sv, c)| c * rbf(self.gamma, sv, x))
                .sum::<f64>()
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.target_offset + self.target_scale * self.decision(x)
    }
}

pub fn fit_svr(x: &Matrix, y: &[f64], hyper: &SvrHyper) -> Result<SvrModel, MlError> {
    let n = x.rows();
    if y.len() != n {
        return Err(MlError::Dimension {
            expected: n,
            got: y.len(),
        });
    }
    if n < 2 {
        return Err(MlError::Domain("SVR needs at least 2 rows".into()));
    }
    let gamma = hyper.gamma.unwrap_or(1.0 / x.cols().max(1) as f64);
    if !(hyper.c > 0.0 && hyper.epsilon >= 0.0 && gamma > 0.0 && hyper.tol > 0.0) {
        return Err(MlError::Domain(format!(
            "invalid SVR hyperparameters {hyper:?}"
        )));
    }
    let c = hyper.c;

    let offset = mean(y);
    let sd = population_variance(y).sqrt();
    let scale = if sd > 0.0 { sd } else { 1.0 };
    let z: Vec<f64> = y.iter().map(|v| (v - offset) / scale).collect();

    let mut kernel = vec![0.0; n * n];
    for i in 0..n {
        kernel[i * n + i] = 1.0;
        for j in 0..i {
            let k = rbf(gamma, x.row(i), x.row(j));
            kernel[i * n + j] = k;
            kernel[j * n + i] = k;
        }
    }

    let l = 2 * n;
    let sign = |t: usize| if t < n { 1.0 } else { -1.0 };
    let q = |i: usize, j: usize| sign(i) * sign(j) * kernel[(i % n) * n + (j % n)];
    let mut beta = vec![0.0; l];
    let mut grad: Vec<f64> = (0..l)
        .map(|t| {
            if t < n {
                hyper.epsilon - z[t]
            } else {
                hyper.epsilon + z[t - n]
            }
        })
        .collect();
    let is_upper = |b: f64| b >= c;
    let is_lower = |b: f64| b <= 0.0;

    let max_iter = hyper.max_iter.unwrap_or_else(|| (100 * l).max(10_000_000));
    let mut iterations = 0;
    let violation = loop {
        // first index: maximal −s·G over the "can move up" set
        let mut g_max = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..l {
            let v = -sign(t) * grad[t];
            let movable = if sign(t) > 0.0 {
                !is_upper(beta[t])
            } else {
                !is_lower(beta[t])
            };
            if movable && v > g_max {
                g_max = v;
                i_sel = Some(t);
            }
        }
        // second index: second-order gain over the "can move down" set
        let mut g_min_side = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut best_obj = f64::INFINITY;
        if let Some(i) = i_sel {
            for t in 0..l {
                let movable = if sign(t) > 0.0 {
                    !is_lower(beta[t])
                } else {
                    !is_upper(beta[t])
                };
                if !movable {
                    continue;
                }
                let v = sign(t) * grad[t];
                g_min_side = g_min_side.max(v);
                let diff = g_max + v;
                if diff > 0.0 {
                    let quad = kernel[(i % n) * n + (i % n)] + kernel[(t % n) * n + (t % n)]
                        - 2.0 * kernel[(i % n) * n + (t % n)];
                    let obj = -(diff * diff) / if quad > 0.0 { quad } else { TAU_QUAD };
                    if obj < best_obj {
                        best_obj = obj;
                        j_sel = Some(t);
                    }
                }
            }
        }
        let gap = g_max + g_min_side;
        let (i, j) = match (i_sel, j_sel) {
            (Some(i), Some(j)) if gap >= hyper.tol => (i, j),
            _ => break gap.max(0.0),
        };
        if iterations >= max_iter {
            return Err(MlError::SvrNotConverged {
                iterations,
                violation: gap,
            });
        }
        iterations += 1;

        let (old_i, old_j) = (beta[i], beta[j]);
        let qij = q(i, j);
        if sign(i) != sign(j) {
            let quad = (2.0 + 2.0 * qij).max(TAU_QUAD);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = beta[i] - beta[j];
            beta[i] += delta;
            beta[j] += delta;
            if diff > 0.0 {
                if beta[j] < 0.0 {
                    beta[j] = 0.0;
                    beta[i] = diff;
                }
            } else if beta[i] < 0.0 {
                beta[i] = 0.0;
                beta[j] = -diff;
            }
            if diff > 0.0 {
                if beta[i] > c {
                    beta[i] = c;
                    beta[j] = c - diff;
                }
            } else if beta[j] > c {
                beta[j] = c;
                beta[i] = c + diff;
            }
        } else {
            let quad = (2.0 - 2.0 * qij).max(TAU_QUAD);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = beta[i] + beta[j];
            beta[i] -= delta;
            beta[j] += delta;
            if sum > c {
                if beta[i] > c {
                    beta[i] = c;
                    beta[j] = sum - c;
                }
            } else if beta[j] < 0.0 {
                beta[j] = 0.0;
                beta[i] = sum;
            }
            if sum > c {
                if beta[j] > c {
                    beta[j] = c;
                    beta[i] = sum - c;
                }
            } else if beta[i] < 0.0 {
                beta[i] = 0.0;
                beta[j] = sum;
            }
        }
        let (di, dj) = (beta[i] - old_i, beta[j] - old_j);
        for (t, g) in grad.iter_mut().enumerate() {
            *g += q(i, t) * di + q(j, t) * dj;
        }
    };

    // ρ from free variables, else midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free_sum, mut n_free) = (0.0, 0usize);
    for t in 0..l {
        let yg = sign(t) * grad[t];
        if is_upper(beta[t]) {
            if sign(t) < 0.0 {
                ub = ub.min(yg)
            } else {
                lb = lb.max(yg)
            }
        } else if is_lower(beta[t]) {
            if sign(t) > 0.0 {
                ub = ub.min(yg)
            } else {
                lb = lb.max(yg)
            }
        } else {
            n_free += 1;
            free_sum += yg;
        }
    }
    let rho = if n_free > 0 {
        free_sum / n_free as f64
    } else {
        (ub + lb) / 2.0
    };

    let mut support_vectors = Vec::new();
    let mut dual_coeffs = Vec::new();
    for i in 0..n {
        let coef = beta[i] - beta[i + n];
        if coef != 0.0 {
            support_vectors.push(x.row(i).to_vec());
            dual_coeffs.push(coef);
        }
    }
    Ok(SvrModel {
        support_vectors,
        dual_coeffs,
        bias: -rho,
        gamma,
        c,
        epsilon: hyper.epsilon,
        target_offset: offset,
        target_scale: scale,
        iterations,
        kkt_violation: violation,
    })
}
