//! Error metrics, empirical CDFs of absolute errors, histograms and the
//! model comparison report.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{mean, population_variance, ChannelSample};
use crate::ml::{predict, Matrix, MlError, ModelFamily, Target, TrainedPredictor};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{0}")]
    Domain(String),
    #[error(transparent)]
    Model(#[from] MlError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("report encoding: {0}")]
    Encode(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metrics {
    pub n: usize,
    pub mae: f64,
    pub rmse: f64,
    /// `None` when the targets carry no variance.
    pub r2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r2_undefined_reason: Option<String>,
}

pub fn compute_metrics(y: &[f64], y_hat: &[f64]) -> Result<Metrics, EvalError> {
    if y.len() != y_hat.len() {
        return Err(EvalError::Domain(format!(
            "length mismatch: {} targets, {} predictions",
            y.len(),
            y_hat.len()
        )));
    }
    if y.is_empty() {
        return Err(EvalError::Domain("metrics need at least one sample".into()));
    }
    let n = y.len() as f64;
    let mae = y.iter().zip(y_hat).map(|(a, b)| (a - b).abs()).sum::<f64>() / n;
    let ss_res: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum();
    let rmse = (ss_res / n).sqrt();
    let y_bar = mean(y);
    let ss_tot: f64 = y.iter().map(|v| (v - y_bar) * (v - y_bar)).sum();
    let (r2, r2_undefined_reason) = if y.len() < 2 {
        (None, Some("a single sample has no variance".to_string()))
    } else if ss_tot == 0.0 {
        (None, Some("targets are constant".to_string()))
    } else {
        (Some(1.0 - ss_res / ss_tot), None)
    };
    Ok(Metrics {
        n: y.len(),
        mae,
        rmse,
        r2,
        r2_undefined_reason,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcdfCurve {
    /// (|e|, F) pairs, one per error, sorted by |e|.
    pub points: Vec<(f64, f64)>,
}

pub fn ecdf(errors: &[f64]) -> Result<EcdfCurve, EvalError> {
    if errors.is_empty() {
        return Err(EvalError::Domain("eCDF of an empty error set".into()));
    }
    if errors.iter().any(|e| !e.is_finite()) {
        return Err(EvalError::Domain(
            "eCDF input contains a non-finite error".into(),
        ));
    }
    let mut abs: Vec<f64> = errors.iter().map(|e| e.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let n = abs.len();
    let mut points = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && abs[j + 1] == abs[i] {
            j += 1;
        }
        let f = (j + 1) as f64 / n as f64;
        points.extend((i..=j).map(|k| (abs[k], f)));
        i = j + 1;
    }
    Ok(EcdfCurve { points })
}

impl EcdfCurve {
    /// Smallest |e| whose cumulative probability reaches `q`.
    pub fn quantile(&self, q: f64) -> Option<f64> {
        if !(q > 0.0 && q <= 1.0) {
            return None;
        }
        // F at the k-th sorted point is at least k/N, so the answer is the
        // ⌈qN⌉-th order statistic
        let k = ((q * self.points.len() as f64).ceil() as usize).clamp(1, self.points.len());
        Some(self.points[k - 1].0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

const MAX_BINS: usize = 10_000;

/// Linearly interpolated sample quantile of sorted data.
fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Histogram with Freedman–Diaconis bin width 2·IQR·n^(−1/3). A zero IQR or
/// zero range falls back to a single bin.
pub fn histogram(values: &[f64]) -> Result<Histogram, EvalError> {
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(EvalError::Domain(
            "histogram needs finite, non-empty input".into(),
        ));
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let (lo, hi) = (s[0], s[s.len() - 1]);
    let iqr = sorted_quantile(&s, 0.75) - sorted_quantile(&s, 0.25);
    let width = 2.0 * iqr / (s.len() as f64).cbrt();
    let bins = if hi > lo && width > 0.0 {
        (((hi - lo) / width).ceil() as usize).clamp(1, MAX_BINS)
    } else {
        1
    };
    let step = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|k| lo + step * k as f64).collect();
    edges.push(hi);
    let mut counts = vec![0; bins];
    for &v in &s {
        let k = if step > 0.0 {
            (((v - lo) / step) as usize).min(bins - 1)
        } else {
            0
        };
        counts[k] += 1;
    }
    Ok(Histogram { edges, counts })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportRow {
    /// Model family name, or "mean" for the baseline.
    pub model: String,
    pub target: Target,
    pub holdout: Metrics,
    /// 95th-percentile absolute holdout error.
    pub p95_abs_error: f64,
    /// Same metrics on the validation rows, when supplied.
    pub validation: Option<Metrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSummary {
    pub target: Target,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub n_holdout: usize,
    pub n_validation: usize,
    pub variance_convention: String,
    pub holdout_targets: Vec<TargetSummary>,
    pub rows: Vec<ReportRow>,
}

pub const BASELINE: &str = "mean";

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: Report,
    /// (model, target, holdout eCDF) in report row order.
    pub curves: Vec<(String, Target, EcdfCurve)>,
}

pub fn target_values(samples: &[ChannelSample], target: Target) -> Vec<f64> {
    samples
        .iter()
        .map(|s| match target {
            Target::Re => s.h.re,
            Target::Im => s.h.im,
        })
        .collect()
}

pub fn design_matrix(samples: &[ChannelSample]) -> Matrix {
    let rows: Vec<[f64; 6]> = samples.iter().map(ChannelSample::features).collect();
    Matrix::new(samples.len(), 6, rows.concat())
}

/// Scores every predictor plus a mean-of-the-evaluation-set baseline on the
/// holdout rows, and on the validation rows when given. Rows are ordered by
/// target, then lr, svr, dtr, baseline.
pub fn compare_models(
    predictors: &[TrainedPredictor],
    holdout: &[ChannelSample],
    validation: &[ChannelSample],
) -> Result<Evaluation, EvalError> {
    if holdout.is_empty() {
        return Err(EvalError::Domain("empty holdout set".into()));
    }
    let mut families = BTreeSet::new();
    for p in predictors {
        if !families.insert((p.family(), p.target)) {
            return Err(EvalError::Domain(format!(
                "duplicate predictor {} {}",
                p.family(),
                p.target
            )));
        }
    }
    for &(f, _) in &families {
        for t in Target::ALL {
            if !families.contains(&(f, t)) {
                return Err(EvalError::Domain(format!(
                    "model {f} lacks a predictor for target {t}"
                )));
            }
        }
    }
    let x_hold = design_matrix(holdout);
    let x_val = design_matrix(validation);
    let mut rows = Vec::new();
    let mut curves = Vec::new();
    let mut summaries = Vec::new();
    for target in Target::ALL {
        let y_hold = target_values(holdout, target);
        let y_val = target_values(validation, target);
        summaries.push(TargetSummary {
            target,
            mean: mean(&y_hold),
            std: population_variance(&y_hold).sqrt(),
        });
        for family in ModelFamily::ALL {
            let Some(p) = predictors
                .iter()
                .find(|p| p.family() == family && p.target == target)
            else {
                continue;
            };
            let pred = predict(p, &x_hold)?;
            let val = if validation.is_empty() {
                None
            } else {
                Some(compute_metrics(&y_val, &predict(p, &x_val)?)?)
            };
            push_row(
                &mut rows,
                &mut curves,
                family.name(),
                target,
                &y_hold,
                &pred,
                val,
            )?;
        }
        // the baseline predicts each evaluation set's own mean
        let base = vec![mean(&y_hold); y_hold.len()];
        let val = if validation.is_empty() {
            None
        } else {
            Some(compute_metrics(&y_val, &vec![mean(&y_val); y_val.len()])?)
        };
        push_row(
            &mut rows,
            &mut curves,
            BASELINE,
            target,
            &y_hold,
            &base,
            val,
        )?;
    }
    Ok(Evaluation {
        report: Report {
            n_holdout: holdout.len(),
            n_validation: validation.len(),
            variance_convention: "population".into(),
            holdout_targets: summaries,
            rows,
        },
        curves,
    })
}

fn push_row(
    rows: &mut Vec<ReportRow>,
    curves: &mut Vec<(String, Target, EcdfCurve)>,
    model: &str,
    target: Target,
    y: &[f64],
    pred: &[f64],
    validation: Option<Metrics>,
) -> Result<(), EvalError> {
    let holdout = compute_metrics(y, pred)?;
    let errors: Vec<f64> = y.iter().zip(pred).map(|(a, b)| a - b).collect();
    let curve = ecdf(&errors)?;
    let p95 = curve.quantile(0.95).unwrap_or(f64::NAN);
    rows.push(ReportRow {
        model: model.into(),
        target,
        holdout,
        p95_abs_error: p95,
        validation,
    });
    curves.push((model.into(), target, curve));
    Ok(())
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EvalError + '_ {
    move |source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), EvalError> {
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(text.as_bytes()).map_err(io_err(path))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NaN".into(), |x| format!("{x:e}"))
}

impl Report {
    pub fn to_json(&self) -> Result<String, EvalError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "model,target,n,mae,rmse,r2,p95_abs_error,val_n,val_mae,val_rmse,val_r2\n",
        );
        for r in &self.rows {
            let m = &r.holdout;
            out.push_str(&format!(
                "{},{},{},{:e},{:e},{},{:e},",
                r.model,
                r.target,
                m.n,
                m.mae,
                m.rmse,
                opt(m.r2),
                r.p95_abs_error
            ));
            match &r.validation {
                Some(v) => {
                    out.push_str(&format!("{},{:e},{:e},{}\n", v.n, v.mae, v.rmse, opt(v.r2)))
                }
                None => out.push_str(",,,\n"),
            }
        }
        out
    }

    pub fn row(&self, model: &str, target: Target) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.model == model && r.target == target)
    }
}

pub fn ecdf_csv(curve: &EcdfCurve) -> String {
    let mut out = String::from("abs_error,F\n");
    for (x, f) in &curve.points {
        out.push_str(&format!("{x:e},{f}\n"));
    }
    out
}

pub fn histogram_csv(h: &Histogram) -> String {
    let mut out = String::from("bin_lo,bin_hi,count\n");
    for (k, c) in h.counts.iter().enumerate() {
        out.push_str(&format!("{:e},{:e},{}\n", h.edges[k], h.edges[k + 1], c));
    }
    out
}

/// Writes report.json, report.csv, ecdf_<model>_<target>.csv and
/// hist_<target>.csv (distribution of the supplied samples) into `dir`.
pub fn write_report_files(
    dir: &Path,
    eval: &Evaluation,
    samples: &[ChannelSample],
) -> Result<Vec<PathBuf>, EvalError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    let mut emit = |name: String, text: String| -> Result<(), EvalError> {
        let p = dir.join(name);
        write_file(&p, &text)?;
        written.push(p);
        Ok(())
    };
    emit("report.json".into(), eval.report.to_json()?)?;
    emit("report.csv".into(), eval.report.to_csv())?;
    for (model, target, curve) in &eval.curves {
        emit(format!("ecdf_{model}_{target}.csv"), ecdf_csv(curve))?;
    }
    if !samples.is_empty() {
        for target in Target::ALL {
            emit(
                format!("hist_{target}.csv"),
                histogram_csv(&histogram(&target_values(samples, target))?),
            )?;
        }
    }
    Ok(written)
}
