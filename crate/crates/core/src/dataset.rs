//! Dataset generation over sampled receivers, descriptive statistics, the
//! train/validation/holdout split and CSV persistence with a JSON sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{synthesize, ComplexCoefficient, PruningConfig};
use crate::geo::LocalPoint;
use crate::raytracer::{PathTracer, PropagationPath, TraceConfig, TraceError};
use crate::rng::{stream_rng, Stream};
use crate::scene::{sample_receiver_positions, Scene, SceneError};

pub const CSV_HEADER: [&str; 8] = [
    "tx_x", "tx_y", "tx_z", "rx_x", "rx_y", "rx_z", "h_re", "h_im",
];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("{0}")]
    Domain(String),
    #[error("{path}: row {row}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: bad metadata: {source}")]
    Meta {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelSample {
    pub tx: LocalPoint,
    pub rx: LocalPoint,
    pub h: ComplexCoefficient,
}

impl ChannelSample {
    /// Raw feature row: tx_x, tx_y, tx_z, rx_x, rx_y, rx_z.
    pub fn features(&self) -> [f64; 6] {
        [
            self.tx.x, self.tx.y, self.tx.z, self.rx.x, self.rx.y, self.rx.z,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMeta {
    pub total_receivers: usize,
    pub valid_count: usize,
    pub valid_ratio: f64,
    pub seed: u64,
    pub trace_cfg: TraceConfig,
    pub prune_cfg: PruningConfig,
    pub scene_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<ChannelSample>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> Vec<ChannelSample> {
        indices.iter().map(|&i| self.samples[i]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerateOptions {
    pub rx_count: usize,
    pub rx_height: f64,
    pub seed: u64,
    /// Worker threads; `None` uses the global rayon pool.
    pub workers: Option<usize>,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        Self {
            rx_count: 15000,
            rx_height: 1.5,
            seed: 0,
            workers: None,
        }
    }
}

/// Per-receiver trace output, kept for optional path dumps.
pub struct ReceiverTrace {
    pub rx: LocalPoint,
    pub paths: Vec<PropagationPath>,
    pub h: Option<ComplexCoefficient>,
}

/// Traces every sampled receiver; results come back in sampling order
/// whatever the worker count.
pub fn trace_receivers(
    scene: &Scene,
    tx: LocalPoint,
    trace_cfg: &TraceConfig,
    prune_cfg: &PruningConfig,
    opts: &GenerateOptions,
) -> Result<Vec<ReceiverTrace>, DatasetError> {
    prune_cfg
        .validate()
        .map_err(|e| DatasetError::Domain(e.to_string()))?;
    if tx.z <= scene.terrain_z {
        return Err(DatasetError::Domain(format!(
            "tx height {} not above terrain",
            tx.z
        )));
    }
    let receivers = sample_receiver_positions(scene, opts.rx_count, opts.rx_height, opts.seed)?;
    let tracer = PathTracer::new(scene, tx, *trace_cfg)?;
    let f_c = trace_cfg.carrier_frequency_hz;
    let run = || {
        receivers
            .par_iter()
            .map(|&rx| {
                let paths = if rx == tx {
                    Vec::new()
                } else {
                    tracer.trace_to(rx)?
                };
                let h = synthesize(&paths, tx, rx, prune_cfg, f_c);
                Ok(ReceiverTrace { rx, paths, h })
            })
            .collect::<Result<Vec<_>, TraceError>>()
    };
    let traces = match opts.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| DatasetError::Pool(e.to_string()))?
            .install(run),
        None => run(),
    }?;
    Ok(traces)
}

pub fn assemble(
    scene: &Scene,
    tx: LocalPoint,
    traces: &[ReceiverTrace],
    trace_cfg: &TraceConfig,
    prune_cfg: &PruningConfig,
    seed: u64,
) -> Dataset {
    let samples: Vec<ChannelSample> = traces
        .iter()
        .filter_map(|t| t.h.map(|h| ChannelSample { tx, rx: t.rx, h }))
        .collect();
    let total = traces.len();
    let valid = samples.len();
    Dataset {
        meta: DatasetMeta {
            total_receivers: total,
            valid_count: valid,
            valid_ratio: if total == 0 {
                0.0
            } else {
                valid as f64 / total as f64
            },
            seed,
            trace_cfg: *trace_cfg,
            prune_cfg: *prune_cfg,
            scene_hash: scene.content_hash(),
        },
        samples,
    }
}

pub fn generate_dataset(
    scene: &Scene,
    tx: LocalPoint,
    trace_cfg: &TraceConfig,
    prune_cfg: &PruningConfig,
    opts: &GenerateOptions,
) -> Result<Dataset, DatasetError> {
    let traces = trace_receivers(scene, tx, trace_cfg, prune_cfg, opts)?;
    Ok(assemble(
        scene, tx, &traces, trace_cfg, prune_cfg, opts.seed,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub mean_re: f64,
    pub var_re: f64,
    pub mean_im: f64,
    pub var_im: f64,
}

/// Mean that is exact when every value is identical.
pub fn mean(values: &[f64]) -> f64 {
    match values.first() {
        Some(&first) if values.iter().all(|&v| v == first) => first,
        _ => values.iter().sum::<f64>() / values.len() as f64,
    }
}

/// Population variance (divide by n).
pub fn population_variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64
}

pub fn dataset_stats(samples: &[ChannelSample]) -> Result<DatasetStats, DatasetError> {
    if samples.len() < 2 {
        return Err(DatasetError::Domain(format!(
            "statistics need at least 2 samples, got {}",
            samples.len()
        )));
    }
    let re: Vec<f64> = samples.iter().map(|s| s.h.re).collect();
    let im: Vec<f64> = samples.iter().map(|s| s.h.im).collect();
    Ok(DatasetStats {
        mean_re: mean(&re),
        var_re: population_variance(&re),
        mean_im: mean(&im),
        var_im: population_variance(&im),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub model_subset_size: usize,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            model_subset_size: 1000,
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub holdout: Vec<usize>,
}

/// Draws the modelling subset uniformly without replacement, cuts it into
/// train/validation, and leaves every other row as holdout. Each part is
/// returned in ascending index order.
pub fn split(len: usize, spec: &SplitSpec) -> Result<Split, DatasetError> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(DatasetError::Domain(format!(
            "train_fraction {} outside (0, 1)",
            spec.train_fraction
        )));
    }
    if spec.model_subset_size > len {
        return Err(DatasetError::Domain(format!(
            "model subset {} larger than dataset {}",
            spec.model_subset_size, len
        )));
    }
    let n_train = (spec.train_fraction * spec.model_subset_size as f64).round() as usize;
    if n_train == 0 {
        return Err(DatasetError::Domain("split leaves no training rows".into()));
    }
    let mut idx: Vec<usize> = (0..len).collect();
    idx.shuffle(&mut stream_rng(spec.seed, Stream::Split));
    let (subset, rest) = idx.split_at(spec.model_subset_size);
    let (train, validation) = subset.split_at(n_train);
    let sorted = |s: &[usize]| {
        let mut v = s.to_vec();
        v.sort_unstable();
        v
    };
    Ok(Split {
        train: sorted(train),
        validation: sorted(validation),
        holdout: sorted(rest),
    })
}

pub fn meta_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv(d: &Dataset, path: &Path) -> Result<(), DatasetError> {
    let io = |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = String::with_capacity(64 + d.samples.len() * 200);
    out.push_str(&CSV_HEADER.join(","));
    out.push('\n');
    for s in &d.samples {
        let row = s
            .features()
            .iter()
            .chain([s.h.re, s.h.im].iter())
            .map(|&v| fmt_f64(v))
            .collect::<Vec<_>>()
            .join(",");
        out.push_str(&row);
        out.push('\n');
    }
    fs::write(path, out).map_err(io)?;
    let meta = meta_path(path);
    let mut text = serde_json::to_string_pretty(&d.meta).expect("meta serializes");
    text.push('\n');
    fs::write(&meta, text).map_err(|source| DatasetError::Io {
        path: meta.clone(),
        source,
    })
}

pub fn read_samples_csv(path: &Path) -> Result<Vec<ChannelSample>, DatasetError> {
    let parse_err = |row: usize, message: String| DatasetError::Parse {
        path: path.to_path_buf(),
        row,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| parse_err(0, e.to_string()))?;
    let header = reader.headers().map_err(|e| parse_err(1, e.to_string()))?;
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(parse_err(
            1,
            format!("expected header {}", CSV_HEADER.join(",")),
        ));
    }
    let mut samples = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        // header is line 1
        let row = i + 2;
        let rec = rec.map_err(|e| parse_err(row, e.to_string()))?;
        if rec.len() != CSV_HEADER.len() {
            return Err(parse_err(
                row,
                format!("expected 8 columns, found {}", rec.len()),
            ));
        }
        let mut v = [0.0; 8];
        for (k, field) in rec.iter().enumerate() {
            v[k] = field
                .trim()
                .parse::<f64>()
                .map_err(|e| parse_err(row, format!("column {}: {e}", CSV_HEADER[k])))?;
            if !v[k].is_finite() {
                return Err(parse_err(
                    row,
                    format!("column {} is not finite", CSV_HEADER[k]),
                ));
            }
        }
        samples.push(ChannelSample {
            tx: LocalPoint::new(v[0], v[1], v[2]),
            rx: LocalPoint::new(v[3], v[4], v[5]),
            h: ComplexCoefficient { re: v[6], im: v[7] },
        });
    }
    Ok(samples)
}

pub fn read_csv(path: &Path) -> Result<Dataset, DatasetError> {
    let samples = read_samples_csv(path)?;
    let mpath = meta_path(path);
    let text = fs::read_to_string(&mpath).map_err(|source| DatasetError::Io {
        path: mpath.clone(),
        source,
    })?;
    let meta: DatasetMeta = serde_json::from_str(&text).map_err(|source| DatasetError::Meta {
        path: mpath.clone(),
        source,
    })?;
    if meta.valid_count != samples.len() {
        return Err(DatasetError::Domain(format!(
            "{}: sidecar says {} rows, CSV has {}",
            mpath.display(),
            meta.valid_count,
            samples.len()
        )));
    }
    Ok(Dataset { samples, meta })
}
