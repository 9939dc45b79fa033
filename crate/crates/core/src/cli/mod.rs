//! Command-line front end: scene | generate | train | evaluate | pipeline.
//!
//! Settings resolve as flags over `--config` file over built-in defaults.
//! Exit status is 2 for usage or configuration errors and 3 for failures
//! while running.

mod config;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

pub use config::{RunConfig, SplitConfig, DEFAULT_TX};

use crate::dataset::{
    self, assemble, read_csv, trace_receivers, write_csv, Dataset, GenerateOptions, Split,
};
use crate::eval::{self, compare_models, compute_metrics, design_matrix, target_values, Metrics};
use crate::ml::{fit_predictor, predict, ModelFamily, Target, TrainMeta, TrainedPredictor};
use crate::raytracer::dump_paths_jsonl;
use crate::scene::{generate_synthetic_scene, load_scene, save_scene, Scene};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Runtime(m) => write!(f, "{m}"),
        }
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "chanpred",
    version,
    about = "Ray-traced channel dataset generation and channel-coefficient regression"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic building scene and write it as JSON.
    Scene {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        tx: TxArgs,
        #[command(flatten)]
        scene: SceneArgs,
        /// Output scene file.
        #[arg(long, default_value = "scene.json")]
        out: PathBuf,
    },
    /// Trace sampled receivers in a scene and write the coefficient dataset.
    Generate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        tx: TxArgs,
        #[command(flatten)]
        generate: GenerateArgs,
        /// Scene file to trace.
        #[arg(long)]
        scene: PathBuf,
        /// Output CSV; metadata goes to <out>.meta.json alongside.
        #[arg(long, default_value = "dataset.csv")]
        out: PathBuf,
    },
    /// Split a dataset and fit one predictor per model family and target.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        models: ModelsArg,
        #[command(flatten)]
        train: TrainArgs,
        /// Dataset CSV with its metadata sidecar.
        #[arg(long)]
        data: PathBuf,
        /// Directory for model files, split.json and train_metrics.json.
        #[arg(long, default_value = "models")]
        out_dir: PathBuf,
    },
    /// Score trained predictors on the holdout rows and write reports.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        models: ModelsArg,
        /// Dataset CSV the models were trained from.
        #[arg(long)]
        data: PathBuf,
        /// Directory written by `train`.
        #[arg(long, default_value = "models")]
        models_dir: PathBuf,
        /// Report output directory.
        #[arg(long, default_value = "report")]
        out_dir: PathBuf,
    },
    /// Run scene, generate, train and evaluate into one directory.
    Pipeline {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        tx: TxArgs,
        #[command(flatten)]
        scene: SceneArgs,
        #[command(flatten)]
        generate: GenerateArgs,
        #[command(flatten)]
        models: ModelsArg,
        #[command(flatten)]
        train: TrainArgs,
        /// Output directory (scene.json, dataset.csv, models/, report/).
        #[arg(long, default_value = "run")]
        out_dir: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed for the scene, receiver and split streams [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TxArgs {
    /// Transmitter position x,y,z in metres (Tx height 16 m) [default: 52.94,43.75,16].
    #[arg(long, value_parser = parse_triple)]
    pub tx: Option<[f64; 3]>,
}

#[derive(Debug, Args)]
pub struct SceneArgs {
    /// Side of the square scene in metres (area 300 m x 300 m) [default: 300].
    #[arg(long)]
    pub size: Option<f64>,
    /// Number of buildings to place [default: 40].
    #[arg(long)]
    pub buildings: Option<usize>,
    /// Geographic box lat_min,lon_min,lat_max,lon_max; sets the scene extent from its UTM footprint.
    #[arg(long, value_parser = parse_quad)]
    pub site: Option<[f64; 4]>,
    /// Building-free radius around the transmitter in metres, 0 to disable [default: 15].
    #[arg(long)]
    pub tx_clearance: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Number of sampled receivers (number of receivers 15000) [default: 15000].
    #[arg(long)]
    pub receivers: Option<usize>,
    /// Receiver height above ground in metres (Rx height 1.5 m) [default: 1.5].
    #[arg(long)]
    pub rx_height: Option<f64>,
    /// Carrier frequency in Hz (carrier frequency 7 GHz) [default: 7e9].
    #[arg(long)]
    pub frequency: Option<f64>,
    /// Power pruning threshold in dB (pruning threshold 30 dB) [default: 30].
    #[arg(long)]
    pub delta_th: Option<f64>,
    /// LOS delay window in nanoseconds (delay tolerance 57.76 ns) [default: 57.76].
    #[arg(long)]
    pub epsilon_tau: Option<f64>,
    /// Transmit power in watts (transmit power 1 W) [default: 1].
    #[arg(long)]
    pub tx_power: Option<f64>,
    /// Maximum number of specular reflections per path [default: 2].
    #[arg(long)]
    pub max_order: Option<usize>,
    /// Worker threads for tracing; output does not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Write every traced path as JSON lines to this file.
    #[arg(long)]
    pub dump_paths: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ModelsArg {
    /// Comma-separated model families from lr, svr, dtr [default: lr,svr,dtr].
    #[arg(long, value_delimiter = ',')]
    pub models: Option<Vec<ModelFamily>>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Rows drawn for training plus validation (1000 samples) [default: 1000].
    #[arg(long)]
    pub subset: Option<usize>,
    /// Training share of the drawn rows (80% training, 20% validation) [default: 0.8].
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// SVR box constraint C [default: 1].
    #[arg(long)]
    pub svr_c: Option<f64>,
    /// SVR tube half-width in standardized target units [default: 0.1].
    #[arg(long)]
    pub svr_epsilon: Option<f64>,
    /// SVR RBF width gamma [default: 1/number of features].
    #[arg(long)]
    pub svr_gamma: Option<f64>,
    /// Tree depth limit, 0 for unlimited [default: 8].
    #[arg(long)]
    pub tree_depth: Option<usize>,
    /// Minimum rows per tree leaf [default: 5].
    #[arg(long)]
    pub tree_min_leaf: Option<usize>,
}

fn parse_list<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let vals: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("'{p}': {e}")))
        .collect::<Result<_, _>>()?;
    vals.try_into()
        .map_err(|v: Vec<f64>| format!("expected {N} comma-separated numbers, got {}", v.len()))
}

fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    parse_list::<3>(s)
}

fn parse_quad(s: &str) -> Result<[f64; 4], String> {
    parse_list::<4>(s)
}

impl CommonArgs {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::load(self.config.as_deref()).map_err(CliError::Config)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }
}

impl TxArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(t) = self.tx {
            cfg.tx = t;
        }
    }
}

impl SceneArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(s) = self.size {
            cfg.scene.size_x = s;
            cfg.scene.size_y = s;
        }
        if let Some(b) = self.buildings {
            cfg.scene.building_count = b;
        }
        if self.site.is_some() {
            cfg.site = self.site;
        }
        if let Some(r) = self.tx_clearance {
            cfg.tx_clearance = r;
        }
    }
}

impl GenerateArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(v) = self.receivers {
            cfg.receivers = v;
        }
        if let Some(v) = self.rx_height {
            cfg.rx_height = v;
        }
        if let Some(v) = self.frequency {
            cfg.trace.carrier_frequency_hz = v;
        }
        if let Some(v) = self.delta_th {
            cfg.pruning.delta_th_db = v;
        }
        if let Some(v) = self.epsilon_tau {
            cfg.pruning.epsilon_tau_s = v * 1e-9;
        }
        if let Some(v) = self.tx_power {
            cfg.trace.tx_power_w = v;
        }
        if let Some(v) = self.max_order {
            cfg.trace.max_reflection_order = v;
        }
        if self.workers.is_some() {
            cfg.workers = self.workers;
        }
    }
}

impl ModelsArg {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(m) = &self.models {
            let mut m = m.clone();
            m.sort();
            m.dedup();
            cfg.models = m;
        }
    }
}

impl TrainArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(v) = self.subset {
            cfg.split.model_subset_size = v;
        }
        if let Some(v) = self.train_fraction {
            cfg.split.train_fraction = v;
        }
        if let Some(v) = self.svr_c {
            cfg.hyper.svr.c = v;
        }
        if let Some(v) = self.svr_epsilon {
            cfg.hyper.svr.epsilon = v;
        }
        if self.svr_gamma.is_some() {
            cfg.hyper.svr.gamma = self.svr_gamma;
        }
        if let Some(v) = self.tree_depth {
            cfg.hyper.tree.max_depth = (v > 0).then_some(v);
        }
        if let Some(v) = self.tree_min_leaf {
            cfg.hyper.tree.min_samples_leaf = v;
        }
    }
}

fn checked(cfg: RunConfig) -> Result<RunConfig, CliError> {
    cfg.validate().map_err(CliError::Config)?;
    Ok(cfg)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Scene {
            common,
            tx,
            scene,
            out,
        } => {
            let mut cfg = common.resolve()?;
            tx.apply(&mut cfg);
            scene.apply(&mut cfg);
            let cfg = checked(cfg)?;
            cmd_scene(&cfg, &out).map(|_| ())
        }
        Command::Generate {
            common,
            tx,
            generate,
            scene,
            out,
        } => {
            let mut cfg = common.resolve()?;
            tx.apply(&mut cfg);
            generate.apply(&mut cfg);
            let cfg = checked(cfg)?;
            let scene = load_scene(&scene).map_err(|e| CliError::Config(e.to_string()))?;
            cmd_generate(&cfg, &scene, &out, generate.dump_paths.as_deref()).map(|_| ())
        }
        Command::Train {
            common,
            models,
            train,
            data,
            out_dir,
        } => {
            let mut cfg = common.resolve()?;
            models.apply(&mut cfg);
            train.apply(&mut cfg);
            let cfg = checked(cfg)?;
            let data = read_csv(&data).map_err(|e| CliError::Config(e.to_string()))?;
            cmd_train(&cfg, &data, &out_dir).map(|_| ())
        }
        Command::Evaluate {
            common,
            models,
            data,
            models_dir,
            out_dir,
        } => {
            let mut cfg = common.resolve()?;
            models.apply(&mut cfg);
            let cfg = checked(cfg)?;
            let data = read_csv(&data).map_err(|e| CliError::Config(e.to_string()))?;
            cmd_evaluate(&cfg, &data, &models_dir, &out_dir).map(|_| ())
        }
        Command::Pipeline {
            common,
            tx,
            scene,
            generate,
            models,
            train,
            out_dir,
        } => {
            let mut cfg = common.resolve()?;
            tx.apply(&mut cfg);
            scene.apply(&mut cfg);
            generate.apply(&mut cfg);
            models.apply(&mut cfg);
            train.apply(&mut cfg);
            let cfg = checked(cfg)?;
            cmd_pipeline(&cfg, &out_dir, generate.dump_paths.as_deref())
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(runtime)?;
    s.push('\n');
    Ok(s)
}

pub fn cmd_scene(cfg: &RunConfig, out: &Path) -> Result<Scene, CliError> {
    let gen = cfg.scene_gen().map_err(CliError::Config)?;
    let scene = generate_synthetic_scene(cfg.seed, &gen).map_err(|e| match e {
        crate::scene::SceneError::Invalid(m) => CliError::Config(m),
        other => runtime(other),
    })?;
    save_scene(&scene, out).map_err(runtime)?;
    let b = scene.bounds;
    println!(
        "scene: {} buildings, bounds x [{}, {}] y [{}, {}] -> {}",
        scene.buildings.len(),
        b.x_min,
        b.x_max,
        b.y_min,
        b.y_max,
        out.display()
    );
    Ok(scene)
}

pub fn cmd_generate(
    cfg: &RunConfig,
    scene: &Scene,
    out: &Path,
    dump: Option<&Path>,
) -> Result<Dataset, CliError> {
    let opts = GenerateOptions {
        rx_count: cfg.receivers,
        rx_height: cfg.rx_height,
        seed: cfg.seed,
        workers: cfg.workers,
    };
    let tx = cfg.tx_point();
    let traces = trace_receivers(scene, tx, &cfg.trace, &cfg.pruning, &opts).map_err(runtime)?;
    if let Some(path) = dump {
        let f = fs::File::create(path)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        let mut w = BufWriter::new(f);
        for (i, t) in traces.iter().enumerate() {
            dump_paths_jsonl(&mut w, i, &t.paths).map_err(runtime)?;
        }
        w.flush().map_err(runtime)?;
    }
    let data = assemble(scene, tx, &traces, &cfg.trace, &cfg.pruning, cfg.seed);
    write_csv(&data, out).map_err(runtime)?;
    println!(
        "dataset: {} of {} receivers valid (ratio {:.4}) -> {}",
        data.meta.valid_count,
        data.meta.total_receivers,
        data.meta.valid_ratio,
        out.display()
    );
    Ok(data)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitFile {
    pub dataset_rows: usize,
    pub seed: u64,
    pub model_subset_size: usize,
    pub train_fraction: f64,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainRecord {
    pub model: ModelFamily,
    pub target: Target,
    pub train: Metrics,
    pub validation: Option<Metrics>,
    pub meta: TrainMeta,
}

pub fn model_file_name(family: ModelFamily, target: Target) -> String {
    format!("{family}_{target}.json")
}

pub fn cmd_train(
    cfg: &RunConfig,
    data: &Dataset,
    out_dir: &Path,
) -> Result<Vec<TrainRecord>, CliError> {
    let spec = cfg.split_spec();
    let split = dataset::split(data.len(), &spec).map_err(|e| CliError::Config(e.to_string()))?;
    ensure_dir(out_dir)?;
    let split_file = SplitFile {
        dataset_rows: data.len(),
        seed: spec.seed,
        model_subset_size: spec.model_subset_size,
        train_fraction: spec.train_fraction,
        split: split.clone(),
    };
    write_text(&out_dir.join("split.json"), &to_json(&split_file)?)?;

    let train = data.subset(&split.train);
    let val = data.subset(&split.validation);
    let x_train = design_matrix(&train);
    let x_val = design_matrix(&val);
    let mut records = Vec::new();
    for &family in &cfg.models {
        for target in Target::ALL {
            let y = target_values(&train, target);
            let p = fit_predictor(family, target, &x_train, &y, &cfg.hyper)
                .map_err(|e| CliError::Runtime(format!("fitting {family} for {target}: {e}")))?;
            let train_m =
                compute_metrics(&y, &predict(&p, &x_train).map_err(runtime)?).map_err(runtime)?;
            let val_m = if val.is_empty() {
                None
            } else {
                let pred = predict(&p, &x_val).map_err(runtime)?;
                Some(compute_metrics(&target_values(&val, target), &pred).map_err(runtime)?)
            };
            write_text(
                &out_dir.join(model_file_name(family, target)),
                &p.to_json().map_err(runtime)?,
            )?;
            println!(
                "train: {family} {target}: train RMSE {:.4e}, validation RMSE {}",
                train_m.rmse,
                val_m
                    .as_ref()
                    .map_or("n/a".into(), |m| format!("{:.4e}", m.rmse))
            );
            records.push(TrainRecord {
                model: family,
                target,
                train: train_m,
                validation: val_m,
                meta: p.train_meta,
            });
        }
    }
    write_text(&out_dir.join("train_metrics.json"), &to_json(&records)?)?;
    Ok(records)
}

pub fn load_predictor(
    dir: &Path,
    family: ModelFamily,
    target: Target,
) -> Result<TrainedPredictor, CliError> {
    let path = dir.join(model_file_name(family, target));
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    TrainedPredictor::from_json(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn cmd_evaluate(
    cfg: &RunConfig,
    data: &Dataset,
    models_dir: &Path,
    out_dir: &Path,
) -> Result<eval::Evaluation, CliError> {
    let split_path = models_dir.join("split.json");
    let text = fs::read_to_string(&split_path)
        .map_err(|e| CliError::Config(format!("{}: {e}", split_path.display())))?;
    let split: SplitFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", split_path.display())))?;
    if split.dataset_rows != data.len() {
        return Err(CliError::Config(format!(
            "split was made for {} rows but the dataset has {}",
            split.dataset_rows,
            data.len()
        )));
    }
    let mut predictors = Vec::new();
    for &family in &cfg.models {
        for target in Target::ALL {
            predictors.push(load_predictor(models_dir, family, target)?);
        }
    }
    let holdout = data.subset(&split.split.holdout);
    let validation = data.subset(&split.split.validation);
    let evaluation = compare_models(&predictors, &holdout, &validation).map_err(runtime)?;
    eval::write_report_files(out_dir, &evaluation, &data.samples).map_err(runtime)?;
    for r in &evaluation.report.rows {
        let m = &r.holdout;
        println!(
            "evaluate: {:<4} {}: MAE {:.4e} RMSE {:.4e} R2 {}",
            r.model,
            r.target,
            m.mae,
            m.rmse,
            m.r2.map_or("undefined".into(), |v| format!("{v:.4}"))
        );
    }
    Ok(evaluation)
}

pub fn cmd_pipeline(cfg: &RunConfig, out_dir: &Path, dump: Option<&Path>) -> Result<(), CliError> {
    ensure_dir(out_dir)?;
    let scene = cmd_scene(cfg, &out_dir.join("scene.json"))?;
    let data = cmd_generate(cfg, &scene, &out_dir.join("dataset.csv"), dump)?;
    let models = out_dir.join("models");
    cmd_train(cfg, &data, &models)?;
    cmd_evaluate(cfg, &data, &models, &out_dir.join("report"))?;
    Ok(())
}
