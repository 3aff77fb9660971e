//! Command-line front end. `main_with_args` is the whole program; the
//! binary only forwards `std::env::args` and exits with the returned code.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or format error, 3 numeric
//! failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::dataset::{self, load_idx, mnist_paths, Dataset, Image, Split};
use crate::encoder::{derive_seed, write_train_csv, write_train_packed, PoissonEncoder};
use crate::error::{Error, Result};
use crate::fixedpoint::FixedConfig;
use crate::layer::{accuracy_curve, run_batch, run_inference, InferenceTrace, LayerConfig, LeakSchedule, Readout};
use crate::metrics::{
    input_current_stats, render_current_table, sparsity_report, AnnCostModel, BenchReport, LatencyModel,
};
use crate::neuron::NeuronConfig;
use crate::trainer::{quantize, train_linear, QuantSpec, TrainConfig};
use crate::weights::WeightMatrix;

pub const DATA_DIR_ENV: &str = "SPIKEFORGE_DATA_DIR";
const DEFAULT_DATA_DIR: &str = "data/mnist";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "spikeforge", version, about = "Fixed-point LIF spiking core: train, evaluate, trace and benchmark")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the float readout, quantize it and write an SNNW1 weight file
    Train(TrainArgs),
    /// Classify a single image
    Infer(InferArgs),
    /// Accuracy versus timestep over a labeled set
    Eval(EvalArgs),
    /// Per-timestep membrane potentials for one image
    Trace(TraceArgs),
    /// ANN vs SNN cost comparison and efficiency curve
    Bench(BenchArgs),
    /// Accuracy under rotation, shift, noise and occlusion
    Robust(RobustArgs),
    /// First-timestep input current statistics per digit
    Stats(StatsArgs),
    /// Export the Poisson spike train of one image
    Encode(EncodeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum ReadoutArg {
    Ttfs,
    Count,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum LeakArg {
    Step,
    Row,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    Table,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum SpikeFormat {
    Csv,
    Bin,
}

#[derive(Debug, Clone, Args)]
pub struct LayerArgs {
    #[arg(long, default_value_t = 20)]
    pub timesteps: usize,
    #[arg(long, default_value_t = 128)]
    pub threshold: i64,
    #[arg(long, default_value_t = 3)]
    pub decay_shift: u32,
    /// Keep neurons enabled after they fire
    #[arg(long)]
    pub no_pruning: bool,
    #[arg(long, value_enum, default_value_t = ReadoutArg::Ttfs)]
    pub readout: ReadoutArg,
    #[arg(long, value_enum, default_value_t = LeakArg::Step)]
    pub leak: LeakArg,
    /// Inputs per leak window when `--leak row`
    #[arg(long, default_value_t = 28)]
    pub row_len: usize,
    /// Accumulator width in bits
    #[arg(long, default_value_t = 16)]
    pub accum_bits: u32,
}

impl LayerArgs {
    pub fn layer_config(&self, n_inputs: usize, n_outputs: usize) -> Result<LayerConfig> {
        let neuron = NeuronConfig::new(self.threshold, self.decay_shift, FixedConfig::new(self.accum_bits)?)?;
        let cfg = LayerConfig {
            n_inputs,
            n_outputs,
            timesteps: self.timesteps,
            leak: match self.leak {
                LeakArg::Step => LeakSchedule::PerTimestep,
                LeakArg::Row => LeakSchedule::PerRow(self.row_len),
            },
            pruning: !self.no_pruning,
            neuron,
            readout: match self.readout {
                ReadoutArg::Ttfs => Readout::FirstToFire,
                ReadoutArg::Count => Readout::SpikeCount,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// IDX image file (default: MNIST file under $SPIKEFORGE_DATA_DIR or data/mnist)
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// IDX label file
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Use only the first N images
    #[arg(long)]
    pub limit: Option<usize>,
}

impl DataArgs {
    fn resolve(&self, split: Split) -> (PathBuf, PathBuf) {
        let dir = std::env::var_os(DATA_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_DATA_DIR));
        let (im, lb) = mnist_paths(&dir, split);
        (
            self.images.clone().unwrap_or(im),
            self.labels.clone().unwrap_or(lb),
        )
    }

    fn load(&self, split: Split) -> Result<Dataset> {
        let (im, lb) = self.resolve(split);
        let ds = load_idx(&im, &lb, split)?;
        Ok(match self.limit {
            Some(n) => ds.take(n),
            None => ds,
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write to this file instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub layer: LayerArgs,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.5)]
    pub lr: f64,
    #[arg(long, default_value_t = 100)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub weight_decay: f64,
    /// Held-out images used to pick the quantization scale
    #[arg(long, default_value_t = 5000)]
    pub val_size: usize,
    #[arg(long, default_value_t = 9)]
    pub bits: u8,
    /// Weight file to write
    #[arg(long, default_value = "weights.snnw")]
    pub out: PathBuf,
    /// JSON-lines training log (default: <out>.log.jsonl)
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub weights: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub layer: LayerArgs,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Image index within the set
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub weights: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub layer: LayerArgs,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct TraceArgs {
    #[arg(long)]
    pub weights: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub layer: LayerArgs,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Measure sparsity and accuracy with these weights (needs a data set)
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub layer: LayerArgs,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Accuracy (%) assumed at every horizon when nothing is measured
    #[arg(long, default_value_t = 89.0)]
    pub accuracy: f64,
    #[arg(long, default_value_t = 40e6)]
    pub clock_hz: f64,
    #[arg(long, default_value_t = 784)]
    pub cycles_per_timestep: u64,
    #[arg(long, default_value_t = 10)]
    pub convergence_timesteps: usize,
    #[arg(long, default_value_t = 9)]
    pub bits: u32,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct RobustArgs {
    #[arg(long)]
    pub weights: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub layer: LayerArgs,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = dataset::DEFAULT_ROTATION_DEGREES)]
    pub rotate: f64,
    #[arg(long, default_value_t = dataset::DEFAULT_SHIFT_FRACTION)]
    pub shift: f64,
    #[arg(long, default_value_t = dataset::DEFAULT_NOISE_SIGMA)]
    pub noise_sigma: f64,
    #[arg(long, default_value_t = dataset::DEFAULT_OCCLUSION_PATCH)]
    pub occlusion: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub weights: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Number of leading images to sample
    #[arg(long, default_value_t = 300)]
    pub samples: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EncodeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    #[arg(long, default_value_t = 20)]
    pub timesteps: usize,
    #[arg(long, value_enum, default_value_t = SpikeFormat::Csv)]
    pub format: SpikeFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parse arguments, run, print any error, and return the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_USAGE,
        Error::Numeric(_) => EXIT_NUMERIC,
        _ => EXIT_DATA,
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(a) => cmd_train(&a),
        Command::Infer(a) => cmd_infer(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Trace(a) => cmd_trace(&a),
        Command::Bench(a) => cmd_bench(&a),
        Command::Robust(a) => cmd_robust(&a),
        Command::Stats(a) => cmd_stats(&a),
        Command::Encode(a) => cmd_encode(&a),
    }
}

/// Write via a sibling temp file and rename, so a failed run never leaves a
/// partial file behind.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    let result = fs::write(&tmp, bytes).and_then(|()| fs::rename(&tmp, path));
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, bytes),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

fn load_weights(path: &Path) -> Result<WeightMatrix> {
    WeightMatrix::load(path)
}

fn pick_image(ds: &Dataset, index: usize) -> Result<&Image> {
    ds.images
        .get(index)
        .ok_or_else(|| Error::Input(format!("image index {index} out of range for {} images", ds.len())))
}

#[derive(Debug, Serialize)]
pub struct TrainSummary {
    pub train_images: usize,
    pub validation_images: usize,
    pub epochs: usize,
    pub float_train_accuracy: f64,
    pub float_validation_accuracy: f64,
    pub scale: f64,
    pub weight_bits: u8,
    pub snn_validation_accuracy: f64,
    pub sweep: Vec<crate::trainer::ScalePoint>,
}

pub fn cmd_train(a: &TrainArgs) -> Result<()> {
    if a.bits < 2 || a.bits > 16 {
        return Err(Error::Config(format!("weight bits must be 2..=16, got {}", a.bits)));
    }
    let full = a.data.load(Split::Train)?;
    let n_inputs = full.images.first().map_or(0, |im| im.pixels.len());
    let layer = a.layer.layer_config(n_inputs.max(1), 10)?;
    if a.val_size == 0 || a.val_size >= full.len() {
        return Err(Error::Config(format!(
            "validation size {} must be in 1..{}",
            a.val_size,
            full.len()
        )));
    }
    let (train, val) = full.split_off_shuffled(a.val_size, derive_seed(a.seed, 0xA))?;
    let train_labels = train.labels()?;
    let val_labels = val.labels()?;
    let tcfg = TrainConfig {
        epochs: a.epochs,
        learning_rate: a.lr,
        batch_size: a.batch_size,
        weight_decay: a.weight_decay,
        seed: derive_seed(a.seed, 0xB),
    };
    let mut log = Vec::new();
    let (fw, _) = train_linear(&train.images, &train_labels, 10, &tcfg, Some(&mut log))?;
    let spec = QuantSpec {
        bits: a.bits,
        candidates: Vec::new(),
    };
    let (wq, sweep) = quantize(&fw, &spec, &val.images, &val_labels, &layer, a.seed)?;
    let best = sweep
        .iter()
        .find(|p| p.scale == wq.scale())
        .map_or(0.0, |p| p.accuracy);
    let summary = TrainSummary {
        train_images: train.len(),
        validation_images: val.len(),
        epochs: a.epochs,
        float_train_accuracy: fw.final_train_accuracy,
        float_validation_accuracy: fw.accuracy(&val.images, &val_labels),
        scale: wq.scale(),
        weight_bits: a.bits,
        snn_validation_accuracy: best,
        sweep,
    };
    let log_path = a.log.clone().unwrap_or_else(|| {
        let mut p = a.out.as_os_str().to_owned();
        p.push(".log.jsonl");
        PathBuf::from(p)
    });
    write_atomic(&a.out, &wq.to_bytes())?;
    write_atomic(&log_path, &log)?;
    emit(None, &json_bytes(&summary)?)
}

#[derive(Debug, Serialize)]
pub struct InferReport {
    pub index: usize,
    pub label: Option<u8>,
    pub prediction: usize,
    pub prediction_time: usize,
    pub first_spike_times: Vec<Option<usize>>,
    pub additions: u64,
}

pub fn cmd_infer(a: &InferArgs) -> Result<()> {
    let w = load_weights(&a.weights)?;
    let layer = a.layer.layer_config(w.n_inputs(), w.n_outputs())?;
    let ds = a.data.load(Split::Test)?;
    let img = pick_image(&ds, a.index)?;
    let trace = run_inference(&w, &img.pixels, &layer, derive_seed(a.seed, a.index as u64))?;
    let report = InferReport {
        index: a.index,
        label: img.label,
        prediction: trace.prediction,
        prediction_time: trace.prediction_time,
        first_spike_times: trace.first_spike_times.clone(),
        additions: trace.total_additions(),
    };
    let bytes = match a.output.format {
        Format::Json => json_bytes(&report)?,
        Format::Csv => format!(
            "index,label,prediction,prediction_time,additions\n{},{},{},{},{}\n",
            report.index,
            report.label.map_or(String::new(), |l| l.to_string()),
            report.prediction,
            report.prediction_time,
            report.additions
        )
        .into_bytes(),
        Format::Table => format!(
            "image {} label {} -> predicted {} at timestep {} ({} additions)\n",
            report.index,
            report.label.map_or("-".to_string(), |l| l.to_string()),
            report.prediction,
            report.prediction_time,
            report.additions
        )
        .into_bytes(),
    };
    emit(a.output.out.as_deref(), &bytes)
}

#[derive(Debug, Serialize)]
pub struct EvalReport {
    pub images: usize,
    pub timesteps: usize,
    pub seed: u64,
    pub accuracy: Vec<f64>,
    pub final_accuracy: f64,
    /// `prediction_time_histogram[t]`: images whose final prediction was
    /// settled at timestep `t`.
    pub prediction_time_histogram: Vec<usize>,
    pub mean_prediction_time: f64,
    pub mean_active_addition_ratio: f64,
}

pub fn evaluate(w: &WeightMatrix, ds: &Dataset, layer: &LayerConfig, seed: u64) -> Result<(EvalReport, Vec<InferenceTrace>)> {
    let labels = ds.labels()?;
    let traces = run_batch(w, &ds.images, layer, seed)?;
    let accuracy = accuracy_curve(&traces, &labels, layer.readout)?;
    let mut hist = vec![0usize; layer.timesteps];
    for t in &traces {
        hist[t.prediction_time] += 1;
    }
    let mean_pt = traces.iter().map(|t| t.prediction_time as f64).sum::<f64>() / traces.len() as f64;
    let report = EvalReport {
        images: traces.len(),
        timesteps: layer.timesteps,
        seed,
        final_accuracy: *accuracy.last().unwrap_or(&0.0),
        accuracy,
        prediction_time_histogram: hist,
        mean_prediction_time: mean_pt,
        mean_active_addition_ratio: sparsity_report(&traces).mean_ratio,
    };
    Ok((report, traces))
}

pub fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let w = load_weights(&a.weights)?;
    let layer = a.layer.layer_config(w.n_inputs(), w.n_outputs())?;
    let ds = a.data.load(Split::Test)?;
    let (report, _) = evaluate(&w, &ds, &layer, a.seed)?;
    let bytes = match a.output.format {
        Format::Json => json_bytes(&report)?,
        Format::Csv | Format::Table => {
            let mut s = String::new();
            let csv = a.output.format == Format::Csv;
            if csv {
                s.push_str("timestep,accuracy,settled\n");
            } else {
                let _ = writeln!(s, "{:>8} | {:>8} | {:>8}", "timestep", "accuracy", "settled");
            }
            let mut settled = 0;
            for (t, acc) in report.accuracy.iter().enumerate() {
                settled += report.prediction_time_histogram[t];
                if csv {
                    let _ = writeln!(s, "{},{},{}", t + 1, acc, settled);
                } else {
                    let _ = writeln!(s, "{:>8} | {:>8.4} | {:>8}", t + 1, acc, settled);
                }
            }
            s.into_bytes()
        }
    };
    emit(a.output.out.as_deref(), &bytes)
}

#[derive(Debug, Serialize)]
struct TraceRow {
    t: usize,
    neuron: usize,
    v_pre: i32,
    v: i32,
    fired: bool,
    enabled: bool,
}

fn trace_rows(trace: &InferenceTrace, pruning: bool) -> Vec<TraceRow> {
    let mut rows = Vec::with_capacity(trace.timesteps() * trace.n_outputs);
    let mut enabled = vec![true; trace.n_outputs];
    for (t, pots) in trace.potentials.iter().enumerate() {
        for (n, &v) in pots.iter().enumerate() {
            let fire = trace.fires.iter().find(|e| e.timestep == t && e.neuron == n);
            rows.push(TraceRow {
                t,
                neuron: n,
                v_pre: fire.map_or(v, |e| e.pre_reset),
                v,
                fired: fire.is_some(),
                enabled: enabled[n],
            });
            if fire.is_some() && pruning {
                enabled[n] = false;
            }
        }
    }
    rows
}

/// Per-timestep CSV `t,neuron,v_pre,v,fired,enabled`: `v_pre` is the
/// potential the comparator saw when the neuron fired (else equal to `v`),
/// `v` the end-of-timestep potential, `enabled` the gate at step start.
pub fn render_trace_csv(trace: &InferenceTrace, pruning: bool) -> String {
    let mut s = String::from("t,neuron,v_pre,v,fired,enabled\n");
    for r in trace_rows(trace, pruning) {
        let _ = writeln!(s, "{},{},{},{},{},{}", r.t, r.neuron, r.v_pre, r.v, u8::from(r.fired), u8::from(r.enabled));
    }
    s
}

pub fn cmd_trace(a: &TraceArgs) -> Result<()> {
    let w = load_weights(&a.weights)?;
    let layer = a.layer.layer_config(w.n_inputs(), w.n_outputs())?;
    let ds = a.data.load(Split::Test)?;
    let img = pick_image(&ds, a.index)?;
    let trace = run_inference(&w, &img.pixels, &layer, derive_seed(a.seed, a.index as u64))?;
    let bytes = match a.output.format {
        Format::Csv | Format::Table => render_trace_csv(&trace, layer.pruning).into_bytes(),
        Format::Json => json_bytes(&trace)?,
    };
    emit(a.output.out.as_deref(), &bytes)
}

pub fn cmd_bench(a: &BenchArgs) -> Result<()> {
    let latency = LatencyModel::new(a.clock_hz, a.cycles_per_timestep)?;
    if a.timesteps_valid().is_err() {
        return a.timesteps_valid();
    }
    let (n_inputs, n_outputs, curve, sparsity) = match &a.weights {
        Some(path) => {
            let w = load_weights(path)?;
            let layer = a.layer.layer_config(w.n_inputs(), w.n_outputs())?;
            let ds = a.data.load(Split::Test)?;
            let (report, traces) = evaluate(&w, &ds, &layer, a.seed)?;
            (w.n_inputs(), w.n_outputs(), report.accuracy, Some(sparsity_report(&traces)))
        }
        None => (784, 10, vec![a.accuracy / 100.0; a.layer.timesteps], None),
    };
    let report = BenchReport::build(
        &AnnCostModel::baseline(),
        n_inputs,
        n_outputs,
        a.bits,
        &latency,
        a.convergence_timesteps,
        &curve,
        sparsity,
    )?;
    let bytes = match a.output.format {
        Format::Json => json_bytes(&report)?,
        Format::Table => report.render_text().into_bytes(),
        Format::Csv => {
            let mut s = String::from("timestep,time_s,accuracy_percent,efficiency\n");
            for p in &report.efficiency {
                let _ = writeln!(s, "{},{},{},{}", p.timestep, p.time_s, p.accuracy_percent, p.efficiency);
            }
            s.into_bytes()
        }
    };
    emit(a.output.out.as_deref(), &bytes)
}

impl BenchArgs {
    fn timesteps_valid(&self) -> Result<()> {
        if self.layer.timesteps == 0 || self.convergence_timesteps == 0 {
            return Err(Error::Config("timesteps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RobustRow {
    pub perturbation: String,
    pub parameter: f64,
    pub accuracy: f64,
}

/// Seed stream for transform randomness, disjoint from the encoder seeds.
const TRANSFORM_SEED_SALT: u64 = 0x5E_ED0F_7A45;

/// Accuracy on clean and perturbed copies of `ds`. Every variant of image
/// `i` is encoded with the same per-image seed as the clean image.
pub fn robustness(
    w: &WeightMatrix,
    ds: &Dataset,
    layer: &LayerConfig,
    seed: u64,
    rotate_deg: f64,
    shift_frac: f64,
    noise_sigma: f64,
    patch: usize,
) -> Result<Vec<RobustRow>> {
    let labels = ds.labels()?;
    let tseed = |i: usize| derive_seed(seed ^ TRANSFORM_SEED_SALT, i as u64);
    let variants: Vec<(&str, f64, Vec<Image>)> = vec![
        ("clean", 0.0, ds.images.clone()),
        ("rotation_deg", rotate_deg, ds.images.iter().map(|im| dataset::rotate(im, rotate_deg)).collect()),
        (
            "shift_fraction",
            shift_frac,
            ds.images.iter().map(|im| dataset::shift(im, shift_frac)).collect::<Result<_>>()?,
        ),
        (
            "gaussian_sigma",
            noise_sigma,
            ds.images
                .iter()
                .enumerate()
                .map(|(i, im)| dataset::gaussian_noise(im, noise_sigma, tseed(i)))
                .collect::<Result<_>>()?,
        ),
        (
            "occlusion_patch",
            patch as f64,
            ds.images
                .iter()
                .enumerate()
                .map(|(i, im)| dataset::occlude(im, patch, tseed(i)))
                .collect::<Result<_>>()?,
        ),
    ];
    variants
        .into_iter()
        .map(|(name, param, images)| {
            let traces = run_batch(w, &images, layer, seed)?;
            let acc = *accuracy_curve(&traces, &labels, layer.readout)?.last().unwrap();
            Ok(RobustRow {
                perturbation: name.into(),
                parameter: param,
                accuracy: acc,
            })
        })
        .collect()
}

pub fn cmd_robust(a: &RobustArgs) -> Result<()> {
    let w = load_weights(&a.weights)?;
    let layer = a.layer.layer_config(w.n_inputs(), w.n_outputs())?;
    let ds = a.data.load(Split::Test)?;
    let rows = robustness(&w, &ds, &layer, a.seed, a.rotate, a.shift, a.noise_sigma, a.occlusion)?;
    let bytes = match a.output.format {
        Format::Json => json_bytes(&rows)?,
        Format::Csv => {
            let mut s = String::from("perturbation,parameter,accuracy\n");
            for r in &rows {
                let _ = writeln!(s, "{},{},{}", r.perturbation, r.parameter, r.accuracy);
            }
            s.into_bytes()
        }
        Format::Table => {
            let mut s = format!("{:<16} | {:>9} | {:>8}\n", "perturbation", "parameter", "accuracy");
            for r in &rows {
                let _ = writeln!(s, "{:<16} | {:>9} | {:>8.4}", r.perturbation, r.parameter, r.accuracy);
            }
            s.into_bytes()
        }
    };
    emit(a.output.out.as_deref(), &bytes)
}

pub fn cmd_stats(a: &StatsArgs) -> Result<()> {
    let w = load_weights(&a.weights)?;
    let ds = a.data.load(Split::Test)?.take(a.samples);
    let labels = ds.labels()?;
    let rows = input_current_stats(&w, &ds.images, &labels, a.seed)?;
    let bytes = match a.output.format {
        Format::Json => json_bytes(&rows)?,
        Format::Table => render_current_table(&rows).into_bytes(),
        Format::Csv => {
            let mut s = String::from("digit,samples,avg,min,max,status\n");
            for r in &rows {
                let _ = writeln!(s, "{},{},{:.1},{},{},{}", r.digit, r.samples, r.avg, r.min, r.max, r.status);
            }
            s.into_bytes()
        }
    };
    emit(a.output.out.as_deref(), &bytes)
}

pub fn cmd_encode(a: &EncodeArgs) -> Result<()> {
    let ds = a.data.load(Split::Test)?;
    let img = pick_image(&ds, a.index)?;
    let mut enc = PoissonEncoder::new(derive_seed(a.seed, a.index as u64), img.pixels.len())?;
    let train = enc.encode_train(&img.pixels, a.timesteps)?;
    let mut buf = Vec::new();
    match a.format {
        SpikeFormat::Csv => write_train_csv(&mut buf, &train)?,
        SpikeFormat::Bin => write_train_packed(&mut buf, &train)?,
    }
    emit(a.out.as_deref(), &buf)
}
