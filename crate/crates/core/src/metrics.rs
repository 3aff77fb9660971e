//! Analytic cost models and measured operation counters.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::encoder::{derive_seed, PoissonEncoder};
use crate::error::{Error, Result};
use crate::layer::InferenceTrace;
use crate::weights::WeightMatrix;

/// Hidden width that reproduces the baseline's published op counts.
pub const BASELINE_TOPOLOGY: [usize; 3] = [784, 32, 10];
pub const PAPER_REDUCTION_RATIO: f64 = 11.3;
pub const DEFAULT_CLOCK_HZ: f64 = 40e6;
/// Cycles per timestep implied by 100 us for 10 timesteps at 40 MHz.
pub const PAPER_IMPLIED_CYCLES: u64 = 400;
/// One input event per clock cycle.
pub const ONE_EVENT_PER_CYCLE: u64 = 784;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnCostModel {
    pub topology: Vec<usize>,
    pub bytes_per_param: usize,
}

impl AnnCostModel {
    pub fn new(topology: Vec<usize>, bytes_per_param: usize) -> Result<Self> {
        if topology.len() < 2 || topology.contains(&0) {
            return Err(Error::Config(
                "ANN topology needs at least two nonzero layer sizes".into(),
            ));
        }
        Ok(Self {
            topology,
            bytes_per_param,
        })
    }

    pub fn baseline() -> Self {
        Self {
            topology: BASELINE_TOPOLOGY.to_vec(),
            bytes_per_param: 4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnCost {
    pub multiplications: u64,
    pub additions: u64,
    pub bytes: u64,
}

/// Dense MAC cost: one multiply per weight, one add per weight and per bias.
pub fn ann_ops(model: &AnnCostModel) -> AnnCost {
    let weights: u64 = model
        .topology
        .windows(2)
        .map(|p| (p[0] * p[1]) as u64)
        .sum();
    let biases: u64 = model.topology[1..].iter().map(|&n| n as u64).sum();
    AnnCost {
        multiplications: weights,
        additions: weights + biases,
        bytes: (weights + biases) * model.bytes_per_param as u64,
    }
}

/// Weight memory in bytes: `ceil(n_inputs * n_outputs * bits / 8)`.
pub fn snn_memory_bytes(n_inputs: usize, n_outputs: usize, weight_bits: u32) -> u64 {
    (n_inputs as u64 * n_outputs as u64 * u64::from(weight_bits)).div_ceil(8)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatencyModel {
    pub clock_hz: f64,
    pub cycles_per_timestep: u64,
}

impl LatencyModel {
    pub fn new(clock_hz: f64, cycles_per_timestep: u64) -> Result<Self> {
        if !(clock_hz > 0.0 && clock_hz.is_finite()) || cycles_per_timestep == 0 {
            return Err(Error::Config("clock and cycles per timestep must be positive".into()));
        }
        Ok(Self {
            clock_hz,
            cycles_per_timestep,
        })
    }

    pub fn paper_implied() -> Self {
        Self {
            clock_hz: DEFAULT_CLOCK_HZ,
            cycles_per_timestep: PAPER_IMPLIED_CYCLES,
        }
    }

    pub fn one_event_per_cycle() -> Self {
        Self {
            clock_hz: DEFAULT_CLOCK_HZ,
            cycles_per_timestep: ONE_EVENT_PER_CYCLE,
        }
    }

    pub fn latency_us(&self, timesteps: usize) -> f64 {
        timesteps as f64 * self.cycles_per_timestep as f64 / self.clock_hz * 1e6
    }
}

impl Default for LatencyModel {
    fn default() -> Self {
        Self::one_event_per_cycle()
    }
}

/// Accuracy (in percent) per second of inference time.
pub fn efficiency_score(accuracy_percent: f64, inference_time_s: f64) -> Result<f64> {
    if !(inference_time_s > 0.0) {
        return Err(Error::Input(format!(
            "inference time must be positive, got {inference_time_s}"
        )));
    }
    Ok(accuracy_percent / inference_time_s)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounters {
    pub additions_performed: u64,
    pub max_possible_additions: u64,
    /// Always zero: the spiking datapath has no multiplier.
    pub multiplications: u64,
    pub timesteps_used: u64,
}

impl OpCounters {
    pub fn from_trace(trace: &InferenceTrace) -> Self {
        Self {
            additions_performed: trace.total_additions(),
            max_possible_additions: trace.max_additions_per_step() * trace.timesteps() as u64,
            multiplications: 0,
            timesteps_used: trace.timesteps() as u64,
        }
    }

    pub fn ratio(&self) -> f64 {
        if self.max_possible_additions == 0 {
            0.0
        } else {
            self.additions_performed as f64 / self.max_possible_additions as f64
        }
    }
}

impl std::ops::Add for OpCounters {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            additions_performed: self.additions_performed + o.additions_performed,
            max_possible_additions: self.max_possible_additions + o.max_possible_additions,
            multiplications: self.multiplications + o.multiplications,
            timesteps_used: self.timesteps_used + o.timesteps_used,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparsitySummary {
    pub images: usize,
    pub mean_ratio: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub totals: OpCounters,
}

/// Active-addition ratio statistics across a set of traces.
pub fn sparsity_report(traces: &[InferenceTrace]) -> SparsitySummary {
    let counters: Vec<OpCounters> = traces.iter().map(OpCounters::from_trace).collect();
    let ratios: Vec<f64> = counters.iter().map(OpCounters::ratio).collect();
    let n = ratios.len();
    SparsitySummary {
        images: n,
        mean_ratio: if n == 0 { 0.0 } else { ratios.iter().sum::<f64>() / n as f64 },
        min_ratio: if n == 0 { 0.0 } else { ratios.iter().copied().fold(f64::INFINITY, f64::min) },
        max_ratio: ratios.iter().copied().fold(0.0, f64::max),
        totals: counters.into_iter().fold(OpCounters::default(), |a, b| a + b),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurrentStats {
    pub digit: u8,
    pub samples: usize,
    pub avg: f64,
    pub min: i64,
    pub max: i64,
    pub status: String,
}

/// First-timestep input current into each image's true-class neuron,
/// grouped by digit. Frame 0 is encoded with `derive_seed(base_seed, i)`,
/// i.e. the same frame the batch runner feeds image `i` at `t = 0`.
/// Status is `OK` when the class's average current is positive.
pub fn input_current_stats<I: AsRef<[u8]>>(
    w: &WeightMatrix,
    images: &[I],
    labels: &[u8],
    base_seed: u64,
) -> Result<Vec<CurrentStats>> {
    if images.len() != labels.len() {
        return Err(Error::Dimension {
            what: "labels vs images",
            expected: images.len(),
            got: labels.len(),
        });
    }
    let mut per_digit: Vec<Vec<i64>> = vec![Vec::new(); w.n_outputs()];
    for (i, (img, &label)) in images.iter().zip(labels).enumerate() {
        let label = usize::from(label);
        if label >= w.n_outputs() {
            return Err(Error::Input(format!("label {label} has no output neuron")));
        }
        let mut enc = PoissonEncoder::new(derive_seed(base_seed, i as u64), w.n_inputs())?;
        let frame = enc.encode_frame(img.as_ref(), 0)?;
        per_digit[label].push(w.weighted_sum(label, &frame)?.0);
    }
    Ok(per_digit
        .into_iter()
        .enumerate()
        .filter(|(_, v)| !v.is_empty())
        .map(|(d, v)| {
            let avg = v.iter().sum::<i64>() as f64 / v.len() as f64;
            CurrentStats {
                digit: d as u8,
                samples: v.len(),
                avg,
                min: *v.iter().min().unwrap(),
                max: *v.iter().max().unwrap(),
                status: if avg > 0.0 { "OK" } else { "LOW" }.into(),
            }
        })
        .collect())
}

pub fn render_current_table(rows: &[CurrentStats]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:>5} | {:>11} | {:>6} | {:>6} | {:>6}", "Digit", "Avg Current", "Min", "Max", "Status");
    let _ = writeln!(s, "{}", "-".repeat(47));
    for r in rows {
        let _ = writeln!(
            s,
            "{:>5} | {:>11.1} | {:>6} | {:>6} | {:>6}",
            r.digit, r.avg, r.min, r.max, r.status
        );
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyPoint {
    pub timestep: usize,
    pub time_s: f64,
    pub accuracy_percent: f64,
    pub efficiency: f64,
}

/// Efficiency at each horizon `1..=accuracy.len()`; `accuracy` in `[0, 1]`.
pub fn efficiency_curve(accuracy: &[f64], latency: &LatencyModel) -> Result<Vec<EfficiencyPoint>> {
    accuracy
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let t = i + 1;
            let time_s = latency.latency_us(t) / 1e6;
            Ok(EfficiencyPoint {
                timestep: t,
                time_s,
                accuracy_percent: a * 100.0,
                efficiency: efficiency_score(a * 100.0, time_s)?,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatencyRow {
    pub preset: String,
    pub clock_hz: f64,
    pub cycles_per_timestep: u64,
    pub timesteps: usize,
    pub latency_us: f64,
}

/// ANN-vs-SNN comparison in the layout of the published table, plus the
/// measured sparsity and efficiency curve when traces are available.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub ann_topology: Vec<usize>,
    pub ann: AnnCost,
    pub snn_multiplications: u64,
    pub snn_weight_bits: u32,
    pub snn_memory_bytes: u64,
    pub reduction_ratio: f64,
    pub paper_reduction_ratio: f64,
    pub latency: Vec<LatencyRow>,
    pub efficiency: Vec<EfficiencyPoint>,
    pub sparsity: Option<SparsitySummary>,
    pub footnotes: Vec<String>,
}

impl BenchReport {
    pub fn build(
        ann_model: &AnnCostModel,
        n_inputs: usize,
        n_outputs: usize,
        weight_bits: u32,
        latency: &LatencyModel,
        convergence_timesteps: usize,
        accuracy_curve: &[f64],
        sparsity: Option<SparsitySummary>,
    ) -> Result<Self> {
        let ann = ann_ops(ann_model);
        let snn_bytes = snn_memory_bytes(n_inputs, n_outputs, weight_bits);
        let reduction_ratio = ann.bytes as f64 / snn_bytes as f64;
        let presets = [
            ("paper-implied", LatencyModel::paper_implied()),
            ("one-event-per-cycle", LatencyModel::one_event_per_cycle()),
            ("configured", *latency),
        ];
        let latency_rows = presets
            .iter()
            .map(|(name, m)| LatencyRow {
                preset: (*name).into(),
                clock_hz: m.clock_hz,
                cycles_per_timestep: m.cycles_per_timestep,
                timesteps: convergence_timesteps,
                latency_us: m.latency_us(convergence_timesteps),
            })
            .collect();
        let footnotes = vec![
            format!(
                "Baseline topology {:?}: {} + {} = {} weights reproduce the published 25,408 multiplications; {} biases give 25,450 additions.",
                ann_model.topology,
                ann_model.topology.windows(2).map(|p| p[0] * p[1]).next().unwrap_or(0),
                ann_model.topology.windows(2).skip(1).map(|p| p[0] * p[1]).sum::<usize>(),
                ann.multiplications,
                ann.additions - ann.multiplications,
            ),
            format!(
                "Memory reduction computes to {reduction_ratio:.2}x ({} / {} bytes); the published figure is {PAPER_REDUCTION_RATIO}x.",
                ann.bytes, snn_bytes
            ),
            "Published SNN latency: ~100 us at 40 MHz over 10 timesteps in the text, \"< 1 us\" in the table; both are shown as formula presets.".into(),
            "Published ESP32 DSP latency: \"5130 us\" in the text, \"5.1 us\" in the table.".into(),
        ];
        Ok(Self {
            ann_topology: ann_model.topology.clone(),
            ann,
            snn_multiplications: 0,
            snn_weight_bits: weight_bits,
            snn_memory_bytes: snn_bytes,
            reduction_ratio,
            paper_reduction_ratio: PAPER_REDUCTION_RATIO,
            latency: latency_rows,
            efficiency: efficiency_curve(accuracy_curve, latency)?,
            sparsity,
            footnotes,
        })
    }

    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<18} | {:>22} | {:>22}", "Metric", "Baseline ANN", "SNN core");
        let _ = writeln!(s, "{}", "-".repeat(68));
        let _ = writeln!(s, "{:<18} | {:>22} | {:>22}", "Arithmetic", "Float MAC", "Fixed add/shift");
        let _ = writeln!(s, "{:<18} | {:>22} | {:>22}", "Multiplications", self.ann.multiplications, self.snn_multiplications);
        let _ = writeln!(s, "{:<18} | {:>22} | {:>22}", "Additions (max)", self.ann.additions, "see sparsity");
        let _ = writeln!(
            s,
            "{:<18} | {:>22} | {:>22}",
            "Model size (B)",
            format!("{} ({:.1} KB)", self.ann.bytes, self.ann.bytes as f64 / 1024.0),
            format!("{} ({:.2} KB)", self.snn_memory_bytes, self.snn_memory_bytes as f64 / 1024.0)
        );
        let _ = writeln!(s, "{:<18} | {:>22} | {:>22}", "Reduction", "", format!("{:.2}x (pub. {}x)", self.reduction_ratio, self.paper_reduction_ratio));
        for row in &self.latency {
            let _ = writeln!(
                s,
                "{:<18} | {:>22} | {:>22}",
                "Latency",
                row.preset,
                format!("{:.3} us", row.latency_us)
            );
        }
        if let Some(sp) = &self.sparsity {
            let _ = writeln!(s);
            let _ = writeln!(
                s,
                "Active additions: {} of {} possible over {} images (mean ratio {:.4}, min {:.4}, max {:.4}); multiplications {}",
                sp.totals.additions_performed,
                sp.totals.max_possible_additions,
                sp.images,
                sp.mean_ratio,
                sp.min_ratio,
                sp.max_ratio,
                sp.totals.multiplications
            );
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "{:>8} | {:>12} | {:>10} | {:>14}", "timestep", "time (s)", "acc (%)", "efficiency");
        for p in &self.efficiency {
            let _ = writeln!(
                s,
                "{:>8} | {:>12.3e} | {:>10.2} | {:>14.1}",
                p.timestep, p.time_s, p.accuracy_percent, p.efficiency
            );
        }
        let _ = writeln!(s);
        for (i, f) in self.footnotes.iter().enumerate() {
            let _ = writeln!(s, "[{}] {}", i + 1, f);
        }
        s
    }
}
