//! Fully connected layer controller.
//!
//! Each timestep the controller draws one Poisson frame, then walks the
//! enabled neurons through integrate, leak and fire check. With pruning on,
//! a neuron's enable bit is cleared by its first spike and stays clear for
//! the rest of the window.
//!
//! Leak is scheduled either once per timestep (the whole frame is one
//! integration window) or once per image row, in which case every timestep
//! is split into row sub-cycles that each integrate, leak and fire-check.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoder::{derive_seed, PoissonEncoder};
use crate::error::{Error, Result};
use crate::neuron::{NeuronConfig, NeuronState};
use crate::weights::WeightMatrix;

pub const DEFAULT_TIMESTEPS: usize = 20;
pub const DEFAULT_OUTPUTS: usize = 10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeakSchedule {
    #[default]
    PerTimestep,
    /// Leak after every `row_len` inputs.
    PerRow(usize),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    /// Earliest first spike wins (time-to-first-spike).
    #[default]
    FirstToFire,
    SpikeCount,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerConfig {
    pub n_inputs: usize,
    pub n_outputs: usize,
    pub timesteps: usize,
    pub leak: LeakSchedule,
    pub pruning: bool,
    pub neuron: NeuronConfig,
    pub readout: Readout,
}

impl Default for LayerConfig {
    fn default() -> Self {
        Self {
            n_inputs: crate::encoder::MNIST_PIXELS,
            n_outputs: DEFAULT_OUTPUTS,
            timesteps: DEFAULT_TIMESTEPS,
            leak: LeakSchedule::PerTimestep,
            pruning: true,
            neuron: NeuronConfig::default(),
            readout: Readout::FirstToFire,
        }
    }
}

impl LayerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_inputs == 0 || self.n_outputs == 0 || self.timesteps == 0 {
            return Err(Error::Config(
                "n_inputs, n_outputs and timesteps must all be at least 1".into(),
            ));
        }
        if let LeakSchedule::PerRow(0) = self.leak {
            return Err(Error::Config("row length must be at least 1".into()));
        }
        Ok(())
    }

    fn check_weights(&self, w: &WeightMatrix) -> Result<()> {
        if w.n_inputs() != self.n_inputs {
            return Err(Error::Dimension {
                what: "weight columns vs layer inputs",
                expected: self.n_inputs,
                got: w.n_inputs(),
            });
        }
        if w.n_outputs() != self.n_outputs {
            return Err(Error::Dimension {
                what: "weight rows vs layer outputs",
                expected: self.n_outputs,
                got: w.n_outputs(),
            });
        }
        Ok(())
    }

    /// Input ranges integrated between consecutive leaks within a timestep.
    fn windows(&self) -> Vec<std::ops::Range<usize>> {
        match self.leak {
            LeakSchedule::PerTimestep => vec![0..self.n_inputs],
            LeakSchedule::PerRow(len) => (0..self.n_inputs)
                .step_by(len)
                .map(|start| start..(start + len).min(self.n_inputs))
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FireEvent {
    pub neuron: usize,
    pub timestep: usize,
    /// Integration window within the timestep (always 0 for per-timestep leak).
    pub cycle: usize,
    pub pre_reset: i32,
}

/// Everything observable about one inference window.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InferenceTrace {
    pub n_inputs: usize,
    pub n_outputs: usize,
    pub readout: Readout,
    /// `potentials[t][n]`: potential of neuron `n` at the end of timestep `t`.
    pub potentials: Vec<Vec<i32>>,
    /// Fire events in occurrence order.
    pub fires: Vec<FireEvent>,
    /// Accumulator additions actually performed in each timestep.
    pub additions: Vec<u64>,
    pub first_spike_times: Vec<Option<usize>>,
    pub prediction: usize,
    /// Earliest timestep from which every later horizon predicts `prediction`.
    pub prediction_time: usize,
}

impl InferenceTrace {
    pub fn timesteps(&self) -> usize {
        self.potentials.len()
    }

    /// Upper bound on additions per timestep: every neuron, every input.
    pub fn max_additions_per_step(&self) -> u64 {
        (self.n_inputs * self.n_outputs) as u64
    }

    pub fn total_additions(&self) -> u64 {
        self.additions.iter().sum()
    }

    pub fn spike_counts(&self, horizon: usize) -> Vec<usize> {
        let mut counts = vec![0; self.n_outputs];
        for e in self.fires.iter().filter(|e| e.timestep < horizon) {
            counts[e.neuron] += 1;
        }
        counts
    }

    /// Prediction using only timesteps `0..horizon` (`1 <= horizon <= T`).
    pub fn predict_at(&self, horizon: usize, readout: Readout) -> usize {
        assert!((1..=self.timesteps()).contains(&horizon));
        let fallback = || argmax_lowest(&self.potentials[horizon - 1]);
        match readout {
            Readout::FirstToFire => {
                // (time, -pre_reset, index) ordering picks earliest, then
                // highest pre-reset potential, then lowest index.
                let mut first: Vec<Option<(usize, i32)>> = vec![None; self.n_outputs];
                for e in self.fires.iter().filter(|e| e.timestep < horizon) {
                    first[e.neuron].get_or_insert((e.timestep, e.pre_reset));
                }
                first
                    .iter()
                    .enumerate()
                    .filter_map(|(n, f)| f.map(|(t, v)| (t, -i64::from(v), n)))
                    .min()
                    .map_or_else(fallback, |(_, _, n)| n)
            }
            Readout::SpikeCount => {
                let counts = self.spike_counts(horizon);
                if counts.iter().all(|&c| c == 0) {
                    fallback()
                } else {
                    argmax_lowest(&counts)
                }
            }
        }
    }

    /// Predictions at horizons `1..=T`.
    pub fn horizon_predictions(&self, readout: Readout) -> Vec<usize> {
        (1..=self.timesteps())
            .map(|h| self.predict_at(h, readout))
            .collect()
    }
}

/// Index of the maximum, ties to the lowest index.
fn argmax_lowest<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Classify a completed trace.
pub fn classify(trace: &InferenceTrace, readout: Readout) -> usize {
    trace.predict_at(trace.timesteps(), readout)
}

/// Run one inference window over `image` with a nonzero encoder seed.
pub fn run_inference(
    w: &WeightMatrix,
    image: &[u8],
    cfg: &LayerConfig,
    seed: u32,
) -> Result<InferenceTrace> {
    cfg.validate()?;
    cfg.check_weights(w)?;
    let mut encoder = PoissonEncoder::new(seed, cfg.n_inputs)?;
    let windows = cfg.windows();
    let ncfg = &cfg.neuron;
    let mut states = vec![NeuronState::default(); cfg.n_outputs];
    let mut potentials = Vec::with_capacity(cfg.timesteps);
    let mut additions = Vec::with_capacity(cfg.timesteps);
    let mut fires = Vec::new();
    let mut active = Vec::with_capacity(cfg.n_inputs);

    for t in 0..cfg.timesteps {
        let frame = encoder.encode_frame(image, t)?;
        active.clear();
        active.extend(frame.active());
        for s in &mut states {
            s.fired_this_step = false;
        }
        let mut adds = 0u64;
        let mut lo = 0;
        for (cycle, window) in windows.iter().enumerate() {
            let hi = lo + active[lo..].partition_point(|&i| i < window.end);
            let spikes = &active[lo..hi];
            lo = hi;
            for (n, s) in states.iter_mut().enumerate() {
                if !s.enabled {
                    continue;
                }
                let row = w.row(n);
                let sum: i64 = spikes.iter().map(|&i| i64::from(row[i])).sum();
                adds += spikes.len() as u64;
                if let Some(pre) = s.step(ncfg, sum, true, t) {
                    fires.push(FireEvent {
                        neuron: n,
                        timestep: t,
                        cycle,
                        pre_reset: pre.raw(),
                    });
                    if cfg.pruning {
                        s.enabled = false;
                    }
                }
            }
        }
        potentials.push(states.iter().map(|s| s.potential.raw()).collect());
        additions.push(adds);
    }

    let mut trace = InferenceTrace {
        n_inputs: cfg.n_inputs,
        n_outputs: cfg.n_outputs,
        readout: cfg.readout,
        potentials,
        fires,
        additions,
        first_spike_times: states.iter().map(|s| s.first_spike_time).collect(),
        prediction: 0,
        prediction_time: 0,
    };
    let per_horizon = trace.horizon_predictions(cfg.readout);
    let prediction = *per_horizon.last().expect("timesteps >= 1");
    trace.prediction = prediction;
    trace.prediction_time = per_horizon
        .iter()
        .rposition(|&p| p != prediction)
        .map_or(0, |i| i + 1);
    Ok(trace)
}

/// Run every image with seed `derive_seed(base_seed, index)`, in parallel.
/// The result is in input order and independent of scheduling.
pub fn run_batch<I>(
    w: &WeightMatrix,
    images: &[I],
    cfg: &LayerConfig,
    base_seed: u64,
) -> Result<Vec<InferenceTrace>>
where
    I: AsRef<[u8]> + Sync,
{
    images
        .par_iter()
        .enumerate()
        .map(|(i, img)| run_inference(w, img.as_ref(), cfg, derive_seed(base_seed, i as u64)))
        .collect()
}

/// Fraction correct at each horizon `1..=T`.
pub fn accuracy_curve(traces: &[InferenceTrace], labels: &[u8], readout: Readout) -> Result<Vec<f64>> {
    if traces.len() != labels.len() {
        return Err(Error::Dimension {
            what: "labels vs traces",
            expected: traces.len(),
            got: labels.len(),
        });
    }
    let Some(first) = traces.first() else {
        return Err(Error::Input("accuracy over an empty dataset".into()));
    };
    let horizons = first.timesteps();
    let mut correct = vec![0usize; horizons];
    for (trace, &label) in traces.iter().zip(labels) {
        for (h, p) in trace.horizon_predictions(readout).into_iter().enumerate() {
            correct[h] += usize::from(p == usize::from(label));
        }
    }
    Ok(correct
        .into_iter()
        .map(|c| c as f64 / traces.len() as f64)
        .collect())
}

/// Accuracy at each horizon `1..=T` over a labeled set.
pub fn accuracy_vs_timestep<I>(
    w: &WeightMatrix,
    images: &[I],
    labels: &[u8],
    cfg: &LayerConfig,
    base_seed: u64,
) -> Result<Vec<f64>>
where
    I: AsRef<[u8]> + Sync,
{
    let traces = run_batch(w, images, cfg, base_seed)?;
    accuracy_curve(&traces, labels, cfg.readout)
}
