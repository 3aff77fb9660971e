//! Offline float training of the bias-free readout and its quantization
//! into the signed weight memory the simulator runs on.
//!
//! Training is multinomial logistic regression on intensities scaled to
//! `[0, 1]`. Quantization is symmetric and linear; the scale is picked by
//! sweeping a geometric grid and keeping the candidate with the best
//! spiking-model accuracy on a held-out set.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::shuffle;
use crate::encoder::Xorshift32;
use crate::error::{Error, Result};
use crate::layer::{accuracy_curve, run_batch, LayerConfig};
use crate::weights::{weight_range, WeightMatrix, DEFAULT_WEIGHT_BITS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// L2 penalty coefficient on the weights.
    pub weight_decay: f64,
    pub seed: u32,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            learning_rate: 0.5,
            batch_size: 100,
            weight_decay: 1e-3,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloatWeights {
    pub n_outputs: usize,
    pub n_inputs: usize,
    /// Row-major `n_outputs x n_inputs`.
    pub weights: Vec<f64>,
    pub config: TrainConfig,
    pub final_train_accuracy: f64,
}

impl FloatWeights {
    pub fn row(&self, class: usize) -> &[f64] {
        &self.weights[class * self.n_inputs..(class + 1) * self.n_inputs]
    }

    /// Argmax of the float logits on raw 8-bit pixels.
    pub fn predict(&self, pixels: &[u8]) -> usize {
        let x: Vec<f64> = pixels.iter().map(|&p| normalize(p)).collect();
        let logits = logits(&self.weights, self.n_outputs, &x);
        argmax(&logits)
    }

    pub fn accuracy<I: AsRef<[u8]> + Sync>(&self, images: &[I], labels: &[u8]) -> f64 {
        let correct: usize = images
            .par_iter()
            .zip(labels)
            .filter(|(img, &l)| self.predict(img.as_ref()) == usize::from(l))
            .count();
        correct as f64 / images.len().max(1) as f64
    }
}

#[inline]
fn normalize(p: u8) -> f64 {
    f64::from(p) / 255.0
}

fn logits(weights: &[f64], n_outputs: usize, x: &[f64]) -> Vec<f64> {
    let n_inputs = x.len();
    (0..n_outputs)
        .map(|c| {
            weights[c * n_inputs..(c + 1) * n_inputs]
                .iter()
                .zip(x)
                .map(|(w, xi)| w * xi)
                .sum()
        })
        .collect()
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in z.iter_mut() {
        *v /= total;
    }
}

/// Mean cross-entropy (plus `0.5 * weight_decay * |W|^2`) over a batch and
/// its gradient with respect to the row-major weights.
pub fn loss_and_gradient(
    weights: &[f64],
    n_outputs: usize,
    xs: &[Vec<f64>],
    ys: &[usize],
    weight_decay: f64,
) -> (f64, Vec<f64>) {
    let n_inputs = weights.len() / n_outputs;
    let mut grad = vec![0.0; weights.len()];
    let mut loss = 0.0;
    for (x, &y) in xs.iter().zip(ys) {
        let mut p = logits(weights, n_outputs, x);
        softmax_in_place(&mut p);
        loss -= p[y].max(f64::MIN_POSITIVE).ln();
        for (c, &pc) in p.iter().enumerate() {
            let delta = pc - f64::from(u8::from(c == y));
            if delta != 0.0 {
                for (g, xi) in grad[c * n_inputs..(c + 1) * n_inputs].iter_mut().zip(x) {
                    *g += delta * xi;
                }
            }
        }
    }
    let n = xs.len() as f64;
    loss /= n;
    for g in &mut grad {
        *g /= n;
    }
    if weight_decay > 0.0 {
        loss += 0.5 * weight_decay * weights.iter().map(|w| w * w).sum::<f64>();
        for (g, w) in grad.iter_mut().zip(weights) {
            *g += weight_decay * w;
        }
    }
    (loss, grad)
}

/// Mini-batch gradient descent on softmax cross-entropy.
///
/// `log` receives one JSON line per epoch.
pub fn train_linear<I: AsRef<[u8]>>(
    images: &[I],
    labels: &[u8],
    n_outputs: usize,
    cfg: &TrainConfig,
    mut log: Option<&mut dyn Write>,
) -> Result<(FloatWeights, Vec<EpochLog>)> {
    if images.is_empty() || images.len() != labels.len() {
        return Err(Error::Input(format!(
            "need a nonempty labeled set, got {} images and {} labels",
            images.len(),
            labels.len()
        )));
    }
    if cfg.epochs == 0 || cfg.batch_size == 0 || !(cfg.learning_rate > 0.0) {
        return Err(Error::Config("epochs, batch size and learning rate must be positive".into()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| usize::from(l) >= n_outputs) {
        return Err(Error::Input(format!("label {bad} out of range for {n_outputs} classes")));
    }
    let n_inputs = images[0].as_ref().len();
    if images.iter().any(|im| im.as_ref().len() != n_inputs) {
        return Err(Error::Input("images have differing sizes".into()));
    }

    let mut rng = Xorshift32::new(cfg.seed)?;
    let mut weights = vec![0.0; n_outputs * n_inputs];
    let mut order: Vec<usize> = (0..images.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        shuffle(&mut order, &mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let xs: Vec<Vec<f64>> = batch
                .iter()
                .map(|&i| images[i].as_ref().iter().map(|&p| normalize(p)).collect())
                .collect();
            let ys: Vec<usize> = batch.iter().map(|&i| usize::from(labels[i])).collect();
            let (loss, grad) = loss_and_gradient(&weights, n_outputs, &xs, &ys, cfg.weight_decay);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Numeric(format!(
                    "training diverged in epoch {epoch}: batch loss {loss} (learning rate {})",
                    cfg.learning_rate
                )));
            }
            loss_sum += loss * batch.len() as f64;
            for (w, g) in weights.iter_mut().zip(&grad) {
                *w -= cfg.learning_rate * g;
            }
        }
        let fw = FloatWeights {
            n_outputs,
            n_inputs,
            weights: weights.clone(),
            config: cfg.clone(),
            final_train_accuracy: 0.0,
        };
        let entry = EpochLog {
            epoch,
            loss: loss_sum / images.len() as f64,
            accuracy: fw.accuracy(images_as_slices(images).as_slice(), labels),
        };
        if let Some(out) = log.as_deref_mut() {
            serde_json::to_writer(&mut *out, &entry)?;
            writeln!(out)?;
        }
        history.push(entry);
    }

    let final_train_accuracy = history.last().map_or(0.0, |e| e.accuracy);
    Ok((
        FloatWeights {
            n_outputs,
            n_inputs,
            weights,
            config: cfg.clone(),
            final_train_accuracy,
        },
        history,
    ))
}

fn images_as_slices<I: AsRef<[u8]>>(images: &[I]) -> Vec<&[u8]> {
    images.iter().map(AsRef::as_ref).collect()
}

/// Quantization settings: weight width and the candidate scales to sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantSpec {
    pub bits: u8,
    /// Candidate scales; empty means [`QuantSpec::default_grid`].
    pub candidates: Vec<f64>,
}

impl Default for QuantSpec {
    fn default() -> Self {
        Self {
            bits: DEFAULT_WEIGHT_BITS,
            candidates: Vec::new(),
        }
    }
}

impl QuantSpec {
    /// Geometric grid in quarter-octave steps, from 2x over full scale (the
    /// largest weight clips) down to 1/128 of full scale.
    pub fn default_grid(&self, max_abs: f64) -> Vec<f64> {
        let full = f64::from(weight_range(self.bits).1) / max_abs;
        (-4..=28).map(|k| full * 2f64.powf(-f64::from(k) / 4.0)).collect()
    }
}

/// `clamp(round(w * scale))` into the signed `bits` range.
pub fn quantize_with_scale(fw: &FloatWeights, bits: u8, scale: f64) -> Result<WeightMatrix> {
    if fw.weights.iter().all(|&w| w == 0.0) {
        return Err(Error::Numeric("cannot quantize an all-zero weight set".into()));
    }
    if fw.weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::Numeric("weights contain non-finite values".into()));
    }
    let (lo, hi) = weight_range(bits);
    let q = fw
        .weights
        .iter()
        .map(|&w| (w * scale).round().clamp(f64::from(lo), f64::from(hi)) as i16)
        .collect();
    WeightMatrix::new(fw.n_outputs, fw.n_inputs, bits, scale, q)
}

/// Map quantized weights back to float units.
pub fn dequantize(w: &WeightMatrix) -> FloatWeights {
    FloatWeights {
        n_outputs: w.n_outputs(),
        n_inputs: w.n_inputs(),
        weights: w.as_slice().iter().map(|&q| f64::from(q) / w.scale()).collect(),
        config: TrainConfig::default(),
        final_train_accuracy: 0.0,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalePoint {
    pub scale: f64,
    pub accuracy: f64,
}

/// Sweep candidate scales and keep the one with the best spiking accuracy
/// on the validation set at the layer's full horizon. Ties go to the
/// earlier candidate.
pub fn quantize<I: AsRef<[u8]> + Sync>(
    fw: &FloatWeights,
    spec: &QuantSpec,
    val_images: &[I],
    val_labels: &[u8],
    layer: &LayerConfig,
    seed: u64,
) -> Result<(WeightMatrix, Vec<ScalePoint>)> {
    let max_abs = fw.weights.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    if max_abs == 0.0 {
        return Err(Error::Numeric("cannot quantize an all-zero weight set".into()));
    }
    let grid = if spec.candidates.is_empty() {
        spec.default_grid(max_abs)
    } else {
        spec.candidates.clone()
    };
    let mut sweep = Vec::with_capacity(grid.len());
    let mut best: Option<(usize, WeightMatrix)> = None;
    for &scale in &grid {
        let wq = quantize_with_scale(fw, spec.bits, scale)?;
        let traces = run_batch(&wq, val_images, layer, seed)?;
        let correct = traces
            .iter()
            .zip(val_labels)
            .filter(|(t, &l)| t.prediction == usize::from(l))
            .count();
        debug_assert_eq!(
            accuracy_curve(&traces, val_labels, layer.readout)?.last().copied(),
            Some(correct as f64 / val_labels.len() as f64)
        );
        sweep.push(ScalePoint {
            scale,
            accuracy: correct as f64 / val_labels.len().max(1) as f64,
        });
        if best.as_ref().is_none_or(|(c, _)| correct > *c) {
            best = Some((correct, wq));
        }
    }
    let (_, wq) = best.ok_or_else(|| Error::Config("empty scale grid".into()))?;
    Ok((wq, sweep))
}
