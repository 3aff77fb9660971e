//! Bit-exact software model of a fixed-point leaky integrate-and-fire
//! classifier core: xorshift32 Poisson input encoding, shift-based leak,
//! hard reset, and per-neuron active pruning. Also carries the offline
//! trainer and quantizer, MNIST ingestion with robustness perturbations,
//! and analytic cost models for benchmarking against a dense ANN.

pub mod cli;
pub mod dataset;
pub mod encoder;
pub mod error;
pub mod fixedpoint;
pub mod layer;
pub mod metrics;
pub mod neuron;
pub mod trainer;
pub mod weights;

pub use error::{Error, Result};
