//! Quantized synaptic weight memory and the SNNW1 file format.
//!
//! SNNW1 layout (all integers little-endian):
//!
//! | offset | size | field                         |
//! |--------|------|-------------------------------|
//! | 0      | 5    | magic `SNNW1`                 |
//! | 5      | 4    | u32 n_outputs                 |
//! | 9      | 4    | u32 n_inputs                  |
//! | 13     | 1    | u8 weight_bits                |
//! | 14     | 8    | f64 scale                     |
//! | 22     | 2·N  | i16 weights, row-major by output neuron |

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::encoder::SpikeFrame;
use crate::error::{Error, Result};

pub const DEFAULT_WEIGHT_BITS: u8 = 9;

const MAGIC: &[u8; 5] = b"SNNW1";
const HEADER_LEN: usize = 5 + 4 + 4 + 1 + 8;

/// `n_outputs x n_inputs` signed weights of `bits` width, stored in i16
/// containers. `scale` maps quantized units back to float units
/// (`w_float ~= w_q / scale`).
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMatrix {
    n_outputs: usize,
    n_inputs: usize,
    bits: u8,
    scale: f64,
    weights: Vec<i16>,
}

impl WeightMatrix {
    pub fn new(
        n_outputs: usize,
        n_inputs: usize,
        bits: u8,
        scale: f64,
        weights: Vec<i16>,
    ) -> Result<Self> {
        if n_outputs == 0 || n_inputs == 0 {
            return Err(Error::Config("weight matrix needs at least one row and column".into()));
        }
        if !(2..=16).contains(&bits) {
            return Err(Error::Config(format!("weight width must be 2..=16 bits, got {bits}")));
        }
        if !scale.is_finite() || scale <= 0.0 {
            return Err(Error::Config(format!("weight scale must be finite and positive, got {scale}")));
        }
        if weights.len() != n_outputs * n_inputs {
            return Err(Error::Dimension {
                what: "weight count",
                expected: n_outputs * n_inputs,
                got: weights.len(),
            });
        }
        let (lo, hi) = weight_range(bits);
        if let Some(&w) = weights.iter().find(|&&w| i32::from(w) < lo || i32::from(w) > hi) {
            return Err(Error::Input(format!("weight {w} outside the {bits}-bit range [{lo}, {hi}]")));
        }
        Ok(Self {
            n_outputs,
            n_inputs,
            bits,
            scale,
            weights,
        })
    }

    pub fn zeros(n_outputs: usize, n_inputs: usize, bits: u8) -> Result<Self> {
        Self::new(n_outputs, n_inputs, bits, 1.0, vec![0; n_outputs * n_inputs])
    }

    pub fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn as_slice(&self) -> &[i16] {
        &self.weights
    }

    pub fn row(&self, neuron: usize) -> &[i16] {
        &self.weights[neuron * self.n_inputs..(neuron + 1) * self.n_inputs]
    }

    pub fn get(&self, neuron: usize, input: usize) -> i16 {
        self.weights[neuron * self.n_inputs + input]
    }

    /// Masked sum of one neuron's weights over the spiking inputs.
    /// Returns `(sum, additions)` where additions is the frame's popcount.
    pub fn weighted_sum(&self, neuron: usize, frame: &SpikeFrame) -> Result<(i64, usize)> {
        if frame.len() != self.n_inputs {
            return Err(Error::Dimension {
                what: "spike frame",
                expected: self.n_inputs,
                got: frame.len(),
            });
        }
        if neuron >= self.n_outputs {
            return Err(Error::Dimension {
                what: "neuron index bound",
                expected: self.n_outputs,
                got: neuron + 1,
            });
        }
        let row = self.row(neuron);
        Ok(frame
            .active()
            .fold((0i64, 0usize), |(sum, adds), i| (sum + i64::from(row[i]), adds + 1)))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 2 * self.weights.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.n_outputs as u32).to_le_bytes());
        out.extend_from_slice(&(self.n_inputs as u32).to_le_bytes());
        out.push(self.bits);
        out.extend_from_slice(&self.scale.to_le_bytes());
        for w in &self.weights {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
            let found = &bytes[..bytes.len().min(MAGIC.len())];
            return Err(Error::BadMagic {
                what: "weight file",
                expected: "SNNW1".into(),
                found: String::from_utf8_lossy(found).into_owned(),
            });
        }
        if bytes.len() < HEADER_LEN {
            return Err(Error::Truncated {
                what: "SNNW1 header",
                needed: HEADER_LEN,
                available: bytes.len(),
            });
        }
        let n_outputs = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
        let n_inputs = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
        let bits = bytes[13];
        let scale = f64::from_le_bytes(bytes[14..22].try_into().unwrap());
        let count = n_outputs
            .checked_mul(n_inputs)
            .ok_or_else(|| Error::Input("weight dimensions overflow".into()))?;
        let needed = HEADER_LEN + 2 * count;
        if bytes.len() < needed {
            return Err(Error::Truncated {
                what: "SNNW1 payload",
                needed,
                available: bytes.len(),
            });
        }
        if bytes.len() > needed {
            return Err(Error::Input(format!(
                "SNNW1 file has {} trailing bytes",
                bytes.len() - needed
            )));
        }
        let weights = bytes[HEADER_LEN..]
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes([c[0], c[1]]))
            .collect();
        Self::new(n_outputs, n_inputs, bits, scale, weights)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(&self.to_bytes())?;
        Ok(())
    }
}

/// Inclusive two's-complement range of a `bits`-wide weight.
pub fn weight_range(bits: u8) -> (i32, i32) {
    let half = 1i32 << (bits - 1);
    (-half, half - 1)
}
