//! xorshift32 PRNG and the Poisson rate encoder.
//!
//! One generator is shared by every pixel of an image and advances once per
//! pixel, in pixel index order, per timestep. `R` is the low byte of each
//! output and a pixel spikes when its intensity is strictly greater than `R`,
//! so intensity `I` fires with probability exactly `I / 256`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of pixels in a 28x28 MNIST frame.
pub const MNIST_PIXELS: usize = 784;

/// Marsaglia's xorshift32 with the (13, 17, 5) shift triple.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Xorshift32 {
    state: u32,
}

impl Xorshift32 {
    /// A zero seed is rejected: zero is a fixed point of the generator.
    pub fn new(seed: u32) -> Result<Self> {
        if seed == 0 {
            return Err(Error::Config("xorshift32 seed must be nonzero".into()));
        }
        Ok(Self { state: seed })
    }

    pub fn state(&self) -> u32 {
        self.state
    }

    #[inline]
    pub fn next_u32(&mut self) -> u32 {
        let mut x = self.state;
        x ^= x << 13;
        x ^= x >> 17;
        x ^= x << 5;
        self.state = x;
        x
    }

    /// Low 8 bits of the next output.
    #[inline]
    pub fn next_byte(&mut self) -> u8 {
        (self.next_u32() & 0xff) as u8
    }

    /// Uniform in the open interval (0, 1), 24 bits of resolution.
    pub fn next_unit(&mut self) -> f64 {
        ((self.next_u32() >> 8) as f64 + 0.5) / (1u32 << 24) as f64
    }

    /// Uniform integer in `0..bound` (bound > 0), by rejection.
    pub fn next_below(&mut self, bound: u32) -> u32 {
        assert!(bound > 0);
        let zone = u32::MAX - (u32::MAX - bound + 1) % bound;
        loop {
            let x = self.next_u32();
            if x <= zone {
                return x % bound;
            }
        }
    }
}

/// Derive a nonzero per-item seed from a base seed and an item index.
///
/// splitmix64 finalizer over `base ^ index * golden`, folded 64 -> 32 by
/// xoring the halves. A zero result maps to `0x9E37_79B9`.
pub fn derive_seed(base: u64, index: u64) -> u32 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    let folded = (z ^ (z >> 32)) as u32;
    if folded == 0 {
        0x9E37_79B9
    } else {
        folded
    }
}

/// Comparator rule: a pixel spikes when its intensity is strictly above `r`.
#[inline]
pub fn spikes(intensity: u8, r: u8) -> bool {
    intensity > r
}

/// Binary spike vector for one timestep.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpikeFrame {
    pub bits: Vec<bool>,
    pub timestep: usize,
}

impl SpikeFrame {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn popcount(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Indices of the pixels that spiked.
    pub fn active(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
    }
}

/// Poisson encoder state: the shared PRNG plus the input size it serves.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PoissonEncoder {
    rng: Xorshift32,
    pixel_count: usize,
}

impl PoissonEncoder {
    pub fn new(seed: u32, pixel_count: usize) -> Result<Self> {
        if pixel_count == 0 {
            return Err(Error::Config("pixel_count must be at least 1".into()));
        }
        Ok(Self {
            rng: Xorshift32::new(seed)?,
            pixel_count,
        })
    }

    pub fn pixel_count(&self) -> usize {
        self.pixel_count
    }

    pub fn rng(&self) -> Xorshift32 {
        self.rng
    }

    /// Encode one frame. Advances the PRNG exactly `pixel_count` times.
    pub fn encode_frame(&mut self, image: &[u8], timestep: usize) -> Result<SpikeFrame> {
        if image.len() != self.pixel_count {
            return Err(Error::Dimension {
                what: "image pixels",
                expected: self.pixel_count,
                got: image.len(),
            });
        }
        let bits = image
            .iter()
            .map(|&intensity| spikes(intensity, self.rng.next_byte()))
            .collect();
        Ok(SpikeFrame { bits, timestep })
    }

    /// Encode `timesteps` consecutive frames from one advancing state.
    pub fn encode_train(&mut self, image: &[u8], timesteps: usize) -> Result<Vec<SpikeFrame>> {
        if timesteps == 0 {
            return Err(Error::Config("timesteps must be at least 1".into()));
        }
        (0..timesteps).map(|t| self.encode_frame(image, t)).collect()
    }
}

/// Write a spike train as CSV rows `timestep,pixel_index,bit`.
pub fn write_train_csv<W: Write>(mut out: W, train: &[SpikeFrame]) -> Result<()> {
    writeln!(out, "timestep,pixel_index,bit")?;
    for frame in train {
        for (i, &b) in frame.bits.iter().enumerate() {
            writeln!(out, "{},{},{}", frame.timestep, i, u8::from(b))?;
        }
    }
    Ok(())
}

const SPK_MAGIC: &[u8; 4] = b"SPK1";

/// Packed binary spike train: `SPK1`, u32 pixel_count, u32 timesteps (both
/// little-endian), then per timestep `ceil(pixel_count / 8)` bytes with
/// pixel `i` at bit `i % 8` of byte `i / 8`.
pub fn write_train_packed<W: Write>(mut out: W, train: &[SpikeFrame]) -> Result<()> {
    let pixel_count = train.first().map_or(0, SpikeFrame::len);
    if let Some(bad) = train.iter().find(|f| f.len() != pixel_count) {
        return Err(Error::Dimension {
            what: "spike frame",
            expected: pixel_count,
            got: bad.len(),
        });
    }
    out.write_all(SPK_MAGIC)?;
    out.write_all(&(pixel_count as u32).to_le_bytes())?;
    out.write_all(&(train.len() as u32).to_le_bytes())?;
    let stride = pixel_count.div_ceil(8);
    for frame in train {
        let mut packed = vec![0u8; stride];
        for i in frame.active() {
            packed[i / 8] |= 1 << (i % 8);
        }
        out.write_all(&packed)?;
    }
    Ok(())
}

/// Inverse of [`write_train_packed`].
pub fn read_train_packed<R: Read>(mut input: R) -> Result<Vec<SpikeFrame>> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() < 12 {
        return Err(Error::Truncated {
            what: "SPK1 header",
            needed: 12,
            available: bytes.len(),
        });
    }
    if &bytes[..4] != SPK_MAGIC {
        return Err(Error::BadMagic {
            what: "spike train",
            expected: "SPK1".into(),
            found: String::from_utf8_lossy(&bytes[..4]).into_owned(),
        });
    }
    let pixel_count = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let timesteps = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let stride = pixel_count.div_ceil(8);
    let needed = 12 + stride * timesteps;
    if bytes.len() < needed {
        return Err(Error::Truncated {
            what: "SPK1 payload",
            needed,
            available: bytes.len(),
        });
    }
    Ok((0..timesteps)
        .map(|t| {
            let row = &bytes[12 + t * stride..12 + (t + 1) * stride];
            SpikeFrame {
                bits: (0..pixel_count)
                    .map(|i| row[i / 8] >> (i % 8) & 1 == 1)
                    .collect(),
                timestep: t,
            }
        })
        .collect())
}
