//! MNIST IDX ingestion and the robustness perturbations.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::encoder::Xorshift32;
use crate::error::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
pub const MNIST_SIDE: usize = 28;

/// Default Gaussian noise sigma in intensity units (0.2 of full scale).
pub const DEFAULT_NOISE_SIGMA: f64 = 51.0;
pub const DEFAULT_OCCLUSION_PATCH: usize = 8;
pub const DEFAULT_ROTATION_DEGREES: f64 = 15.0;
pub const DEFAULT_SHIFT_FRACTION: f64 = 0.2;

/// A grayscale image, row-major.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Image {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
    pub label: Option<u8>,
}

impl Image {
    pub fn new(rows: usize, cols: usize, pixels: Vec<u8>, label: Option<u8>) -> Result<Self> {
        if pixels.len() != rows * cols {
            return Err(Error::Dimension {
                what: "image pixels",
                expected: rows * cols,
                got: pixels.len(),
            });
        }
        Ok(Self {
            rows,
            cols,
            pixels,
            label,
        })
    }

    pub fn at(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.cols + col]
    }

    fn with_pixels(&self, pixels: Vec<u8>) -> Self {
        Self {
            pixels,
            ..self.clone()
        }
    }

    /// Binary PGM (P5) rendering for quick visual checks.
    pub fn write_pgm<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "P5\n{} {}\n255\n", self.cols, self.rows)?;
        out.write_all(&self.pixels)?;
        Ok(())
    }
}

impl AsRef<[u8]> for Image {
    fn as_ref(&self) -> &[u8] {
        &self.pixels
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    pub images: Vec<Image>,
    pub split: Split,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Labels in image order; errors if any image is unlabeled.
    pub fn labels(&self) -> Result<Vec<u8>> {
        self.images
            .iter()
            .enumerate()
            .map(|(i, img)| {
                img.label
                    .ok_or_else(|| Error::Input(format!("image {i} has no label")))
            })
            .collect()
    }

    /// First `n` images (or all of them).
    pub fn take(&self, n: usize) -> Dataset {
        Dataset {
            images: self.images.iter().take(n).cloned().collect(),
            split: self.split,
        }
    }

    /// Seeded split into (first, second) with `second_len` images in the second
    /// part, using a Fisher-Yates shuffle driven by xorshift32.
    pub fn split_off_shuffled(&self, second_len: usize, seed: u32) -> Result<(Dataset, Dataset)> {
        if second_len > self.len() {
            return Err(Error::Input(format!(
                "cannot hold out {second_len} of {} images",
                self.len()
            )));
        }
        let mut rng = Xorshift32::new(seed)?;
        let mut order: Vec<usize> = (0..self.len()).collect();
        shuffle(&mut order, &mut rng);
        let cut = self.len() - second_len;
        let pick = |ix: &[usize], split| Dataset {
            images: ix.iter().map(|&i| self.images[i].clone()).collect(),
            split,
        };
        Ok((pick(&order[..cut], Split::Train), pick(&order[cut..], Split::Validation)))
    }

    /// Serialize back to (images IDX bytes, labels IDX bytes).
    pub fn to_idx(&self) -> Result<(Vec<u8>, Vec<u8>)> {
        let (rows, cols) = self
            .images
            .first()
            .map_or((MNIST_SIDE, MNIST_SIDE), |im| (im.rows, im.cols));
        let mut images = Vec::with_capacity(16 + self.len() * rows * cols);
        images.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
        images.extend_from_slice(&(self.len() as u32).to_be_bytes());
        images.extend_from_slice(&(rows as u32).to_be_bytes());
        images.extend_from_slice(&(cols as u32).to_be_bytes());
        for im in &self.images {
            if (im.rows, im.cols) != (rows, cols) {
                return Err(Error::Input("IDX requires uniform image dimensions".into()));
            }
            images.extend_from_slice(&im.pixels);
        }
        let mut labels = Vec::with_capacity(8 + self.len());
        labels.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
        labels.extend_from_slice(&(self.len() as u32).to_be_bytes());
        labels.extend(self.labels()?);
        Ok((images, labels))
    }
}

/// In-place Fisher-Yates shuffle.
pub fn shuffle<T>(items: &mut [T], rng: &mut Xorshift32) {
    for i in (1..items.len()).rev() {
        let j = rng.next_below(i as u32 + 1) as usize;
        items.swap(i, j);
    }
}

fn be_u32(bytes: &[u8], offset: usize, what: &'static str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or(Error::Truncated {
            what,
            needed: offset + 4,
            available: bytes.len(),
        })
}

fn check_magic(bytes: &[u8], expected: u32, what: &'static str) -> Result<()> {
    let magic = be_u32(bytes, 0, what)?;
    if magic != expected {
        return Err(Error::BadMagic {
            what,
            expected: format!("{expected:#010x}"),
            found: format!("{magic:#010x}"),
        });
    }
    Ok(())
}

/// Parse an IDX3 image container into `(rows, cols, images)`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, Vec<Vec<u8>>)> {
    check_magic(bytes, IDX_IMAGES_MAGIC, "IDX images")?;
    let count = be_u32(bytes, 4, "IDX images header")? as usize;
    let rows = be_u32(bytes, 8, "IDX images header")? as usize;
    let cols = be_u32(bytes, 12, "IDX images header")? as usize;
    let size = rows * cols;
    let needed = 16 + count * size;
    if bytes.len() < needed {
        return Err(Error::Truncated {
            what: "IDX images payload",
            needed,
            available: bytes.len(),
        });
    }
    let images = if size == 0 {
        vec![Vec::new(); count]
    } else {
        bytes[16..needed].chunks_exact(size).map(<[u8]>::to_vec).collect()
    };
    Ok((rows, cols, images))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    check_magic(bytes, IDX_LABELS_MAGIC, "IDX labels")?;
    let count = be_u32(bytes, 4, "IDX labels header")? as usize;
    let needed = 8 + count;
    if bytes.len() < needed {
        return Err(Error::Truncated {
            what: "IDX labels payload",
            needed,
            available: bytes.len(),
        });
    }
    Ok(bytes[8..needed].to_vec())
}

pub fn dataset_from_idx(images: &[u8], labels: &[u8], split: Split) -> Result<Dataset> {
    let (rows, cols, pixels) = parse_idx_images(images)?;
    let labels = parse_idx_labels(labels)?;
    if pixels.len() != labels.len() {
        return Err(Error::CountMismatch {
            images: pixels.len(),
            labels: labels.len(),
        });
    }
    let images = pixels
        .into_iter()
        .zip(labels)
        .map(|(p, l)| Image::new(rows, cols, p, Some(l)))
        .collect::<Result<_>>()?;
    Ok(Dataset { images, split })
}

pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>, split: Split) -> Result<Dataset> {
    dataset_from_idx(&fs::read(images_path)?, &fs::read(labels_path)?, split)
}

/// Standard MNIST file names under a data directory.
pub fn mnist_paths(dir: &Path, split: Split) -> (PathBuf, PathBuf) {
    let prefix = match split {
        Split::Test => "t10k",
        Split::Train | Split::Validation => "train",
    };
    (
        dir.join(format!("{prefix}-images-idx3-ubyte")),
        dir.join(format!("{prefix}-labels-idx1-ubyte")),
    )
}

/// Rotate about the image center by `degrees` (counter-clockwise on screen),
/// nearest-neighbor sampling, zero fill outside the source.
pub fn rotate(img: &Image, degrees: f64) -> Image {
    let (sin, cos) = degrees.to_radians().sin_cos();
    let cy = (img.rows as f64 - 1.0) / 2.0;
    let cx = (img.cols as f64 - 1.0) / 2.0;
    let mut out = vec![0u8; img.pixels.len()];
    for y in 0..img.rows {
        for x in 0..img.cols {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            // inverse map: where in the source does this output pixel come from
            let sx = (cx + cos * dx - sin * dy).round();
            let sy = (cy + sin * dx + cos * dy).round();
            if sx >= 0.0 && sy >= 0.0 && (sx as usize) < img.cols && (sy as usize) < img.rows {
                out[y * img.cols + x] = img.at(sy as usize, sx as usize);
            }
        }
    }
    img.with_pixels(out)
}

/// Pixel offset used by [`shift`] for an extent of `len` pixels.
pub fn shift_offset(fraction: f64, len: usize) -> usize {
    (fraction * len as f64).round() as usize
}

/// Translate right and down by `round(fraction * side)` pixels, zero fill.
pub fn shift(img: &Image, fraction: f64) -> Result<Image> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Input(format!("shift fraction {fraction} outside [0, 1]")));
    }
    let dy = shift_offset(fraction, img.rows);
    let dx = shift_offset(fraction, img.cols);
    let mut out = vec![0u8; img.pixels.len()];
    for y in dy..img.rows {
        for x in dx..img.cols {
            out[y * img.cols + x] = img.at(y - dy, x - dx);
        }
    }
    Ok(img.with_pixels(out))
}

/// Add `round(N(0, sigma^2))` to every pixel and clamp to `[0, 255]`.
///
/// Normals come from Box-Muller over a xorshift32 stream seeded with `seed`;
/// both outputs of each pair are used, in pixel order.
pub fn gaussian_noise(img: &Image, sigma: f64, seed: u32) -> Result<Image> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Input(format!("noise sigma must be finite and >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let mut rng = Xorshift32::new(seed)?;
    let mut spare: Option<f64> = None;
    let mut normal = || {
        if let Some(z) = spare.take() {
            return z;
        }
        let u1 = rng.next_unit();
        let u2 = rng.next_unit();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * std::f64::consts::PI * u2).sin_cos();
        spare = Some(r * s);
        r * c
    };
    let out = img
        .pixels
        .iter()
        .map(|&p| (f64::from(p) + (sigma * normal()).round()).clamp(0.0, 255.0) as u8)
        .collect();
    Ok(img.with_pixels(out))
}

/// Zero one `patch x patch` block at a seeded uniform location.
pub fn occlude(img: &Image, patch: usize, seed: u32) -> Result<Image> {
    if patch > img.rows || patch > img.cols {
        return Err(Error::Input(format!(
            "occlusion patch {patch} larger than {}x{} image",
            img.rows, img.cols
        )));
    }
    if patch == 0 {
        return Ok(img.clone());
    }
    let mut rng = Xorshift32::new(seed)?;
    let top = rng.next_below((img.rows - patch + 1) as u32) as usize;
    let left = rng.next_below((img.cols - patch + 1) as u32) as usize;
    let mut out = img.pixels.clone();
    for y in top..top + patch {
        out[y * img.cols + left..y * img.cols + left + patch].fill(0);
    }
    Ok(img.with_pixels(out))
}
