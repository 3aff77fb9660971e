//! Independent reference models used by the integration and acceptance
//! tests. Nothing here calls into the simulator's arithmetic, encoder or
//! controller; only plain integers, bit vectors and loops.

#![allow(dead_code)]

use std::path::PathBuf;

/// xorshift32 evaluated on an explicit 32-element bit vector (bit 0 = LSB).
pub fn xorshift32_bits(seed: u32) -> u32 {
    let mut x: Vec<bool> = (0..32).map(|i| seed >> i & 1 == 1).collect();
    let shl = |v: &[bool], k: usize| -> Vec<bool> { (0..32).map(|i| i >= k && v[i - k]).collect() };
    let shr = |v: &[bool], k: usize| -> Vec<bool> { (0..32).map(|i| i + k < 32 && v[i + k]).collect() };
    let xor = |a: &[bool], b: &[bool]| -> Vec<bool> { a.iter().zip(b).map(|(p, q)| p ^ q).collect() };
    x = xor(&x, &shl(&x, 13));
    x = xor(&x, &shr(&x, 17));
    x = xor(&x, &shl(&x, 5));
    x.iter().enumerate().fold(0u32, |acc, (i, &b)| acc | (u32::from(b) << i))
}

/// xorshift32 in wide integer arithmetic with explicit masking.
pub struct OracleRng(u64);

impl OracleRng {
    pub fn new(seed: u32) -> Self {
        assert_ne!(seed, 0);
        OracleRng(u64::from(seed))
    }

    pub fn next(&mut self) -> u64 {
        const MASK: u64 = 0xFFFF_FFFF;
        let mut x = self.0;
        x = (x ^ (x << 13)) & MASK;
        x = (x ^ (x >> 17)) & MASK;
        x = (x ^ (x << 5)) & MASK;
        self.0 = x;
        x
    }
}

/// Floor division by 2^n.
pub fn floor_shift(v: i64, n: u32) -> i64 {
    v.div_euclid(1i64 << n)
}

pub fn clamp_width(v: i64, width: u32) -> i64 {
    let max = (1i64 << (width - 1)) - 1;
    let min = -max - 1;
    v.max(min).min(max)
}

#[derive(Clone, Debug)]
pub struct OracleParams {
    pub n_inputs: usize,
    pub n_outputs: usize,
    pub timesteps: usize,
    pub threshold: i64,
    pub shift: u32,
    pub width: u32,
    /// `None` leaks once per timestep, `Some(r)` after every `r` inputs.
    pub row_len: Option<usize>,
    pub pruning: bool,
    /// `true` for earliest-first-spike readout, `false` for spike counts.
    pub first_to_fire: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleTrace {
    pub potentials: Vec<Vec<i64>>,
    /// (neuron, timestep, window, pre-reset potential)
    pub fires: Vec<(usize, usize, usize, i64)>,
    pub additions: Vec<u64>,
    pub first_spike: Vec<Option<usize>>,
    pub prediction: usize,
}

/// Scalar cycle-level reference: one pixel, one neuron, one window at a time.
pub fn oracle_run(p: &OracleParams, weights: &[Vec<i64>], image: &[u8], seed: u32) -> OracleTrace {
    let mut rng = OracleRng::new(seed);
    let mut v = vec![0i64; p.n_outputs];
    let mut on = vec![true; p.n_outputs];
    let mut first = vec![None; p.n_outputs];
    let mut out = OracleTrace {
        potentials: vec![],
        fires: vec![],
        additions: vec![],
        first_spike: vec![],
        prediction: 0,
    };
    let window = p.row_len.unwrap_or(p.n_inputs);
    for t in 0..p.timesteps {
        let mut spike = vec![0u8; p.n_inputs];
        for i in 0..p.n_inputs {
            let r = (rng.next() % 256) as u8;
            spike[i] = u8::from(image[i] > r);
        }
        let mut adds = 0u64;
        let mut start = 0;
        let mut w_idx = 0;
        while start < p.n_inputs {
            let end = (start + window).min(p.n_inputs);
            for n in 0..p.n_outputs {
                if !on[n] {
                    continue;
                }
                let mut acc = 0i64;
                for i in start..end {
                    if spike[i] == 1 {
                        acc += weights[n][i];
                        adds += 1;
                    }
                }
                v[n] = clamp_width(v[n] + acc, p.width);
                v[n] = clamp_width(v[n] - floor_shift(v[n], p.shift), p.width);
                if v[n] >= p.threshold {
                    out.fires.push((n, t, w_idx, v[n]));
                    v[n] = 0;
                    if first[n].is_none() {
                        first[n] = Some(t);
                    }
                    if p.pruning {
                        on[n] = false;
                    }
                }
            }
            start = end;
            w_idx += 1;
        }
        out.potentials.push(v.clone());
        out.additions.push(adds);
    }
    out.first_spike = first;
    out.prediction = oracle_predict(p, &out, p.timesteps);
    out
}

/// Readout using only timesteps `< horizon`.
pub fn oracle_predict(p: &OracleParams, tr: &OracleTrace, horizon: usize) -> usize {
    let last = &tr.potentials[horizon - 1];
    let fallback = || {
        let mut best = 0;
        for n in 0..last.len() {
            if last[n] > last[best] {
                best = n;
            }
        }
        best
    };
    if p.first_to_fire {
        let mut best: Option<(usize, i64, usize)> = None;
        for n in 0..p.n_outputs {
            let Some(&(_, t, _, pre)) = tr.fires.iter().find(|f| f.0 == n && f.1 < horizon) else {
                continue;
            };
            let better = match best {
                None => true,
                Some((bt, bpre, _)) => t < bt || (t == bt && pre > bpre),
            };
            if better {
                best = Some((t, pre, n));
            }
        }
        best.map_or_else(fallback, |b| b.2)
    } else {
        let mut counts = vec![0usize; p.n_outputs];
        for f in tr.fires.iter().filter(|f| f.1 < horizon) {
            counts[f.0] += 1;
        }
        if counts.iter().all(|&c| c == 0) {
            return fallback();
        }
        let mut best = 0;
        for n in 1..counts.len() {
            if counts[n] > counts[best] {
                best = n;
            }
        }
        best
    }
}

/// Tiny deterministic generator for building test instances.
pub struct Lcg(u64);

impl Lcg {
    pub fn new(seed: u64) -> Self {
        Lcg(seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407))
    }

    pub fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        self.0 >> 33
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.next() % n
    }

    pub fn range(&mut self, lo: i64, hi: i64) -> i64 {
        lo + self.below((hi - lo + 1) as u64) as i64
    }
}

/// MNIST directory: `$SPIKEFORGE_DATA_DIR`, else `<workspace>/data/mnist`.
pub fn mnist_dir() -> PathBuf {
    std::env::var_os("SPIKEFORGE_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"))
}
