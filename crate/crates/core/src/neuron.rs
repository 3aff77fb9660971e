//! Single LIF neuron: integrate, leak, then fire-and-reset.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixedpoint::{Fixed, FixedConfig};

pub const DEFAULT_THRESHOLD: i64 = 128;
pub const DEFAULT_DECAY_SHIFT: u32 = 3;

/// Static parameters shared by all neurons of a layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeuronConfig {
    threshold: Fixed,
    decay_shift: u32,
    fixed: FixedConfig,
}

impl NeuronConfig {
    /// Resting potential is always zero; with a nonzero rest the shift leak
    /// would no longer equal `beta * (V - V_rest)`.
    pub fn new(threshold: i64, decay_shift: u32, fixed: FixedConfig) -> Result<Self> {
        let threshold = fixed.fixed(threshold)?;
        if threshold <= Fixed::ZERO {
            return Err(Error::Config(format!(
                "threshold {} must exceed the resting potential 0",
                threshold.raw()
            )));
        }
        fixed.check_shift(decay_shift)?;
        Ok(Self {
            threshold,
            decay_shift,
            fixed,
        })
    }

    pub fn threshold(&self) -> Fixed {
        self.threshold
    }

    pub fn rest(&self) -> Fixed {
        Fixed::ZERO
    }

    pub fn decay_shift(&self) -> u32 {
        self.decay_shift
    }

    pub fn fixed(&self) -> FixedConfig {
        self.fixed
    }
}

impl Default for NeuronConfig {
    fn default() -> Self {
        Self::new(DEFAULT_THRESHOLD, DEFAULT_DECAY_SHIFT, FixedConfig::default())
            .expect("default neuron config is valid")
    }
}

/// Dynamic state of one neuron. A disabled (pruned) neuron ignores every
/// update until it is reset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeuronState {
    pub potential: Fixed,
    pub fired_this_step: bool,
    pub first_spike_time: Option<usize>,
    pub enabled: bool,
}

impl Default for NeuronState {
    fn default() -> Self {
        Self {
            potential: Fixed::ZERO,
            fired_this_step: false,
            first_spike_time: None,
            enabled: true,
        }
    }
}

impl NeuronState {
    pub fn integrate(&mut self, cfg: &NeuronConfig, weighted_sum: i64) {
        if self.enabled {
            self.potential = cfg.fixed.sat_add(self.potential, weighted_sum);
        }
    }

    pub fn leak(&mut self, cfg: &NeuronConfig) {
        if self.enabled {
            self.potential = cfg.fixed.decay(self.potential, cfg.decay_shift);
        }
    }

    /// Compare against threshold (`>=`). On fire, hard-reset to rest and
    /// return the pre-reset potential.
    pub fn fire_check(&mut self, cfg: &NeuronConfig, t: usize) -> Option<Fixed> {
        if !self.enabled || self.potential < cfg.threshold {
            return None;
        }
        let pre_reset = self.potential;
        self.potential = cfg.rest();
        self.fired_this_step = true;
        self.first_spike_time.get_or_insert(t);
        Some(pre_reset)
    }

    /// One datapath pass: integrate, optional leak, fire check.
    pub fn step(
        &mut self,
        cfg: &NeuronConfig,
        weighted_sum: i64,
        leak: bool,
        t: usize,
    ) -> Option<Fixed> {
        self.integrate(cfg, weighted_sum);
        if leak {
            self.leak(cfg);
        }
        self.fire_check(cfg, t)
    }
}
