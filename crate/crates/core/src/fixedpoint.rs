//! Two's-complement fixed-point arithmetic matching the accumulator ALU.
//!
//! Values are plain signed integers interpreted at a configurable width.
//! Every operation saturates to `[min_value, max_value]`; nothing wraps.
//! The leak primitive is `v - (v >> n)` with an arithmetic (flooring) shift.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default accumulator width in bits.
pub const DEFAULT_WIDTH_BITS: u32 = 16;

/// Width and saturation bounds of a signed fixed-point register.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct FixedConfig {
    width_bits: u32,
}

impl FixedConfig {
    pub fn new(width_bits: u32) -> Result<Self> {
        if !(2..=32).contains(&width_bits) {
            return Err(Error::Config(format!(
                "fixed-point width must be in 2..=32 bits, got {width_bits}"
            )));
        }
        Ok(Self { width_bits })
    }

    pub fn width_bits(&self) -> u32 {
        self.width_bits
    }

    pub fn min_value(&self) -> i64 {
        -(1i64 << (self.width_bits - 1))
    }

    pub fn max_value(&self) -> i64 {
        (1i64 << (self.width_bits - 1)) - 1
    }

    /// Clamp an arbitrary integer into this register's range.
    pub fn saturate(&self, v: i64) -> Fixed {
        Fixed(v.clamp(self.min_value(), self.max_value()) as i32)
    }

    /// Build a value, rejecting anything outside the register range.
    pub fn fixed(&self, raw: i64) -> Result<Fixed> {
        if raw < self.min_value() || raw > self.max_value() {
            return Err(Error::Config(format!(
                "{raw} does not fit in a {}-bit signed register",
                self.width_bits
            )));
        }
        Ok(Fixed(raw as i32))
    }

    /// Validate a leak shift amount against this width.
    pub fn check_shift(&self, n: u32) -> Result<()> {
        if n >= self.width_bits {
            return Err(Error::Config(format!(
                "decay shift {n} must be below the register width {}",
                self.width_bits
            )));
        }
        Ok(())
    }

    /// Saturating add: `clamp(a + b)`.
    #[inline]
    pub fn sat_add(&self, a: Fixed, b: i64) -> Fixed {
        self.saturate(i64::from(a.0).saturating_add(b))
    }

    /// Shift-based leak: `v - asr(v, n)`, saturated.
    ///
    /// `n` must already have passed [`FixedConfig::check_shift`].
    #[inline]
    pub fn decay(&self, v: Fixed, n: u32) -> Fixed {
        debug_assert!(n < self.width_bits);
        let v = i64::from(v.0);
        self.saturate(v - asr(v, n))
    }
}

impl Default for FixedConfig {
    fn default() -> Self {
        Self {
            width_bits: DEFAULT_WIDTH_BITS,
        }
    }
}

impl TryFrom<u32> for FixedConfig {
    type Error = Error;

    fn try_from(width_bits: u32) -> Result<Self> {
        Self::new(width_bits)
    }
}

impl From<FixedConfig> for u32 {
    fn from(cfg: FixedConfig) -> u32 {
        cfg.width_bits
    }
}

/// A register value. Only a [`FixedConfig`] can produce one, so it is
/// always in range for the config that made it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Fixed(i32);

impl Fixed {
    pub const ZERO: Fixed = Fixed(0);

    pub fn raw(self) -> i32 {
        self.0
    }
}

impl From<Fixed> for i64 {
    fn from(v: Fixed) -> i64 {
        i64::from(v.0)
    }
}

/// Arithmetic right shift: `floor(v / 2^n)` with sign extension.
#[inline]
pub fn asr(v: i64, n: u32) -> i64 {
    v >> n
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w16() -> FixedConfig {
        FixedConfig::default()
    }

    #[test]
    fn bounds() {
        let c = w16();
        assert_eq!(c.min_value(), -32768);
        assert_eq!(c.max_value(), 32767);
        assert_eq!(c.min_value(), -(c.max_value() + 1));
        assert!(FixedConfig::new(1).is_err());
        assert!(FixedConfig::new(33).is_err());
        let c2 = FixedConfig::new(2).unwrap();
        assert_eq!((c2.min_value(), c2.max_value()), (-2, 1));
    }

    #[test]
    fn sat_add_examples() {
        let c = w16();
        assert_eq!(c.sat_add(Fixed::ZERO, 0).raw(), 0);
        assert_eq!(c.sat_add(c.fixed(32760).unwrap(), 100).raw(), 32767);
        assert_eq!(c.sat_add(c.fixed(-32760).unwrap(), -100).raw(), -32768);
    }

    #[test]
    fn decay_examples() {
        let c = w16();
        assert_eq!(c.decay(c.fixed(128).unwrap(), 3).raw(), 112);
        assert_eq!(c.decay(Fixed::ZERO, 5).raw(), 0);
        assert_eq!(c.decay(c.fixed(-9).unwrap(), 3).raw(), -7);
        assert_eq!(c.decay(c.fixed(127).unwrap(), 3).raw(), 112);
    }

    #[test]
    fn asr_examples() {
        assert_eq!(asr(8, 3), 1);
        assert_eq!(asr(-1, 3), -1);
        assert_eq!(asr(-9, 3), -2);
    }

    #[test]
    fn shift_validation() {
        let c = w16();
        assert!(c.check_shift(15).is_ok());
        assert!(c.check_shift(16).is_err());
    }

    #[test]
    fn out_of_range_construction_rejected() {
        let c = FixedConfig::new(8).unwrap();
        assert!(c.fixed(128).is_err());
        assert!(c.fixed(-129).is_err());
        assert_eq!(c.saturate(1000).raw(), 127);
    }
}
