//! Shared pieces of the augmentation samplers.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed interval sampled uniformly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformRange {
    pub lo: f64,
    pub hi: f64,
}

impl UniformRange {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.random_range(self.lo..=self.hi)
        }
    }
}

/// Enable flag, inclusion probability and parameter range of one augmentation family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyConfig<R> {
    pub enabled: bool,
    pub probability: f64,
    pub range: R,
}

impl<R> FamilyConfig<R> {
    pub const fn on(range: R, probability: f64) -> Self {
        Self {
            enabled: true,
            probability,
            range,
        }
    }

    pub const fn off(range: R) -> Self {
        Self {
            enabled: false,
            probability: 0.0,
            range,
        }
    }

    /// Decides inclusion for one draw. In block mode the block coin replaces
    /// the per-family coin.
    pub(crate) fn include<G: Rng + ?Sized>(&self, block: Option<bool>, rng: &mut G) -> bool {
        if !self.enabled {
            return false;
        }
        match block {
            Some(coin) => coin,
            None => self.probability > 0.0 && rng.random_bool(self.probability.min(1.0)),
        }
    }
}

impl FamilyConfig<UniformRange> {
    pub(crate) fn validate(&self, name: &str, domain: impl Fn(&UniformRange) -> bool) -> Result<()> {
        check_probability(name, self.probability)?;
        let r = &self.range;
        if !(r.lo.is_finite() && r.hi.is_finite()) || r.lo > r.hi {
            return Err(Error::bad_range(name, format!("inverted range [{}, {}]", r.lo, r.hi)));
        }
        if !domain(r) {
            return Err(Error::bad_range(
                name,
                format!("[{}, {}] outside the family's domain", r.lo, r.hi),
            ));
        }
        Ok(())
    }
}

pub(crate) fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::bad_range(name, format!("probability {p} outside [0, 1]")));
    }
    Ok(())
}

/// How the application probability is interpreted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InclusionMode {
    /// Each family flips its own coin.
    #[default]
    PerFamily,
    /// One coin with probability `p` decides the whole photometric or geometric block.
    Block { probability: f64 },
}

impl InclusionMode {
    pub fn validate(&self) -> Result<()> {
        match *self {
            InclusionMode::PerFamily => Ok(()),
            InclusionMode::Block { probability } => check_probability("block", probability),
        }
    }

    pub(crate) fn block_coin<G: Rng + ?Sized>(&self, rng: &mut G) -> Option<bool> {
        match *self {
            InclusionMode::PerFamily => None,
            InclusionMode::Block { probability } => Some(rng.random_bool(probability.clamp(0.0, 1.0))),
        }
    }
}
