//! Counter-based splittable random number generation.
//!
//! Every stochastic stage of the Monte Carlo draws from a generator keyed
//! by `(seed, stage, index)`, so each tag's randomness is addressable:
//! streams are bit-reproducible for a fixed seed and independent of
//! evaluation order or parallelism.
//!
//! The generator is a SplitMix64 counter: the key is avalanche-mixed into
//! a 64-bit state and successive outputs finalize `state + k*golden`.
//! Statistical quality is more than adequate for photon-stream Monte
//! Carlo; it is not a cryptographic generator.

use std::f64::consts::TAU;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stochastic stages of the simulation pipeline. Each stage owns an
/// independent substream per (seed, index).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Emission,
    Background,
    HbtRoute,
    HomPath,
    HomPair,
    HomSingle,
    /// Per-detector stages carry the channel in the low bits.
    DetectorTag(u16),
    DetectorDark(u16),
}

impl Stage {
    fn word(self) -> u64 {
        match self {
            Stage::Emission => 1,
            Stage::Background => 2,
            Stage::HbtRoute => 3,
            Stage::HomPath => 4,
            Stage::HomPair => 5,
            Stage::HomSingle => 6,
            Stage::DetectorTag(ch) => 7 | (u64::from(ch) << 32),
            Stage::DetectorDark(ch) => 8 | (u64::from(ch) << 32),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CounterRng {
    state: u64,
}

impl CounterRng {
    pub fn new(seed: u64, stage: Stage, index: u64) -> Self {
        let s0 = mix(seed ^ GOLDEN);
        let s1 = mix(s0 ^ stage.word().wrapping_mul(0xC2B2_AE3D_27D4_EB4F));
        let state = mix(s1 ^ index.wrapping_mul(0x1656_67B1_9E37_79F9));
        CounterRng { state }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix(self.state)
    }

    /// Uniform in [0, 1) with 53 random bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Exponential wait with the given rate (mean 1/rate). The argument of
    /// `ln` is in (0, 1], so the result is always finite.
    #[inline]
    pub fn exponential(&mut self, rate: f64) -> f64 {
        -(1.0 - self.uniform()).ln() / rate
    }

    /// Gaussian with mean 0 and the given sigma (Box-Muller).
    pub fn normal(&mut self, sigma: f64) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        sigma * (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
    }
}
