//! Deterministic pseudo-randomness and the two explicit "budget" types.
//!
//! All probabilistic operations in this crate draw their randomness from
//! [`SplitMix64`] seeded by an explicit [`Seed`], so seed spaces can be
//! enumerated and experiments replayed bit for bit.  The generator is the
//! SplitMix64 recurrence:
//!
//! ```text
//! state += 0x9E3779B97F4A7C15
//! z = state
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! output = z ^ (z >> 31)
//! ```

use crate::error::{Error, Result};

/// SplitMix64 pseudo-random generator.
#[derive(Debug, Clone, Copy)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform value in `[0, n)` via 128-bit multiply-shift.
    pub fn next_below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_bit(&mut self) -> u8 {
        (self.next_u64() >> 63) as u8
    }

    /// The low `width` bits of the next output, `width <= 64`.
    pub fn next_bits(&mut self, width: u32) -> u64 {
        debug_assert!(width <= 64);
        if width == 0 {
            return 0;
        }
        self.next_u64() >> (64 - width)
    }
}

/// Mixes a sequence of words into one seed value.
pub fn mix(parts: &[u64]) -> u64 {
    let mut g = SplitMix64::new(0x1357_9BDF_2468_ACE0);
    let mut acc = 0u64;
    for &p in parts {
        g.state ^= p.wrapping_add(acc);
        acc = g.next_u64();
    }
    acc
}

/// Explicit randomness budget: a value known to fit in `bit_budget` bits.
///
/// Probabilistic operations take a `Seed` instead of an implicit RNG so the
/// number of random bits they consume is visible and enumerable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seed {
    pub value: u64,
    pub bit_budget: u32,
}

impl Seed {
    pub fn new(value: u64, bit_budget: u32) -> Result<Self> {
        if bit_budget > 64 {
            return Err(Error::Domain(format!("bit budget {bit_budget} > 64")));
        }
        if bit_budget < 64 && value >> bit_budget != 0 {
            return Err(Error::Domain(format!(
                "seed value {value} does not fit in {bit_budget} bits"
            )));
        }
        Ok(Self { value, bit_budget })
    }

    /// Full 64-bit seed.
    pub fn from_value(value: u64) -> Self {
        Self { value, bit_budget: 64 }
    }

    pub fn rng(&self) -> SplitMix64 {
        SplitMix64::new(self.value)
    }

    /// Derives an independent child seed, e.g. one per trial index.
    pub fn derive(&self, tag: u64) -> Seed {
        Seed::from_value(mix(&[self.value, tag]))
    }
}

/// Error budget stored as the exponent of a negative power of two.
///
/// Epsilon is always `2^-e`; rounding an arbitrary budget down to a power
/// of two costs at most a constant factor in the overhead, and keeps every
/// probability comparison in the test suite exact integer arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct EpsilonExp {
    e: u32,
}

impl EpsilonExp {
    pub fn new(e: u32) -> Result<Self> {
        if e == 0 {
            return Err(Error::Domain("epsilon exponent must be >= 1".into()));
        }
        if e > 60 {
            return Err(Error::Domain(format!("epsilon exponent {e} too large")));
        }
        Ok(Self { e })
    }

    pub fn exponent(&self) -> u32 {
        self.e
    }

    pub fn eps(&self) -> f64 {
        (0.5f64).powi(self.e as i32)
    }

    /// `2^e` as an exact integer, handy for exact probability comparisons.
    pub fn denominator(&self) -> u128 {
        1u128 << self.e
    }

    /// Epsilon scaled down by `2^shift` (a stricter budget).
    pub fn shifted(&self, shift: u32) -> Result<Self> {
        EpsilonExp::new(self.e + shift)
    }
}

impl std::fmt::Display for EpsilonExp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "2^-{}", self.e)
    }
}
