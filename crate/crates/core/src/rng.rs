//! Counter-based random streams.
//!
//! Every draw is a pure function of `(seed, domain, prime, level, counter)`.
//! Samplers never share a sequential generator, so the value drawn for a
//! given prime and level does not depend on how many other primes were
//! processed, in which order, or on how many threads ran.

use serde::{Deserialize, Serialize};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const MIX_A: u64 = 0xBF58_476D_1CE4_E5B9;
const MIX_B: u64 = 0x94D0_49BB_1331_11EB;

/// Default seed used when callers do not supply one.
pub const DEFAULT_SEED: u64 = 0x5EED_C0DE_2024_0001;

/// Root seed of a reproducible computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Seed(pub u64);

impl Default for Seed {
    fn default() -> Self {
        Seed(DEFAULT_SEED)
    }
}

impl Seed {
    /// Child seed for an indexed sub-computation (trial, vertex, anchor...).
    pub fn child(self, tag: u64, index: u64) -> Seed {
        Seed(mix64(mix64(self.0 ^ tag.wrapping_mul(MIX_A)) ^ index.wrapping_mul(GOLDEN_GAMMA)))
    }
}

/// Domain tags separating unrelated uses of one seed.
pub mod domain {
    /// Profinite digits: level-`n` digit vectors of a Haar point.
    pub const DIGITS: u64 = 0x01;
    /// Trial seeds derived from an experiment seed.
    pub const TRIAL: u64 = 0x02;
    /// Graphon vertex seeds.
    pub const VERTEX: u64 = 0x03;
    /// Uniform lattice anchors.
    pub const ANCHOR: u64 = 0x04;
    /// Miscellaneous selections (random coordinate pairs, etc.).
    pub const SELECT: u64 = 0x05;
}

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(MIX_A);
    z = (z ^ (z >> 27)).wrapping_mul(MIX_B);
    z ^ (z >> 31)
}

/// A stream keyed by `(seed, domain, prime, level)`.
#[derive(Debug, Clone)]
pub struct Substream {
    key: u64,
    counter: u64,
}

impl Substream {
    #[inline]
    pub fn new(seed: Seed, domain: u64, prime: u64, level: u64) -> Self {
        let mut key = mix64(seed.0 ^ domain.wrapping_mul(GOLDEN_GAMMA));
        key = mix64(key ^ prime.wrapping_mul(MIX_A));
        key = mix64(key ^ level.wrapping_mul(MIX_B));
        Substream { key, counter: 0 }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key ^ self.counter.wrapping_mul(GOLDEN_GAMMA))
    }

    /// Uniform integer in `[0, n)`; exact (Lemire's method with rejection).
    #[inline]
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        let mut m = (self.next_u64() as u128) * (n as u128);
        let mut low = m as u64;
        if low < n {
            let threshold = n.wrapping_neg() % n;
            while low < threshold {
                m = (self.next_u64() as u128) * (n as u128);
                low = m as u64;
            }
        }
        (m >> 64) as u64
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    #[inline]
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// The level-`level` digit vector in `(Z/p)^d` of the Haar point keyed by `seed`.
///
/// Coordinates are drawn in order, so coordinate 0 can be inspected on its own
/// with [`digit_coordinate0`].
#[inline]
pub fn digit_vector(seed: Seed, p: u64, level: u64, out: &mut [u64]) {
    let mut s = Substream::new(seed, domain::DIGITS, p, level);
    for c in out.iter_mut() {
        *c = s.below(p);
    }
}

/// First coordinate of [`digit_vector`], without drawing the rest.
#[inline]
pub fn digit_coordinate0(seed: Seed, p: u64, level: u64) -> u64 {
    Substream::new(seed, domain::DIGITS, p, level).below(p)
}
