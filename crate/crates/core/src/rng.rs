//! Counter-based random streams.
//!
//! Every random draw in the crate is addressed by `(seed, tag, counter)` and
//! computed by a stateless mixing function, so results never depend on the
//! order in which work items are scheduled. The mixer is the SplitMix64
//! finalizer (Steele, Lea & Flood 2014) applied in a short chain:
//!
//! ```text
//! h0 = mix(seed ^ GOLDEN)
//! h1 = mix(h0 ^ tag.wrapping_mul(GOLDEN))
//! out = mix(h1 ^ counter.wrapping_mul(K2))
//! ```
//!
//! Samplers that need more than one uniform per site (Poisson) seed a
//! ChaCha8 generator from the addressed word instead.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const K2: u64 = 0xD1B5_4A32_D192_ED03;

/// Stage tags keep streams of different pipeline stages disjoint.
pub mod tag {
    pub const CIRCUIT_SEED: u64 = 1;
    pub const CIRCUIT_PROPAGATE: u64 = 2;
    pub const BERNOULLI: u64 = 3;
    pub const POISSON: u64 = 4;
    pub const SAMPLE_TRUTH: u64 = 16;
    pub const SAMPLE_MEASURE: u64 = 17;
    pub const CONDITION: u64 = 18;
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stateless 64-bit word for `(seed, tag, counter)`.
#[inline]
pub fn mix(seed: u64, tag: u64, counter: u64) -> u64 {
    let h0 = splitmix64(seed ^ GOLDEN);
    let h1 = splitmix64(h0 ^ tag.wrapping_mul(GOLDEN));
    splitmix64(h1 ^ counter.wrapping_mul(K2))
}

/// Uniform in [0, 1) with 53 bits of precision.
#[inline]
pub fn uniform(seed: u64, tag: u64, counter: u64) -> f64 {
    (mix(seed, tag, counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Bernoulli(p) draw; `p = 0` never fires and `p = 1` always fires.
#[inline]
pub fn bernoulli(seed: u64, tag: u64, counter: u64, p: f64) -> bool {
    uniform(seed, tag, counter) < p
}

/// A full-strength generator for site `counter` of stream `(seed, tag)`.
pub fn substream(seed: u64, tag: u64, counter: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, tag, counter))
}

/// Seed for one stage of one sample, derived from the run's master seed.
pub fn derive_seed(master: u64, sample_id: u64, stage: u64) -> u64 {
    mix(master, stage, sample_id)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_values() {
        // First outputs of the reference SplitMix64 generator seeded with 0,
        // i.e. splitmix64(k * GOLDEN) for k = 1, 2.
        assert_eq!(splitmix64(GOLDEN), 0xE220_A839_7B1D_CDAF);
        assert_eq!(splitmix64(GOLDEN.wrapping_mul(2)), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn streams_are_addressed_not_sequenced() {
        let a: Vec<u64> = (0..100).map(|i| mix(7, 3, i)).collect();
        let b: Vec<u64> = (0..100).rev().map(|i| mix(7, 3, i)).collect();
        let b: Vec<u64> = b.into_iter().rev().collect();
        assert_eq!(a, b);
        assert_ne!(mix(7, 3, 0), mix(7, 4, 0));
        assert_ne!(mix(7, 3, 0), mix(8, 3, 0));
    }

    #[test]
    fn uniform_mean_is_half() {
        let n = 200_000u64;
        let mean = (0..n).map(|i| uniform(42, 1, i)).sum::<f64>() / n as f64;
        let se = (1.0f64 / 12.0).sqrt() / (n as f64).sqrt();
        assert!((mean - 0.5).abs() < 4.0 * se, "mean {mean}");
    }

    #[test]
    fn bernoulli_edges() {
        assert!((0..1000).all(|i| !bernoulli(1, 1, i, 0.0)));
        assert!((0..1000).all(|i| bernoulli(1, 1, i, 1.0)));
    }
}
