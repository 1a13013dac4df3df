//! Counter-based pseudo-random number generation.
//!
//! Reproducibility requirements here are stricter than "same seed, same
//! sequence": Monte Carlo draws must be assignable to independent streams so
//! that serial and parallel executions produce bit-identical results, and the
//! algorithm must be simple enough to re-implement in another language from
//! its documentation. A counter-based generator gives all of that for free,
//! because every output is a pure function of `(seed, stream, counter)`.
//!
//! # Algorithm
//!
//! The generator is SplitMix64 (Steele, Lea & Flood, the `splitmix64`
//! reference sequence) evaluated in counter mode:
//!
//! ```text
//! mix(z): z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
//!         z ^= z >> 27; z *= 0x94D049BB133111EB;
//!         z ^= z >> 31; return z            (all ops on u64, wrapping)
//!
//! base(seed, stream) = mix(seed ^ mix(stream + 0x9E3779B97F4A7C15))
//! output_k           = mix(base + (k + 1) * 0x9E3779B97F4A7C15)
//! ```
//!
//! `output_k` for any `k` can be computed without generating the preceding
//! values, which is what makes deterministic stream partitioning trivial.
//!
//! Floating-point conversion takes the top 53 bits: `u = (x >> 11) * 2^-53`,
//! uniform on `[0, 1)`. Gaussian variates use the Box-Muller transform on two
//! consecutive uniforms (the sine partner is discarded, keeping each variate
//! a pure function of its counter pair).

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seedable, splittable counter-based generator (SplitMix64 in counter mode).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRng {
    base: u64,
    counter: u64,
}

impl CounterRng {
    /// Generator for `(seed, stream)`. Distinct streams are statistically
    /// independent sequences; stream 0 is fine.
    pub fn new(seed: u64, stream: u64) -> Self {
        Self {
            base: mix(seed ^ mix(stream.wrapping_add(GOLDEN))),
            counter: 0,
        }
    }

    /// Derive the generator for a sub-stream, leaving `self` untouched.
    pub fn substream(&self, stream: u64) -> Self {
        Self {
            base: mix(self.base ^ mix(stream.wrapping_add(GOLDEN))),
            counter: 0,
        }
    }

    /// The `k`-th raw output of this stream, independent of cursor state.
    #[inline]
    pub fn at(&self, k: u64) -> u64 {
        mix(self.base.wrapping_add(k.wrapping_add(1).wrapping_mul(GOLDEN)))
    }

    /// Next raw 64-bit output.
    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let v = self.at(self.counter);
        self.counter += 1;
        v
    }

    /// Uniform on `[0, 1)` with 53-bit resolution.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        (self.next_u64() >> 11) as f64 * SCALE
    }

    /// Uniform on `(0, 1]`; safe as a logarithm argument.
    #[inline]
    pub fn next_f64_open(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        ((self.next_u64() >> 11) + 1) as f64 * SCALE
    }

    /// Standard normal variate via Box-Muller (consumes two uniforms).
    pub fn next_gaussian(&mut self) -> f64 {
        let u1 = self.next_f64_open();
        let u2 = self.next_f64();
        crate::fm::sqrt(-2.0 * crate::fm::ln(u1)) * crate::fm::cos(2.0 * core::f64::consts::PI * u2)
    }

    /// Uniform on `[-sqrt(3), sqrt(3))`: zero mean, unit variance.
    pub fn next_unit_variance_uniform(&mut self) -> f64 {
        const SQRT3: f64 = 1.732_050_807_568_877_2;
        (2.0 * self.next_f64() - 1.0) * SQRT3
    }

    /// Uniform integer in `[0, n)` by 128-bit multiply (Lemire reduction,
    /// without rejection; bias is < 2^-64 * n, negligible for table sizes).
    pub fn next_index(&mut self, n: usize) -> usize {
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counter_access_matches_sequential() {
        let mut rng = CounterRng::new(42, 7);
        let probe = rng;
        let seq: alloc::vec::Vec<u64> = (0..32).map(|_| rng.next_u64()).collect();
        for (k, v) in seq.iter().enumerate() {
            assert_eq!(probe.at(k as u64), *v);
        }
    }

    #[test]
    fn same_seed_same_sequence() {
        let mut a = CounterRng::new(1234, 0);
        let mut b = CounterRng::new(1234, 0);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn distinct_streams_differ() {
        let mut a = CounterRng::new(1234, 0);
        let mut b = CounterRng::new(1234, 1);
        let same = (0..64).filter(|_| a.next_u64() == b.next_u64()).count();
        assert!(same < 2);
    }

    #[test]
    fn uniform_range_and_moments() {
        let mut rng = CounterRng::new(9, 0);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let u = rng.next_f64();
            assert!((0.0..1.0).contains(&u));
            sum += u;
        }
        let mean = sum / n as f64;
        // std of the mean is 1/sqrt(12 n) ~ 9.1e-4; allow 5 sigma
        assert!((mean - 0.5).abs() < 5.0 * 9.2e-4, "mean {mean}");
    }

    #[test]
    fn gaussian_moments() {
        let mut rng = CounterRng::new(77, 3);
        let n = 100_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let g = rng.next_gaussian();
            s1 += g;
            s2 += g * g;
        }
        let mean = s1 / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!(mean.abs() < 5.0 / (n as f64).sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn unit_variance_uniform_moments() {
        let mut rng = CounterRng::new(5, 11);
        let n = 100_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let u = rng.next_unit_variance_uniform();
            s1 += u;
            s2 += u * u;
        }
        let mean = s1 / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }
}
