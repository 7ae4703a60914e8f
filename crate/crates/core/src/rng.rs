//! Counter-based randomness.
//!
//! Every random quantity in the library is a pure function of a 64-bit key.
//! Keys are derived by folding identifiers (master seed, replicate index,
//! point key, ...) through the splitmix64 finalizer, so results never depend
//! on the order in which work is scheduled.

use rand::RngCore;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// The splitmix64 output function.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `value` into `key`; not commutative.
#[inline]
pub fn combine(key: u64, value: u64) -> u64 {
    mix64(key.wrapping_add(GOLDEN).wrapping_add(mix64(value ^ 0x2545_F491_4F6C_DD1D)))
}

/// Seed of replicate `index` under a master seed.
pub fn replicate_seed(master: u64, index: u64) -> u64 {
    combine(combine(master, 0x5245_504C), index)
}

/// Seed of replicate `index` inside experiment cell `cell`.
pub fn cell_replicate_seed(master: u64, cell: u64, index: u64) -> u64 {
    replicate_seed(combine(master, cell), index)
}

/// Uniform double in the open interval (0, 1).
#[inline]
pub fn unit_open(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// Uniform double in [0, 1).
#[inline]
pub fn unit_closed_open(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform (0,1) attached to an unordered pair of keys.
#[inline]
pub fn pair_uniform(seed: u64, a: u64, b: u64) -> f64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    unit_open(combine(combine(seed, lo), hi))
}

/// A stream generator whose `i`-th output is `mix64(key + i * golden)`.
///
/// Implements [`RngCore`] so that `rand_distr` samplers can draw from it.
#[derive(Clone, Debug)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(key: u64) -> Self {
        CounterRng {
            key: mix64(key ^ 0x6A09_E667_F3BC_C909),
            counter: 0,
        }
    }

    /// Stream keyed by two values.
    pub fn keyed(seed: u64, id: u64) -> Self {
        CounterRng::new(combine(seed, id))
    }

    #[inline]
    pub fn open01(&mut self) -> f64 {
        unit_open(self.next_u64())
    }

    #[inline]
    pub fn unit(&mut self) -> f64 {
        unit_closed_open(self.next_u64())
    }
}

impl RngCore for CounterRng {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let v = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&v[..chunk.len()]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn replicate_seeds_distinct() {
        let seeds: HashSet<u64> = (0..100_000).map(|i| replicate_seed(42, i)).collect();
        assert_eq!(seeds.len(), 100_000);
    }

    #[test]
    fn pair_uniform_symmetric() {
        for a in 0..50u64 {
            for b in 0..50u64 {
                assert_eq!(pair_uniform(7, a, b), pair_uniform(7, b, a));
            }
        }
    }

    #[test]
    fn unit_open_bounds() {
        assert!(unit_open(0) > 0.0);
        assert!(unit_open(u64::MAX) < 1.0);
        assert!(unit_closed_open(u64::MAX) < 1.0);
    }

    #[test]
    fn stream_mean() {
        let mut rng = CounterRng::new(1);
        let n = 200_000;
        let mean: f64 = (0..n).map(|_| rng.open01()).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.005);
    }
}
