//! Seeded random streams.
//!
//! A stream for `(master_seed, sample_id)` is a ChaCha12 generator keyed by
//!
//! ```text
//! SHA-256( "tamperkit/rng/v1" || master_seed as 8 little-endian bytes || sample_id as UTF-8 )
//! ```
//!
//! with stream and nonce zero. Child streams are keyed by
//! `SHA-256("tamperkit/fork/v1" || parent key || label)`, so forking never
//! depends on how much of the parent has been consumed.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug)]
pub struct RngStream {
    key: [u8; 32],
    rng: ChaCha12Rng,
}

/// Derives the stream for one sample.
pub fn derive_stream(master_seed: u64, sample_id: &str) -> RngStream {
    let mut h = Sha256::new();
    h.update(b"tamperkit/rng/v1");
    h.update(master_seed.to_le_bytes());
    h.update(sample_id.as_bytes());
    RngStream::from_key(h.finalize().into())
}

impl RngStream {
    fn from_key(key: [u8; 32]) -> Self {
        Self { key, rng: ChaCha12Rng::from_seed(key) }
    }

    /// Independent child stream identified by `label`.
    pub fn fork(&self, label: &str) -> RngStream {
        let mut h = Sha256::new();
        h.update(b"tamperkit/fork/v1");
        h.update(self.key);
        h.update(label.as_bytes());
        RngStream::from_key(h.finalize().into())
    }

    /// Uniform in [0,1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in the inclusive range `[lo, hi]`.
    pub fn range_i64(&mut self, lo: i64, hi: i64) -> i64 {
        if lo >= hi {
            return lo;
        }
        self.rng.random_range(lo..=hi)
    }

    /// Uniform real in `[lo, hi]`.
    pub fn range_f64(&mut self, lo: f64, hi: f64) -> f64 {
        (lo + self.next_f64() * (hi - lo)).clamp(lo.min(hi), hi.max(lo))
    }

    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        self.range_i64(0, n as i64 - 1) as usize
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Index drawn with probability proportional to `weights`; `None` when
    /// all weights are zero.
    pub fn weighted_index(&mut self, weights: &[f64]) -> Option<usize> {
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return None;
        }
        let u = self.next_f64() * total;
        let mut acc = 0.0;
        let mut last = None;
        for (i, w) in weights.iter().enumerate() {
            if *w <= 0.0 {
                continue;
            }
            acc += w;
            last = Some(i);
            if u < acc {
                return Some(i);
            }
        }
        last
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn first10(mut s: RngStream) -> Vec<u64> {
        (0..10).map(|_| s.next_u64()).collect()
    }

    #[test]
    fn same_seed_and_id_repeat() {
        assert_eq!(first10(derive_stream(42, "s001")), first10(derive_stream(42, "s001")));
    }

    #[test]
    fn sample_id_separates_streams() {
        assert_ne!(first10(derive_stream(42, "s001")), first10(derive_stream(42, "s002")));
    }

    #[test]
    fn seed_separates_streams() {
        assert_ne!(first10(derive_stream(42, "s001")), first10(derive_stream(43, "s001")));
    }

    #[test]
    fn fork_ignores_parent_consumption() {
        let a = derive_stream(7, "x");
        let mut b = derive_stream(7, "x");
        b.next_u64();
        assert_eq!(first10(a.fork("item/0")), first10(b.fork("item/0")));
        assert_ne!(first10(a.fork("item/0")), first10(a.fork("item/1")));
    }

    #[test]
    fn known_answer_is_stable() {
        // Pins the documented derivation so re-implementations can check against it.
        let mut s = derive_stream(42, "s001");
        let v = s.next_u64();
        let again = derive_stream(42, "s001").next_u64();
        assert_eq!(v, again);
        let mut h = Sha256::new();
        h.update(b"tamperkit/rng/v1");
        h.update(42u64.to_le_bytes());
        h.update(b"s001");
        let key: [u8; 32] = h.finalize().into();
        assert_eq!(ChaCha12Rng::from_seed(key).next_u64(), v);
    }

    #[test]
    fn ranges_are_inclusive_and_bounded() {
        let mut s = derive_stream(1, "r");
        let mut seen = [false; 3];
        for _ in 0..200 {
            let v = s.range_i64(1, 3);
            seen[(v - 1) as usize] = true;
            let f = s.range_f64(0.1, 3.0);
            assert!((0.1..=3.0).contains(&f));
        }
        assert_eq!(seen, [true; 3]);
    }

    #[test]
    fn weighted_index_skips_zero_weights() {
        let mut s = derive_stream(1, "w");
        for _ in 0..100 {
            assert_eq!(s.weighted_index(&[0.0, 2.0, 0.0]), Some(1));
        }
        assert_eq!(s.weighted_index(&[0.0, 0.0]), None);
    }
}
