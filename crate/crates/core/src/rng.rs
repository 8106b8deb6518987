//! Counter-based randomness: every uniform used by a trial is a pure
//! function of `(seed, stream, trial, slot)`.
//!
//! The ChaCha8 keystream is addressed directly. The seed fixes the key,
//! the stream selects the ChaCha nonce, and each trial owns one 64-byte
//! block of that stream. A [`Slot`] names one 64-bit word inside the block.
//! Trials can therefore be evaluated in any order on any thread and still
//! see exactly the same numbers.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// 32-bit words in one ChaCha block.
const WORDS_PER_TRIAL: u128 = 16;

/// Named 64-bit positions inside a trial's block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Slot {
    U = 0,
    V = 1,
    Alpha = 2,
    BetaNl = 3,
    Lambda = 4,
    AliceSetting = 5,
    BobSetting = 6,
}

/// All uniforms one trial can consume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialDraws([f64; 8]);

impl TrialDraws {
    pub fn get(&self, slot: Slot) -> f64 {
        self.0[slot as usize]
    }
}

/// Random-access generator over a `(seed, stream)` keystream.
#[derive(Debug, Clone)]
pub struct CounterRng {
    inner: ChaCha8Rng,
}

impl CounterRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner }
    }

    pub fn draws(&mut self, trial: u64) -> TrialDraws {
        let pos = trial as u128 * WORDS_PER_TRIAL;
        // Seeking discards the buffered keystream; consecutive trials are
        // already in position.
        if self.inner.get_word_pos() != pos {
            self.inner.set_word_pos(pos);
        }
        let mut out = [0.0; 8];
        for v in out.iter_mut() {
            *v = unit_interval(self.inner.next_u64());
        }
        TrialDraws(out)
    }
}

/// Maps 64 random bits onto `[0, 1)` using the top 53 bits.
pub fn unit_interval(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Picks an index in `0..n` from a uniform in `[0, 1)`.
pub fn uniform_index(u: f64, n: usize) -> usize {
    ((u * n as f64) as usize).min(n - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_access_matches_sequential_order() {
        let mut rng = CounterRng::new(7, 3);
        let forward: Vec<_> = (0..64).map(|t| rng.draws(t)).collect();
        let mut rng = CounterRng::new(7, 3);
        for t in (0..64).rev() {
            assert_eq!(rng.draws(t), forward[t as usize]);
        }
    }

    #[test]
    fn streams_and_seeds_differ() {
        let a = CounterRng::new(1, 0).draws(0);
        let b = CounterRng::new(1, 1).draws(0);
        let c = CounterRng::new(2, 0).draws(0);
        assert_ne!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn draws_are_in_unit_interval() {
        let mut rng = CounterRng::new(99, 0);
        let mut mean = 0.0;
        let n = 20_000;
        for t in 0..n {
            let d = rng.draws(t);
            for s in 0..8 {
                assert!((0.0..1.0).contains(&d.0[s]));
            }
            mean += d.get(Slot::U);
        }
        mean /= n as f64;
        // σ of the mean is 1/sqrt(12n) ≈ 0.002
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn unit_interval_edges() {
        assert_eq!(unit_interval(0), 0.0);
        assert!(unit_interval(u64::MAX) < 1.0);
        assert_eq!(uniform_index(0.0, 3), 0);
        assert_eq!(uniform_index(0.999_999_999, 3), 2);
    }
}
