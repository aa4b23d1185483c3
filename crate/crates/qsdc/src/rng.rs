//! Deterministic randomness for sessions and experiments.
//!
//! Every operation that consumes randomness takes a [`RandomSource`] so that
//! a whole session is a pure function of its inputs and one seed. Production
//! code uses [`SessionRng`] (ChaCha8, platform-stable); tests that need to
//! force specific draws use [`ScriptedSource`], which replays a fixed tape of
//! index/bit values.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::VecDeque;

/// A stream of random values with the specific draw kinds the simulator uses.
///
/// `next_index` and `next_bit` are overridable so a scripted tape can pin
/// structural choices (insertion positions, check values) while leaving
/// measurement sampling to a real generator.
pub trait RandomSource {
    fn next_u64(&mut self) -> u64;

    /// Uniform integer in `[0, bound)`. `bound` must be positive.
    fn next_index(&mut self, bound: usize) -> usize {
        assert!(bound > 0, "next_index requires a positive bound");
        let b = bound as u64;
        // Rejection sampling keeps the draw exactly uniform.
        let zone = u64::MAX - (u64::MAX % b);
        loop {
            let v = self.next_u64();
            if v < zone {
                return (v % b) as usize;
            }
        }
    }

    /// Uniform bit.
    fn next_bit(&mut self) -> u8 {
        (self.next_u64() & 1) as u8
    }

    /// Uniform float in `[0, 1)` with 53 bits of precision.
    fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Bernoulli trial with success probability `p`.
    fn chance(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }
}

/// ChaCha8-backed stream. Byte-identical output on every platform.
#[derive(Debug, Clone)]
pub struct SessionRng {
    inner: ChaCha8Rng,
}

impl SessionRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent stream for trial `index` under `master_seed`.
    ///
    /// Uses the cipher's counter-mode stream id, so trial streams never
    /// overlap and can be created in any order (parallel runs included).
    pub fn for_trial(master_seed: u64, index: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(master_seed);
        inner.set_stream(index);
        Self { inner }
    }
}

impl RandomSource for SessionRng {
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }
}

/// Replays scripted index/bit draws, delegating everything else to a
/// deterministic fallback stream.
///
/// Panics if a scripted queue is exhausted or a scripted index is out of
/// range: a tape mismatch is a test bug, not a runtime condition.
#[derive(Debug, Clone)]
pub struct ScriptedSource {
    indices: VecDeque<usize>,
    bits: VecDeque<u8>,
    fallback: SessionRng,
}

impl ScriptedSource {
    pub fn new<I, B>(indices: I, bits: B, fallback_seed: u64) -> Self
    where
        I: IntoIterator<Item = usize>,
        B: IntoIterator<Item = u8>,
    {
        Self {
            indices: indices.into_iter().collect(),
            bits: bits.into_iter().collect(),
            fallback: SessionRng::new(fallback_seed),
        }
    }

    /// True when every scripted value has been consumed.
    pub fn exhausted(&self) -> bool {
        self.indices.is_empty() && self.bits.is_empty()
    }
}

impl RandomSource for ScriptedSource {
    fn next_u64(&mut self) -> u64 {
        self.fallback.next_u64()
    }

    fn next_index(&mut self, bound: usize) -> usize {
        assert!(bound > 0, "next_index requires a positive bound");
        match self.indices.pop_front() {
            Some(v) => {
                assert!(v < bound, "scripted index {v} out of range for bound {bound}");
                v
            }
            None => panic!("scripted index tape exhausted"),
        }
    }

    fn next_bit(&mut self) -> u8 {
        match self.bits.pop_front() {
            Some(b) => {
                assert!(b <= 1, "scripted bit must be 0 or 1");
                b
            }
            None => panic!("scripted bit tape exhausted"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = SessionRng::new(7);
        let mut b = SessionRng::new(7);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn trial_streams_are_independent_of_creation_order() {
        let mut early = SessionRng::for_trial(42, 3);
        let _ = SessionRng::for_trial(42, 9).next_u64();
        let mut late = SessionRng::for_trial(42, 3);
        for _ in 0..10 {
            assert_eq!(early.next_u64(), late.next_u64());
        }
    }

    #[test]
    fn next_index_is_roughly_uniform() {
        let mut rng = SessionRng::new(1);
        let mut counts = [0u32; 4];
        let n = 100_000;
        for _ in 0..n {
            counts[rng.next_index(4)] += 1;
        }
        // 3 sigma around n/4 for a multinomial cell.
        let sigma = ((n as f64) * 0.25 * 0.75).sqrt();
        for &c in &counts {
            assert!((c as f64 - n as f64 / 4.0).abs() < 3.0 * sigma, "counts {counts:?}");
        }
    }

    #[test]
    fn scripted_draws_replay_in_order() {
        let mut tape = ScriptedSource::new([2, 0, 5], [1, 0], 0);
        assert_eq!(tape.next_index(4), 2);
        assert_eq!(tape.next_index(1), 0);
        assert_eq!(tape.next_index(6), 5);
        assert_eq!(tape.next_bit(), 1);
        assert_eq!(tape.next_bit(), 0);
        assert!(tape.exhausted());
    }

    #[test]
    #[should_panic(expected = "out of range")]
    fn scripted_index_out_of_range_panics() {
        let mut tape = ScriptedSource::new([5], [], 0);
        let _ = tape.next_index(3);
    }
}
