//! Repetition coding over classically-known basis-state preparations.
//!
//! The transmitted payload is always a known |0⟩/|1⟩ preparation, so copying
//! it does not run into no-cloning, and the channel's net effect on a decoded
//! bit is a plain flip. A distance-d repetition code with majority voting
//! therefore corrects up to ⌊d/2⌋ flips per logical bit.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quantum::PureState;

#[derive(Debug, Error, PartialEq)]
pub enum EccError {
    #[error("repetition distance must be odd and positive, got {0}")]
    InvalidDistance(usize),
    #[error("expected {expected} outcomes, got {actual}")]
    WrongOutcomeCount { expected: String, actual: usize },
}

/// A distance-d repetition code. `interleave` chooses the physical ordering
/// of copies in an assembled sequence: contiguous blocks per logical qubit
/// (default) or full sequence copies back to back. Under i.i.d. noise the two
/// are statistically identical.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepetitionCode {
    pub distance: usize,
    #[serde(default)]
    pub interleave: bool,
}

impl RepetitionCode {
    pub fn new(distance: usize) -> Result<Self, EccError> {
        if distance == 0 || distance % 2 == 0 {
            return Err(EccError::InvalidDistance(distance));
        }
        Ok(Self {
            distance,
            interleave: false,
        })
    }

    pub fn with_interleave(mut self, interleave: bool) -> Self {
        self.interleave = interleave;
        self
    }
}

/// `d` identical copies of the basis-state preparation for `bit`.
pub fn encode_repetition(bit: u8, d: usize) -> Result<Vec<PureState>, EccError> {
    if d == 0 || d % 2 == 0 {
        return Err(EccError::InvalidDistance(d));
    }
    let state = if bit == 0 {
        PureState::zero()
    } else {
        PureState::one()
    };
    Ok(vec![state; d])
}

/// Majority vote over an odd number of measured bits.
pub fn decode_majority(outcomes: &[u8]) -> Result<u8, EccError> {
    if outcomes.is_empty() || outcomes.len() % 2 == 0 {
        return Err(EccError::WrongOutcomeCount {
            expected: "an odd, positive count".into(),
            actual: outcomes.len(),
        });
    }
    let ones = outcomes.iter().filter(|&&b| b == 1).count();
    Ok(u8::from(ones > outcomes.len() / 2))
}

/// Probability that majority voting fails: `Σ_{j≥⌈d/2⌉} C(d,j) p^j (1−p)^{d−j}`.
/// For d = 3 this is `3p² − 2p³`.
pub fn logical_error_rate(d: usize, p: f64) -> f64 {
    assert!(d % 2 == 1, "distance must be odd");
    assert!((0.0..=1.0).contains(&p), "p must be a probability");
    let half = d / 2 + 1;
    (half..=d)
        .map(|j| binomial(d, j) * p.powi(j as i32) * (1.0 - p).powi((d - j) as i32))
        .sum()
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Whether distance-3 repetition is worthwhile at physical flip probability
/// `p` by the two-error-dominance criterion `C(3,2)·p² < p`, which flips
/// exactly at p = 1/3.
///
/// This is the upper-bound criterion, not the exact polynomial: the exact
/// logical rate `3p² − 2p³` stays below `p` all the way to p = 1/2, so the
/// check is conservative on (1/3, 1/2).
pub fn threshold_check(p: f64) -> bool {
    3.0 * p * p < p
}

/// Largest channel length `n` whose predicted transmission success
/// `(1−p_error)^{γn}` still meets `success_threshold`.
pub fn max_channel_length(gamma: f64, p_error: f64, success_threshold: f64) -> u64 {
    assert!(gamma > 0.0, "gamma must be positive");
    assert!(p_error > 0.0 && p_error < 1.0, "p_error must be in (0,1)");
    assert!(
        success_threshold > 0.0 && success_threshold <= 1.0,
        "threshold must be in (0,1]"
    );
    let n = success_threshold.ln() / (gamma * (1.0 - p_error).ln());
    n.floor() as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn encode_produces_identical_copies() {
        let copies = encode_repetition(0, 3).unwrap();
        assert_eq!(copies, vec![PureState::zero(); 3]);
        assert_eq!(encode_repetition(1, 1).unwrap(), vec![PureState::one()]);
        assert_eq!(encode_repetition(1, 5).unwrap().len(), 5);
        assert!(encode_repetition(0, 4).is_err());
    }

    #[test]
    fn majority_votes() {
        assert_eq!(decode_majority(&[0, 0, 1]).unwrap(), 0);
        assert_eq!(decode_majority(&[1, 0, 1]).unwrap(), 1);
        assert!(decode_majority(&[1, 0]).is_err());
        assert!(decode_majority(&[]).is_err());
    }

    #[test]
    fn majority_matches_hamming_weight_for_all_patterns() {
        for pattern in 0u8..8 {
            let bits = [pattern & 1, (pattern >> 1) & 1, (pattern >> 2) & 1];
            let weight: u8 = bits.iter().sum();
            assert_eq!(decode_majority(&bits).unwrap(), u8::from(weight >= 2));
        }
    }

    #[test]
    fn corrects_all_light_flip_patterns() {
        // Fewer than ⌈d/2⌉ flips always decode back to the sent bit.
        for &d in &[1usize, 3, 5] {
            for bit in 0..2u8 {
                for mask in 0u32..(1 << d) {
                    let flips = mask.count_ones() as usize;
                    if flips >= d / 2 + 1 {
                        continue;
                    }
                    let outcomes: Vec<u8> = (0..d)
                        .map(|i| bit ^ ((mask >> i) & 1) as u8)
                        .collect();
                    assert_eq!(decode_majority(&outcomes).unwrap(), bit);
                }
            }
        }
    }

    #[test]
    fn logical_error_rate_closed_forms() {
        assert_abs_diff_eq!(logical_error_rate(3, 0.0), 0.0, epsilon = 1e-15);
        // At the threshold boundary: 3(1/9)(2/3) + 1/27 = 7/27.
        assert_abs_diff_eq!(logical_error_rate(3, 1.0 / 3.0), 7.0 / 27.0, epsilon = 1e-12);
        assert_abs_diff_eq!(logical_error_rate(3, 0.1), 0.028, epsilon = 1e-12);
        // d = 3 polynomial identity.
        for p in [0.05, 0.2, 0.5, 0.9] {
            assert_abs_diff_eq!(
                logical_error_rate(3, p),
                3.0 * p * p - 2.0 * p * p * p,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn threshold_check_flips_at_one_third() {
        assert!(threshold_check(0.2));
        assert!(!threshold_check(0.4));
        // Equivalence of the polynomial and the closed-form threshold.
        for i in 1..100 {
            let p = i as f64 / 100.0;
            assert_eq!(threshold_check(p), p < 1.0 / 3.0, "p = {p}");
        }
    }

    #[test]
    fn logical_rate_monotone_in_p_and_distance() {
        for &d in &[1usize, 3, 5, 7] {
            let mut prev = 0.0;
            for i in 0..=50 {
                let p = i as f64 / 100.0;
                let rate = logical_error_rate(d, p);
                assert!(rate + 1e-12 >= prev, "d={d} p={p}");
                prev = rate;
            }
        }
        for i in 1..50 {
            let p = i as f64 / 100.0;
            let mut prev = f64::INFINITY;
            for &d in &[1usize, 3, 5, 7] {
                let rate = logical_error_rate(d, p);
                assert!(rate <= prev + 1e-12, "d={d} p={p}");
                prev = rate;
            }
        }
    }

    #[test]
    fn max_channel_length_examples() {
        assert_eq!(max_channel_length(0.18, 0.001, 1.0), 0);
        assert_eq!(max_channel_length(1.19, 0.001, 2.0 / 3.0), 340);
        assert_eq!(max_channel_length(0.18, 0.001, 2.0 / 3.0), 2251);
    }
}
