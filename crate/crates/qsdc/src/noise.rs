//! Device and channel noise models.
//!
//! A quantum channel of finite duration is modeled as a chain of identity
//! gates, each susceptible to error. On top of that the device contributes
//! T1 relaxation, readout flips and a calibration offset on the encoding
//! rotation. The transmission-success hypothesis `(1−p_error)^{γn}` and its
//! single-parameter curve fit live here too.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quantum::{self, PureState, QuantumError, QubitBasis, Unitary};
use crate::rng::RandomSource;

#[derive(Debug, Error, PartialEq)]
pub enum NoiseError {
    #[error("invalid device parameter: {0}")]
    InvalidParameter(String),
    #[error("curve fit needs at least two samples with distinct channel lengths")]
    DegenerateSamples,
    #[error("observed success probabilities must lie in (0, 1], got {0}")]
    InvalidObservation(f64),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
}

/// Per-device noise figures. Defaults follow a single-qubit superconducting
/// device: 0.1% identity-gate error over 142 ns, 6.7% readout error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceModel {
    /// Error probability of one identity gate.
    pub gate_error: f64,
    /// Wall-clock duration of one identity gate, nanoseconds.
    pub gate_duration_ns: f64,
    /// Relaxation time T1, microseconds.
    pub t1_us: f64,
    /// Probability that a measured bit is recorded flipped.
    pub readout_error: f64,
    /// Calibration offset δθ on the encoding rotation, degrees.
    pub calibration_offset_deg: f64,
}

impl Default for DeviceModel {
    fn default() -> Self {
        Self {
            gate_error: 0.001,
            gate_duration_ns: 142.0,
            t1_us: 100.0,
            readout_error: 0.067,
            calibration_offset_deg: 0.0,
        }
    }
}

impl DeviceModel {
    /// A device with every error source switched off.
    pub fn noiseless() -> Self {
        Self {
            gate_error: 0.0,
            gate_duration_ns: 142.0,
            t1_us: 100.0,
            readout_error: 0.0,
            calibration_offset_deg: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), NoiseError> {
        for (name, p) in [
            ("gate_error", self.gate_error),
            ("readout_error", self.readout_error),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(NoiseError::InvalidParameter(format!(
                    "{name} = {p} is not a probability"
                )));
            }
        }
        if self.gate_duration_ns <= 0.0 || self.t1_us <= 0.0 {
            return Err(NoiseError::InvalidParameter(
                "durations must be positive".into(),
            ));
        }
        if !self.calibration_offset_deg.is_finite() {
            return Err(NoiseError::InvalidParameter(
                "calibration offset must be finite".into(),
            ));
        }
        Ok(())
    }
}

/// What a single erroneous identity gate does to the qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorKind {
    /// σ_x with probability `gate_error` per gate.
    BitFlip,
    /// Stochastic |1⟩ → |0⟩ decay with per-gate survival exp(−τ/T1).
    AmplitudeDamping,
    /// A uniformly random Pauli with probability `gate_error` per gate.
    Depolarizing,
}

/// A channel of `n_gates` sequential noisy identity gates on a device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub n_gates: usize,
    pub error_kind: ErrorKind,
    pub device: DeviceModel,
}

impl ChannelModel {
    /// A pure bit-flip channel with the given per-qubit flip probability,
    /// no readout error and no calibration offset.
    pub fn bit_flip(n_gates: usize, gate_error: f64) -> Self {
        Self {
            n_gates,
            error_kind: ErrorKind::BitFlip,
            device: DeviceModel {
                gate_error,
                readout_error: 0.0,
                calibration_offset_deg: 0.0,
                ..DeviceModel::default()
            },
        }
    }

    pub fn validate(&self) -> Result<(), NoiseError> {
        self.device.validate()
    }
}

/// Send a qubit through the channel: `n_gates` independent noisy identities.
pub fn apply_channel<R: RandomSource + ?Sized>(
    q: &PureState,
    ch: &ChannelModel,
    rng: &mut R,
) -> Result<PureState, NoiseError> {
    if q.dim() != 2 {
        return Err(QuantumError::DimensionMismatch { left: 2, right: q.dim() }.into());
    }
    let mut state = q.clone();
    let x = Unitary::pauli_x();
    let decay_prob = 1.0 - t1_survival(ch.device.gate_duration_ns, ch.device.t1_us * 1000.0);
    for _ in 0..ch.n_gates {
        match ch.error_kind {
            ErrorKind::BitFlip => {
                if rng.chance(ch.device.gate_error) {
                    state = quantum::apply(&x, &state)?;
                }
            }
            ErrorKind::Depolarizing => {
                if rng.chance(ch.device.gate_error) {
                    let pauli = match rng.next_index(3) {
                        0 => Unitary::pauli_x(),
                        1 => Unitary::pauli_iy(),
                        _ => Unitary::pauli_z(),
                    };
                    state = quantum::apply(&pauli, &state)?;
                }
            }
            ErrorKind::AmplitudeDamping => {
                state = damp_step(&state, decay_prob, rng)?;
            }
        }
    }
    Ok(state)
}

/// One quantum-jump trajectory step of amplitude damping with decay
/// probability `gamma` on the |1⟩ component.
fn damp_step<R: RandomSource + ?Sized>(
    state: &PureState,
    gamma: f64,
    rng: &mut R,
) -> Result<PureState, NoiseError> {
    let a0 = state.amplitudes()[0];
    let a1 = state.amplitudes()[1];
    let p_jump = gamma * a1.norm_sqr();
    if rng.chance(p_jump) {
        return Ok(PureState::zero());
    }
    // No-jump evolution rescales the excited component by √(1−γ).
    let b1 = a1 * (1.0 - gamma).sqrt();
    let norm = (a0.norm_sqr() + b1.norm_sqr()).sqrt();
    Ok(PureState::new(vec![a0 / norm, b1 / norm])?)
}

/// Probability that |1⟩ survives for `t` nanoseconds: `exp(−t/T1)`.
pub fn t1_survival(t_ns: f64, t1_ns: f64) -> f64 {
    assert!(t_ns >= 0.0 && t1_ns > 0.0, "times must be positive");
    (-t_ns / t1_ns).exp()
}

/// The transmission-success hypothesis `(1 − p_error)^{γn}`.
pub fn predicted_success(n: f64, p_error: f64, gamma: f64) -> f64 {
    assert!((0.0..1.0).contains(&p_error), "p_error must be in [0,1)");
    (1.0 - p_error).powf(gamma * n)
}

/// Record a measured bit, flipping it with the readout error probability.
pub fn readout_flip<R: RandomSource + ?Sized>(outcome: u8, p_ro: f64, rng: &mut R) -> u8 {
    assert!((0.0..=1.0).contains(&p_ro), "p_ro must be a probability");
    if p_ro > 0.0 && rng.chance(p_ro) {
        outcome ^ 1
    } else {
        outcome
    }
}

/// The encoding rotation as actually applied by a miscalibrated device:
/// `U_(θ+δθ)`.
pub fn calibrated_rotation(theta_deg: f64, offset_deg: f64) -> Result<Unitary, NoiseError> {
    Ok(quantum::rotation_gate(theta_deg + offset_deg)?)
}

/// Least-squares fit of γ in `log(success) = γ · n · log(1 − p_error)`.
///
/// Returns the fitted γ and the RMS residual in the log domain.
pub fn fit_gamma(samples: &[(f64, f64)], p_error: f64) -> Result<(f64, f64), NoiseError> {
    if !(0.0..1.0).contains(&p_error) || p_error == 0.0 {
        return Err(NoiseError::InvalidParameter(format!(
            "p_error = {p_error} must be in (0,1) for the fit"
        )));
    }
    let distinct = {
        let mut ns: Vec<f64> = samples.iter().map(|s| s.0).collect();
        ns.sort_by(f64::total_cmp);
        ns.dedup();
        ns.len()
    };
    if samples.len() < 2 || distinct < 2 {
        return Err(NoiseError::DegenerateSamples);
    }
    let log_q = (1.0 - p_error).ln();
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &(n, obs) in samples {
        if !(obs > 0.0 && obs <= 1.0) {
            return Err(NoiseError::InvalidObservation(obs));
        }
        let x = n * log_q;
        let y = obs.ln();
        sxx += x * x;
        sxy += x * y;
    }
    let gamma = sxy / sxx;
    let mut sq_err = 0.0;
    for &(n, obs) in samples {
        let resid = obs.ln() - gamma * n * log_q;
        sq_err += resid * resid;
    }
    let rms = (sq_err / samples.len() as f64).sqrt();
    Ok((gamma, rms))
}

/// Monte Carlo samples of transmission success with success probability
/// `(1−p_error)^{γ₀ n}` at each channel length, for fit round-trip tests.
pub fn synthetic_success_sweep<R: RandomSource + ?Sized>(
    gamma0: f64,
    p_error: f64,
    lengths: &[usize],
    trials: usize,
    rng: &mut R,
) -> Vec<(f64, f64)> {
    lengths
        .iter()
        .map(|&n| {
            let p = predicted_success(n as f64, p_error, gamma0);
            let hits = (0..trials).filter(|_| rng.chance(p)).count();
            (n as f64, hits as f64 / trials as f64)
        })
        .collect()
}

/// One end-to-end transmission of a classical bit: encode with the (possibly
/// miscalibrated) rotation, cross the channel, undo the rotation, measure in
/// the computational basis and record through the readout.
pub fn transmit_bit<R: RandomSource + ?Sized>(
    bit: u8,
    theta_deg: f64,
    ch: &ChannelModel,
    rng: &mut R,
) -> Result<u8, NoiseError> {
    let prepared = if bit == 0 {
        PureState::zero()
    } else {
        PureState::one()
    };
    let encode = calibrated_rotation(theta_deg, ch.device.calibration_offset_deg)?;
    let sent = quantum::apply(&encode, &prepared)?;
    let received = apply_channel(&sent, ch, rng)?;
    let decode = quantum::rotation_gate(theta_deg)?.inverse();
    let decoded = quantum::apply(&decode, &received)?;
    let (outcome, _) = quantum::measure(&decoded, &QubitBasis::computational(), rng)?;
    Ok(readout_flip(outcome, ch.device.readout_error, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SessionRng;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_length_channel_is_identity() {
        let mut rng = SessionRng::new(1);
        let ch = ChannelModel::bit_flip(0, 1.0);
        let out = apply_channel(&PureState::plus(), &ch, &mut rng).unwrap();
        assert_eq!(out, PureState::plus());
    }

    #[test]
    fn forced_bit_flip() {
        let mut rng = SessionRng::new(2);
        let ch = ChannelModel::bit_flip(1, 1.0);
        let out = apply_channel(&PureState::zero(), &ch, &mut rng).unwrap();
        assert!(out.approx_eq_up_to_phase(&PureState::one(), 1e-12));
    }

    #[test]
    fn bit_flip_parity_statistics() {
        // After n gates of flip probability p, P(outcome still 0) is the
        // even-flip-count probability ½(1 + (1−2p)^n).
        let mut rng = SessionRng::new(3);
        let (p, n_gates, trials) = (0.001, 100, 100_000);
        let ch = ChannelModel::bit_flip(n_gates, p);
        let mut zeros = 0u32;
        for _ in 0..trials {
            let out = apply_channel(&PureState::zero(), &ch, &mut rng).unwrap();
            let (o, _) = quantum::measure(&out, &QubitBasis::computational(), &mut rng).unwrap();
            if o == 0 {
                zeros += 1;
            }
        }
        let expected = 0.5 * (1.0 + (1.0 - 2.0 * p).powi(n_gates as i32));
        let freq = zeros as f64 / trials as f64;
        assert!((freq - expected).abs() < 0.01, "freq {freq} vs {expected}");
    }

    #[test]
    fn t1_survival_closed_form() {
        assert_abs_diff_eq!(t1_survival(0.0, 1000.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t1_survival(1000.0, 1000.0), (-1.0f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn amplitude_damping_matches_exponential_law() {
        let mut rng = SessionRng::new(4);
        let device = DeviceModel {
            gate_error: 0.0,
            gate_duration_ns: 142.0,
            t1_us: 10.0,
            readout_error: 0.0,
            calibration_offset_deg: 0.0,
        };
        for n_gates in [10usize, 50, 100] {
            let ch = ChannelModel {
                n_gates,
                error_kind: ErrorKind::AmplitudeDamping,
                device,
            };
            let trials = 100_000;
            let mut survived = 0u32;
            for _ in 0..trials {
                let out = apply_channel(&PureState::one(), &ch, &mut rng).unwrap();
                let (o, _) =
                    quantum::measure(&out, &QubitBasis::computational(), &mut rng).unwrap();
                if o == 1 {
                    survived += 1;
                }
            }
            let expected = t1_survival(142.0 * n_gates as f64, 10_000.0);
            let freq = survived as f64 / trials as f64;
            let sigma = (expected * (1.0 - expected) / trials as f64).sqrt();
            assert!(
                (freq - expected).abs() < 3.0 * sigma.max(0.003),
                "n={n_gates}: freq {freq} vs {expected}"
            );
        }
    }

    #[test]
    fn predicted_success_examples() {
        assert_abs_diff_eq!(predicted_success(500.0, 0.001, 0.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            predicted_success(100.0, 0.001, 0.18),
            0.999f64.powf(18.0),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            predicted_success(100.0, 0.001, 0.21),
            0.999f64.powf(21.0),
            epsilon = 1e-12
        );
        // Spot values for the two fitted exponents.
        assert!((predicted_success(100.0, 0.001, 0.18) - 0.98215).abs() < 1e-4);
        assert!((predicted_success(100.0, 0.001, 0.21) - 0.97921).abs() < 1e-4);
    }

    #[test]
    fn predicted_success_monotone() {
        let mut prev = 1.0;
        for n in (0..=400).step_by(50) {
            let s = predicted_success(n as f64, 0.001, 0.18);
            assert!(s <= prev + 1e-15);
            prev = s;
        }
        let mut prev = 1.0;
        for g in [0.0, 0.1, 0.2, 0.5, 1.0] {
            let s = predicted_success(200.0, 0.001, g);
            assert!(s <= prev + 1e-15);
            prev = s;
        }
    }

    #[test]
    fn readout_flip_extremes_and_rate() {
        let mut rng = SessionRng::new(5);
        assert_eq!(readout_flip(1, 0.0, &mut rng), 1);
        assert_eq!(readout_flip(1, 1.0, &mut rng), 0);
        let trials = 100_000;
        let flips = (0..trials)
            .filter(|_| readout_flip(0, 0.067, &mut rng) == 1)
            .count();
        let freq = flips as f64 / trials as f64;
        assert!((freq - 0.067).abs() < 0.005, "freq {freq}");
    }

    #[test]
    fn calibration_offset_costs_cos_squared() {
        // Encode with U_(θ+δθ), decode with U_θ⁻¹: P(correct) = cos²δθ.
        for (theta, delta) in [(30.0, 5.0), (120.0, 13.0), (7.0, 90.0)] {
            let encode = calibrated_rotation(theta, delta).unwrap();
            let decode = quantum::rotation_gate(theta).unwrap().inverse();
            let s = quantum::apply(&encode, &PureState::zero()).unwrap();
            let s = quantum::apply(&decode, &s).unwrap();
            let (p0, _) = quantum::outcome_distribution(&s, &QubitBasis::computational()).unwrap();
            assert_abs_diff_eq!(p0, delta.to_radians().cos().powi(2), epsilon = 1e-12);
        }
        assert_eq!(
            calibrated_rotation(45.0, 0.0).unwrap(),
            quantum::rotation_gate(45.0).unwrap()
        );
    }

    #[test]
    fn fit_gamma_inverts_noiseless_data() {
        let p = 0.001;
        let samples: Vec<(f64, f64)> = (2..=8)
            .map(|i| {
                let n = 50.0 * i as f64;
                (n, predicted_success(n, p, 0.18))
            })
            .collect();
        let (gamma, rms) = fit_gamma(&samples, p).unwrap();
        assert_abs_diff_eq!(gamma, 0.18, epsilon = 1e-9);
        assert!(rms < 1e-12);
    }

    #[test]
    fn fit_gamma_recovers_from_noisy_observations() {
        let mut rng = SessionRng::new(6);
        let p = 0.001;
        let samples: Vec<(f64, f64)> = (2..=8)
            .map(|i| {
                let n = 50.0 * i as f64;
                let jitter = (rng.next_f64() - 0.5) * 0.01;
                (n, (predicted_success(n, p, 0.21) + jitter).clamp(1e-9, 1.0))
            })
            .collect();
        let (gamma, _) = fit_gamma(&samples, p).unwrap();
        assert!((gamma - 0.21).abs() / 0.21 < 0.05, "gamma {gamma}");
    }

    #[test]
    fn fit_gamma_rejects_degenerate_input() {
        assert!(matches!(
            fit_gamma(&[(100.0, 0.9), (100.0, 0.91)], 0.001),
            Err(NoiseError::DegenerateSamples)
        ));
        assert!(matches!(
            fit_gamma(&[(100.0, 0.9)], 0.001),
            Err(NoiseError::DegenerateSamples)
        ));
        assert!(matches!(
            fit_gamma(&[(100.0, 0.0), (200.0, 0.5)], 0.001),
            Err(NoiseError::InvalidObservation(_))
        ));
    }

    #[test]
    fn transmit_bit_is_binary_channel_under_every_kind() {
        // Whatever the channel does, the decoded Z measurement yields the
        // sent bit or its complement; over a noiseless channel it is exact.
        let mut rng = SessionRng::new(7);
        let ch = ChannelModel {
            n_gates: 0,
            error_kind: ErrorKind::BitFlip,
            device: DeviceModel::noiseless(),
        };
        for bit in [0u8, 1] {
            for theta in [7.0, 180.0, 333.0] {
                assert_eq!(transmit_bit(bit, theta, &ch, &mut rng).unwrap(), bit);
            }
        }
        for kind in [
            ErrorKind::BitFlip,
            ErrorKind::AmplitudeDamping,
            ErrorKind::Depolarizing,
        ] {
            let ch = ChannelModel {
                n_gates: 20,
                error_kind: kind,
                device: DeviceModel::default(),
            };
            for _ in 0..200 {
                let out = transmit_bit(1, 77.0, &ch, &mut rng).unwrap();
                assert!(out == 0 || out == 1);
            }
        }
    }
}
