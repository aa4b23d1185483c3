//! Eavesdropper strategies and their analytic detection bounds.
//!
//! Channel attacks transform the flying sequence between Alice and Bob;
//! impersonation attacks replace one party's behavior inside the session
//! runner. Each attack comes with its closed-form detection probability and,
//! where the closed form is an average over decoy states, an independent
//! brute-force calculator that chains the Born rule instead.

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::{
    bb84_state, random_bb84_state, BasisKind, BitString, DecoySpec, FlyingQubit, PartyIdentities,
    ProtocolConfig, SessionOutcome, SessionSetup,
};
use crate::quantum::{
    self, PureState, QuantumError, QubitBasis, Subsystem, Unitary,
};
use crate::rng::RandomSource;

#[derive(Debug, Error, PartialEq)]
pub enum AttackError {
    #[error("fidelity {0} is outside [0, 1]")]
    InvalidFidelity(f64),
    #[error("DoS weights must satisfy Σw² = 1, got Σw² = {0}")]
    InvalidWeights(f64),
    #[error("intercept angle {0} is outside {{1,…,360}}")]
    InvalidAngle(u16),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
}

impl From<AttackError> for crate::protocol::ProtocolError {
    fn from(e: AttackError) -> Self {
        crate::protocol::ProtocolError::Attack(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, AttackError>;

/// One adversary strategy with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum AttackModel {
    None,
    ImpersonateAlice,
    ImpersonateBob,
    /// Measure every flying qubit in the basis rotated by θ₀ and resend the
    /// collapsed state. `None` draws θ₀ uniformly per session.
    InterceptResend { theta0: Option<u16> },
    /// Entangle a 4-dim ancilla with every flying qubit; `fidelity` is the
    /// probability that Bob still gets a computational-basis bit right.
    EntangleMeasure { fidelity: f64 },
    /// Corrupt (don't read) the message: with probability ½ per qubit apply
    /// a unitary with Pauli decomposition weights `w`.
    Dos { weights: [f64; 4] },
    /// Keep the whole sequence and forward freshly fabricated qubits.
    Mitm,
}

impl AttackModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            AttackModel::EntangleMeasure { fidelity } => {
                if !(0.0..=1.0).contains(fidelity) {
                    return Err(AttackError::InvalidFidelity(*fidelity));
                }
            }
            AttackModel::Dos { weights } => {
                let norm: f64 = weights.iter().map(|w| w * w).sum();
                if (norm - 1.0).abs() > 1e-10 {
                    return Err(AttackError::InvalidWeights(norm));
                }
            }
            AttackModel::InterceptResend { theta0: Some(t) } => {
                if *t == 0 || *t > 360 {
                    return Err(AttackError::InvalidAngle(*t));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Everything the adversary retains from a session.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EveRecord {
    /// (position, outcome) of every qubit Eve measured in flight.
    pub measured_outcomes: Vec<(usize, u8)>,
    /// Post-measurement ancilla per position (entangle-and-measure only).
    pub ancilla_states: Vec<(usize, PureState)>,
    /// Eve's reconstruction of the masked identity (Bob impersonation).
    pub guessed_id_b1: Option<BitString>,
    /// Eve's decoded message, if she got that far.
    pub guessed_message: Option<BitString>,
    /// The genuine sequence Eve kept for herself (man-in-the-middle).
    pub captured_sequence: Option<Vec<PureState>>,
}

// ---------------------------------------------------------------------------
// Channel attacks
// ---------------------------------------------------------------------------

/// Transform the in-flight sequence according to the attack. Impersonation
/// models pass through untouched: they act at the endpoints, not on the
/// channel.
pub fn apply_channel_attack<R: RandomSource + ?Sized>(
    attack: &AttackModel,
    states: Vec<PureState>,
    rng: &mut R,
) -> Result<(Vec<FlyingQubit>, EveRecord)> {
    match attack {
        AttackModel::None | AttackModel::ImpersonateAlice | AttackModel::ImpersonateBob => Ok((
            states.into_iter().map(FlyingQubit::Single).collect(),
            EveRecord::default(),
        )),
        AttackModel::InterceptResend { theta0 } => {
            let t0 = match theta0 {
                Some(t) => *t,
                None => (rng.next_index(360) + 1) as u16,
            };
            let (resent, record) = intercept_resend(&states, t0, rng)?;
            Ok((resent.into_iter().map(FlyingQubit::Single).collect(), record))
        }
        AttackModel::EntangleMeasure { fidelity } => {
            let mut flying = Vec::with_capacity(states.len());
            for s in &states {
                flying.push(FlyingQubit::Entangled(entangle_attach(s, *fidelity)?));
            }
            Ok((flying, EveRecord::default()))
        }
        AttackModel::Dos { weights } => {
            let corrupted = dos_apply(&states, weights, rng)?;
            Ok((
                corrupted.into_iter().map(FlyingQubit::Single).collect(),
                EveRecord::default(),
            ))
        }
        AttackModel::Mitm => {
            let fabricated = mitm_replace(states.len(), rng);
            let record = EveRecord {
                captured_sequence: Some(states),
                ..EveRecord::default()
            };
            Ok((
                fabricated.into_iter().map(FlyingQubit::Single).collect(),
                record,
            ))
        }
    }
}

/// Measure every qubit in the θ₀-rotated basis and forward the collapsed
/// basis states, logging the outcomes.
pub fn intercept_resend<R: RandomSource + ?Sized>(
    sequence: &[PureState],
    theta0: u16,
    rng: &mut R,
) -> Result<(Vec<PureState>, EveRecord)> {
    if theta0 == 0 || theta0 > 360 {
        return Err(AttackError::InvalidAngle(theta0));
    }
    let basis = QubitBasis::from_degrees(theta0 as f64)?;
    let mut record = EveRecord::default();
    let mut resent = Vec::with_capacity(sequence.len());
    for (pos, q) in sequence.iter().enumerate() {
        let (outcome, collapsed) = quantum::measure(q, &basis, rng)?;
        record.measured_outcomes.push((pos, outcome));
        resent.push(collapsed);
    }
    Ok((resent, record))
}

/// With probability ½ per qubit, corrupt it with the Pauli mixture selected
/// by the squared weights.
///
/// A real linear combination `w₁I + w₂σ_x + iw₃σ_y + w₄σ_z` with Σw² = 1 is
/// not unitary in general (w = (½,½,½,½) gives a singular matrix), so the
/// attack is realized as the statistical mixture that the per-qubit pass
/// probabilities `p' = Σ p_i w_i²` describe.
pub fn dos_apply<R: RandomSource + ?Sized>(
    sequence: &[PureState],
    weights: &[f64; 4],
    rng: &mut R,
) -> Result<Vec<PureState>> {
    let norm: f64 = weights.iter().map(|w| w * w).sum();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(AttackError::InvalidWeights(norm));
    }
    sequence
        .iter()
        .map(|q| {
            if !rng.chance(0.5) {
                return Ok(q.clone());
            }
            match sample_pauli_index(weights, rng) {
                0 => Ok(q.clone()),
                1 => Ok(quantum::apply(&Unitary::pauli_x(), q)?),
                2 => Ok(quantum::apply(&Unitary::pauli_iy(), q)?),
                _ => Ok(quantum::apply(&Unitary::pauli_z(), q)?),
            }
        })
        .collect()
}

fn sample_pauli_index<R: RandomSource + ?Sized>(weights: &[f64; 4], rng: &mut R) -> usize {
    let u = rng.next_f64();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w * w;
        if u < acc {
            return i;
        }
    }
    3
}

/// Replace every position with a fresh uniform draw from the four public
/// states.
pub fn mitm_replace<R: RandomSource + ?Sized>(len: usize, rng: &mut R) -> Vec<PureState> {
    (0..len).map(|_| random_bb84_state(rng)).collect()
}

// ---------------------------------------------------------------------------
// Entangle-and-measure
// ---------------------------------------------------------------------------

/// The entangling interaction on qubit ⊗ ancilla, parameterized by the
/// fidelity F Bob retains on computational-basis inputs:
///
/// ```text
/// U_e |0⟩|χ⟩ = √F |0⟩|χ₀₀⟩ + √(1−F) |1⟩|χ₀₁⟩
/// U_e |1⟩|χ⟩ = √(1−F) |0⟩|χ₁₀⟩ + √F |1⟩|χ₁₁⟩
/// ```
///
/// with |χ⟩ = e₀ and the χ's fixed to coordinate vectors. The remaining
/// columns complete the map to a full unitary for every F in [0, 1]; they
/// never act on protocol states, which always start in |χ⟩ = e₀.
pub fn entangling_unitary(fidelity: f64) -> Result<Unitary> {
    if !(0.0..=1.0).contains(&fidelity) {
        return Err(AttackError::InvalidFidelity(fidelity));
    }
    let sf = fidelity.sqrt();
    let sd = (1.0 - fidelity).sqrt();
    let c = num_complex::Complex64::new;
    let mut entries = vec![c(0.0, 0.0); 64];
    let mut set = |row: usize, col: usize, v: f64| entries[row * 8 + col] = c(v, 0.0);
    // Column = input |q, e_a⟩ at index 4q + a; rows likewise.
    set(0, 0, sf); // |0,e0⟩ → √F|0,e0⟩ + √D|1,e1⟩
    set(5, 0, sd);
    set(0, 1, sd); // orthogonal completion of the first block
    set(5, 1, -sf);
    set(1, 2, 1.0);
    set(3, 3, 1.0);
    set(2, 4, sd); // |1,e0⟩ → √D|0,e2⟩ + √F|1,e3⟩
    set(7, 4, sf);
    set(2, 5, sf);
    set(7, 5, -sd);
    set(4, 6, 1.0);
    set(6, 7, 1.0);
    Ok(Unitary::new(8, entries)?)
}

/// Attach Eve's ancilla to a flying qubit: `U_e (|q⟩ ⊗ e₀)`.
pub fn entangle_attach(qubit: &PureState, fidelity: f64) -> Result<PureState> {
    let u = entangling_unitary(fidelity)?;
    let joint = quantum::tensor(qubit, &PureState::basis_vector(4, 0)?)?;
    Ok(quantum::apply(&u, &joint)?)
}

/// Trace distance between Eve's reduced ancilla states for the two message
/// encodings |x⟩ = U_θ|0⟩ and |y⟩ = U_θ|1⟩. Reported as an analysis figure;
/// θ is unknown and uniform from Eve's point of view, so a nonzero value at
/// fixed θ does not by itself leak message bits.
pub fn eve_message_distinguishability(theta: u16, fidelity: f64) -> Result<f64> {
    let gate = quantum::rotation_gate(theta as f64)?;
    let x = quantum::apply(&gate, &PureState::zero())?;
    let y = quantum::apply(&gate, &PureState::one())?;
    let rho_x = quantum::reduced_density(&entangle_attach(&x, fidelity)?, Subsystem::Ancilla)?;
    let rho_y = quantum::reduced_density(&entangle_attach(&y, fidelity)?, Subsystem::Ancilla)?;
    Ok(quantum::trace_distance(&rho_x, &rho_y)?)
}

// ---------------------------------------------------------------------------
// Closed forms and brute-force counterparts
// ---------------------------------------------------------------------------

const DECOY_SPECS: [DecoySpec; 4] = [
    DecoySpec { basis: BasisKind::Z, bit: 0 },
    DecoySpec { basis: BasisKind::Z, bit: 1 },
    DecoySpec { basis: BasisKind::X, bit: 0 },
    DecoySpec { basis: BasisKind::X, bit: 1 },
];

/// Probability that one decoy survives an intercept-and-resend in the
/// θ₀ basis, computed by chaining the Born rule through Eve's measurement
/// and Bob's. Equals 3/4 for every θ₀.
pub fn intercept_decoy_survival(theta0_deg: f64) -> f64 {
    let eve_basis = QubitBasis::from_degrees(theta0_deg).expect("finite angle");
    let (e0, e1) = eve_basis.vectors();
    DECOY_SPECS
        .iter()
        .map(|spec| {
            let prepared = bb84_state(spec.basis, spec.bit);
            let bob_basis = spec.basis.qubit_basis();
            let (p_e0, p_e1) =
                quantum::outcome_distribution(&prepared, &eve_basis).expect("qubit");
            [(p_e0, &e0), (p_e1, &e1)]
                .iter()
                .map(|(p_eve, resent)| {
                    let dist = quantum::outcome_distribution(resent, &bob_basis).expect("qubit");
                    let p_bob = if spec.bit == 0 { dist.0 } else { dist.1 };
                    p_eve * p_bob
                })
                .sum::<f64>()
        })
        .sum::<f64>()
        / 4.0
}

/// `1 − (3/4)^m`: probability the security check catches an
/// intercept-and-resend with m decoys.
pub fn detection_prob_intercept(m: usize) -> f64 {
    1.0 - 0.75f64.powi(m as i32)
}

/// Per-decoy pass probability under entangle-and-measure: `(F + ½)/2`.
pub fn entangle_decoy_pass_prob(fidelity: f64) -> f64 {
    (fidelity + 0.5) / 2.0
}

/// Same quantity, brute-forced by projecting the entangled joint states.
pub fn entangle_decoy_pass_analytic(fidelity: f64) -> Result<f64> {
    let mut total = 0.0;
    for spec in DECOY_SPECS {
        let joint = entangle_attach(&bb84_state(spec.basis, spec.bit), fidelity)?;
        let (p0, p1) = quantum::partial_outcome_probs(&joint, &spec.basis.qubit_basis())?;
        total += if spec.bit == 0 { p0 } else { p1 };
    }
    Ok(total / 4.0)
}

/// `1 − ((F+½)/2)^m`: security-check detection of entangle-and-measure.
pub fn entangle_detection_prob(fidelity: f64, m: usize) -> f64 {
    1.0 - entangle_decoy_pass_prob(fidelity).powi(m as i32)
}

/// Per-decoy pass probability under the DoS attack:
/// `p'' = (1 + p')/2` with `p' = w₁² + (w₂² + w₄²)/2`.
pub fn dos_decoy_pass_prob(weights: &[f64; 4]) -> f64 {
    let p_prime = weights[0] * weights[0]
        + 0.5 * weights[1] * weights[1]
        + 0.5 * weights[3] * weights[3];
    (1.0 + p_prime) / 2.0
}

/// Same quantity, brute-forced over the four decoy states and four Paulis.
pub fn dos_decoy_pass_analytic(weights: &[f64; 4]) -> Result<f64> {
    let paulis = [
        Unitary::identity(2),
        Unitary::pauli_x(),
        Unitary::pauli_iy(),
        Unitary::pauli_z(),
    ];
    let mut total = 0.0;
    for spec in DECOY_SPECS {
        let prepared = bb84_state(spec.basis, spec.bit);
        let mut p_u = 0.0;
        for (w, pauli) in weights.iter().zip(&paulis) {
            let corrupted = quantum::apply(pauli, &prepared)?;
            let dist = quantum::outcome_distribution(&corrupted, &spec.basis.qubit_basis())?;
            let p_keep = if spec.bit == 0 { dist.0 } else { dist.1 };
            p_u += w * w * p_keep;
        }
        total += 0.5 + 0.5 * p_u;
    }
    Ok(total / 4.0)
}

/// `1 − p''^m`: security-check detection of the DoS attack.
pub fn dos_detection_prob(weights: &[f64; 4], m: usize) -> f64 {
    1.0 - dos_decoy_pass_prob(weights).powi(m as i32)
}

/// Per-decoy pass probability under man-in-the-middle, brute-forced over
/// Eve's four fabrications. Equals ½.
pub fn mitm_decoy_pass_analytic() -> f64 {
    let mut total = 0.0;
    for spec in DECOY_SPECS {
        let bob_basis = spec.basis.qubit_basis();
        for fab in DECOY_SPECS {
            let dist = quantum::outcome_distribution(&bb84_state(fab.basis, fab.bit), &bob_basis)
                .expect("qubit");
            total += 0.25 * if spec.bit == 0 { dist.0 } else { dist.1 };
        }
    }
    total / 4.0
}

/// `1 − 2^{−m}`: security-check detection of man-in-the-middle.
pub fn mitm_detection_prob(m: usize) -> f64 {
    1.0 - 0.5f64.powi(m as i32)
}

/// `1 − (1/2)^{k/2}`: Bob's detection of an Alice impersonator.
pub fn impersonate_alice_detection_prob(k: usize) -> f64 {
    1.0 - 0.5f64.powi((k / 2) as i32)
}

/// `(1/2)^k`: Alice's acceptance of a Bob impersonator's random r.
pub fn impersonate_bob_acceptance_prob(k: usize) -> f64 {
    0.5f64.powi(k as i32)
}

/// `(3/4)^k`: probability Eve's basis-guessing measurement reconstructs the
/// whole masked identity.
pub fn id_b1_guess_prob(k: usize) -> f64 {
    0.75f64.powi(k as i32)
}

fn binomial_big(l: usize, n: usize) -> BigUint {
    let mut acc = BigUint::from(1u32);
    let n = n.min(l - n);
    for i in 0..n {
        acc = acc * BigUint::from(l - i) / BigUint::from(i + 1);
    }
    acc
}

/// Eve's probability of guessing the whole message from a captured sequence:
/// `p_corr = 1/(N · C(l, n))`, plus whether the paper's negligibility bound
/// `p_corr ≤ (1/2)^n whenever l ≥ 2n·(1/2)^{⌊log₂N⌋/n}` holds at these
/// parameters. The comparison is exact (big-integer), so it stays sound when
/// the probability underflows a double.
pub fn p_corr_bound(n_angles: usize, l: usize, n: usize) -> (f64, bool) {
    assert!(n >= 1 && n <= l, "need 1 <= n <= l");
    let denom = BigUint::from(n_angles) * binomial_big(l, n);
    let exact = denom_to_inverse_f64(&denom);
    let log2_n_angles = (usize::BITS - 1 - n_angles.leading_zeros()) as f64;
    let condition = l as f64 >= 2.0 * n as f64 * 0.5f64.powf(log2_n_angles / n as f64);
    let bound_holds = if condition {
        // p_corr ≤ 2^{-n}  ⇔  2^n ≤ N·C(l,n)
        (BigUint::from(1u32) << n) <= denom
    } else {
        true
    };
    (exact, bound_holds)
}

fn denom_to_inverse_f64(denom: &BigUint) -> f64 {
    let bits = denom.bits();
    if bits <= 1023 {
        let as_f64: f64 = denom.to_string().parse().unwrap_or(f64::INFINITY);
        1.0 / as_f64
    } else {
        0.0
    }
}

// ---------------------------------------------------------------------------
// Impersonation sessions
// ---------------------------------------------------------------------------

/// Outcome of one impersonation trial with the adversary's leftovers.
#[derive(Debug, Clone)]
pub struct ImpersonationTrial {
    pub outcome: SessionOutcome,
    pub eve: EveRecord,
    /// The genuine masked identity Id_B¹ = Id_B ⊕ r, for scoring Eve's
    /// guess (Bob impersonation only).
    pub true_id_b1: Option<BitString>,
}

/// Eve sends a message of her own to Bob, fabricating every identity-bearing
/// qubit. Bob detects her at the identity check with probability
/// `1 − (1/2)^{k/2}`.
pub fn impersonate_alice_session<R: RandomSource + ?Sized>(
    config: &ProtocolConfig,
    rng: &mut R,
) -> crate::protocol::Result<ImpersonationTrial> {
    let identities = PartyIdentities::random(config.k, rng);
    let message = BitString::random(config.n, rng);
    let (outcome, eve) = SessionSetup::new(config, &identities)
        .attack(AttackModel::ImpersonateAlice)
        .run_detailed(&message, rng)?;
    Ok(ImpersonationTrial {
        outcome,
        eve,
        true_id_b1: None,
    })
}

/// Eve receives Alice's sequence in Bob's place. She can pass the public
/// stages, but the r announcement is one-time-pad protected: Alice accepts
/// her with probability `(1/2)^k`.
pub fn impersonate_bob_session<R: RandomSource + ?Sized>(
    config: &ProtocolConfig,
    rng: &mut R,
) -> crate::protocol::Result<ImpersonationTrial> {
    let identities = PartyIdentities::random(config.k, rng);
    let message = BitString::random(config.n, rng);
    let r = BitString::random(config.k, rng);
    let true_id_b1 = identities.id_b.xor(&r)?;
    let (outcome, eve) = SessionSetup::new(config, &identities)
        .attack(AttackModel::ImpersonateBob)
        .force_r(r)
        .run_detailed(&message, rng)?;
    Ok(ImpersonationTrial {
        outcome,
        eve,
        true_id_b1: Some(true_id_b1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::SessionStatus;
    use crate::rng::SessionRng;
    use approx::assert_abs_diff_eq;

    #[test]
    fn intercept_survival_is_three_quarters_for_every_angle() {
        for theta0 in 1..=360 {
            let s = intercept_decoy_survival(theta0 as f64);
            assert!((s - 0.75).abs() < 1e-10, "theta0 = {theta0}: {s}");
        }
    }

    #[test]
    fn intercept_survival_components_at_45_degrees() {
        // A |0⟩ decoy intercepted at 45° survives with cos⁴45 + sin⁴45 = ½.
        let eve = QubitBasis::diagonal();
        let (e0, e1) = eve.vectors();
        let (p0, p1) = quantum::outcome_distribution(&PureState::zero(), &eve).unwrap();
        let survive: f64 = [(p0, &e0), (p1, &e1)]
            .iter()
            .map(|(p, resent)| {
                p * quantum::outcome_distribution(resent, &QubitBasis::computational())
                    .unwrap()
                    .0
            })
            .sum();
        assert_abs_diff_eq!(survive, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn intercept_resend_collapses_to_eve_basis() {
        let mut rng = SessionRng::new(1);
        let sequence = vec![PureState::zero(), PureState::plus(), PureState::one()];
        let (resent, record) = intercept_resend(&sequence, 45, &mut rng).unwrap();
        assert_eq!(record.measured_outcomes.len(), 3);
        for (q, (_, outcome)) in resent.iter().zip(&record.measured_outcomes) {
            let expected = if *outcome == 0 {
                PureState::plus()
            } else {
                PureState::minus()
            };
            assert!(q.approx_eq_up_to_phase(&expected, 1e-12));
        }
        assert!(intercept_resend(&sequence, 0, &mut rng).is_err());
    }

    #[test]
    fn intercept_matching_basis_is_transparent_to_message_qubits() {
        let mut rng = SessionRng::new(2);
        let gate = quantum::rotation_gate(73.0).unwrap();
        let sent = quantum::apply(&gate, &PureState::one()).unwrap();
        let (resent, _) = intercept_resend(&[sent.clone()], 73, &mut rng).unwrap();
        assert!(resent[0].approx_eq_up_to_phase(&sent, 1e-12));
    }

    #[test]
    fn detection_prob_intercept_values() {
        assert_eq!(detection_prob_intercept(0), 0.0);
        assert_abs_diff_eq!(detection_prob_intercept(4), 175.0 / 256.0, epsilon = 1e-15);
    }

    #[test]
    fn p_corr_examples() {
        let (exact, holds) = p_corr_bound(360, 21, 6);
        assert_abs_diff_eq!(exact, 1.0 / (360.0 * 54264.0), epsilon = 1e-20);
        assert!(holds);

        // l = n: C(n, n) = 1.
        let (exact, holds) = p_corr_bound(360, 6, 6);
        assert_abs_diff_eq!(exact, 1.0 / 360.0, epsilon = 1e-15);
        assert!(holds);

        // Deep underflow territory still checks exactly.
        let (exact, holds) = p_corr_bound(360, 10_000, 5_000);
        assert_eq!(exact, 0.0);
        assert!(holds);
    }

    #[test]
    fn binomial_dominates_power_bound_for_small_cases() {
        use num_bigint::BigUint;
        for l in 1usize..=30 {
            for n in 1..=l {
                let c = binomial_big(l, n);
                let lhs = (l as f64 / n as f64).powi(n as i32);
                let c_f64: f64 = c.to_string().parse::<f64>().unwrap();
                assert!(
                    c_f64 >= lhs - 1e-6,
                    "C({l},{n}) = {c_f64} < (l/n)^n = {lhs}"
                );
                let _ = BigUint::from(1u32);
            }
        }
    }

    #[test]
    fn entangling_unitary_is_unitary_for_all_fidelities() {
        for i in 0..=10 {
            let f = i as f64 / 10.0;
            entangling_unitary(f).unwrap();
        }
        assert!(entangling_unitary(1.01).is_err());
        assert!(entangling_unitary(-0.01).is_err());
    }

    #[test]
    fn entangle_attach_fidelity_one_is_transparent() {
        let joint = entangle_attach(&PureState::zero(), 1.0).unwrap();
        let (p0, _) = quantum::partial_outcome_probs(&joint, &QubitBasis::computational()).unwrap();
        assert_abs_diff_eq!(p0, 1.0, epsilon = 1e-12);

        // Z-basis distribution of an arbitrary qubit is unchanged at F = 1.
        let tilted = quantum::apply(&quantum::rotation_gate(33.0).unwrap(), &PureState::zero()).unwrap();
        let before = quantum::outcome_distribution(&tilted, &QubitBasis::computational()).unwrap();
        let joint = entangle_attach(&tilted, 1.0).unwrap();
        let after = quantum::partial_outcome_probs(&joint, &QubitBasis::computational()).unwrap();
        assert_abs_diff_eq!(before.0, after.0, epsilon = 1e-12);
    }

    #[test]
    fn entangle_attach_probabilities_match_fidelity() {
        let joint = entangle_attach(&PureState::zero(), 0.9).unwrap();
        let (p0, _) = quantum::partial_outcome_probs(&joint, &QubitBasis::computational()).unwrap();
        assert_abs_diff_eq!(p0, 0.9, epsilon = 1e-12);

        for f in [0.5, 0.7, 1.0] {
            let joint = entangle_attach(&PureState::plus(), f).unwrap();
            let (p_plus, _) = quantum::partial_outcome_probs(&joint, &QubitBasis::diagonal()).unwrap();
            assert_abs_diff_eq!(p_plus, 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn entangle_pass_formula_matches_brute_force() {
        for f in [0.0, 0.3, 0.6, 0.8, 1.0] {
            let formula = entangle_decoy_pass_prob(f);
            let brute = entangle_decoy_pass_analytic(f).unwrap();
            assert_abs_diff_eq!(formula, brute, epsilon = 1e-10);
        }
        assert_abs_diff_eq!(entangle_decoy_pass_prob(1.0), 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(entangle_decoy_pass_prob(0.5), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn dos_pass_formula_matches_brute_force() {
        let h = 0.5f64;
        let vectors: [[f64; 4]; 5] = [
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [h, h, h, h],
            [0.6, 0.8, 0.0, 0.0],
            [0.5, 0.5, 1.0 / 2.0f64.sqrt(), 0.0],
        ];
        for w in vectors {
            let formula = dos_decoy_pass_prob(&w);
            let brute = dos_decoy_pass_analytic(&w).unwrap();
            assert!((formula - brute).abs() < 1e-10, "w = {w:?}");
        }
        assert_abs_diff_eq!(dos_decoy_pass_prob(&[1.0, 0.0, 0.0, 0.0]), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn dos_random_weight_vectors_agree_with_formula() {
        let mut rng = SessionRng::new(3);
        for _ in 0..50 {
            let mut w = [0.0f64; 4];
            let mut norm = 0.0;
            for slot in &mut w {
                *slot = rng.next_f64() - 0.5;
                norm += *slot * *slot;
            }
            let norm = norm.sqrt();
            for slot in &mut w {
                *slot /= norm;
            }
            let formula = dos_decoy_pass_prob(&w);
            let brute = dos_decoy_pass_analytic(&w).unwrap();
            assert_abs_diff_eq!(formula, brute, epsilon = 1e-10);
        }
    }

    #[test]
    fn dos_identity_weights_leave_sequence_unchanged() {
        let mut rng = SessionRng::new(4);
        let seq = vec![PureState::zero(), PureState::minus()];
        let out = dos_apply(&seq, &[1.0, 0.0, 0.0, 0.0], &mut rng).unwrap();
        assert_eq!(out, seq);
        assert!(dos_apply(&seq, &[1.0, 1.0, 0.0, 0.0], &mut rng).is_err());
    }

    #[test]
    fn dos_sigma_x_flips_z_decoys_on_attack_branch() {
        let mut rng = SessionRng::new(5);
        let seq = vec![PureState::zero(); 2000];
        let out = dos_apply(&seq, &[0.0, 1.0, 0.0, 0.0], &mut rng).unwrap();
        let flipped = out
            .iter()
            .filter(|q| q.approx_eq_up_to_phase(&PureState::one(), 1e-12))
            .count();
        // Attack branch probability is ½.
        let freq = flipped as f64 / 2000.0;
        assert!((freq - 0.5).abs() < 0.05, "freq {freq}");
    }

    #[test]
    fn mitm_pass_probability_is_half() {
        assert_abs_diff_eq!(mitm_decoy_pass_analytic(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(mitm_detection_prob(4), 0.9375, epsilon = 1e-15);
    }

    #[test]
    fn mitm_replace_keeps_original_in_record() {
        let mut rng = SessionRng::new(6);
        let states = vec![PureState::plus(), PureState::one()];
        let (flying, record) =
            apply_channel_attack(&AttackModel::Mitm, states.clone(), &mut rng).unwrap();
        assert_eq!(flying.len(), 2);
        assert_eq!(record.captured_sequence, Some(states));
    }

    #[test]
    fn eve_distinguishability_matches_entrywise_partial_trace() {
        // Independent oracle: build the joint state for |x⟩ straight from
        // the interaction's coefficient table and trace the qubit out by
        // explicit index loops.
        let c = num_complex::Complex64::new;
        for (theta, f) in [(45u16, 0.5f64), (30, 0.9), (137, 0.7)] {
            let t = (theta as f64).to_radians();
            let (sf, sd) = (f.sqrt(), (1.0 - f).sqrt());
            let mut amps = vec![c(0.0, 0.0); 8];
            amps[0] = c(sf * t.cos(), 0.0); // |0⟩|χ00⟩
            amps[2] = c(sd * t.sin(), 0.0); // |0⟩|χ10⟩
            amps[5] = c(sd * t.cos(), 0.0); // |1⟩|χ01⟩
            amps[7] = c(sf * t.sin(), 0.0); // |1⟩|χ11⟩
            let mut rho = [[c(0.0, 0.0); 4]; 4];
            for j in 0..4 {
                for k in 0..4 {
                    for q in 0..2 {
                        rho[j][k] += amps[q * 4 + j] * amps[q * 4 + k].conj();
                    }
                }
            }

            let gate = quantum::rotation_gate(theta as f64).unwrap();
            let x = quantum::apply(&gate, &PureState::zero()).unwrap();
            let via_module =
                quantum::reduced_density(&entangle_attach(&x, f).unwrap(), Subsystem::Ancilla)
                    .unwrap();
            for j in 0..4 {
                for k in 0..4 {
                    assert!(
                        (via_module.entry(j, k) - rho[j][k]).norm() < 1e-10,
                        "θ={theta} F={f} entry ({j},{k})"
                    );
                }
            }

            // The reported figure is phase-invariant by construction.
            let d1 = eve_message_distinguishability(theta, f).unwrap();
            assert!((0.0..=1.0 + 1e-12).contains(&d1));
        }
    }

    #[test]
    fn eve_distinguishability_vanishes_in_z_like_cases() {
        // θ = 360 ≡ 0: |x⟩,|y⟩ are computational states; at F = 1 Eve's
        // ancilla factors cleanly and the two reduced states are orthogonal
        // coordinate projectors with distance 1 — while at F = ½ the ancilla
        // pairs overlap.
        let d = eve_message_distinguishability(360, 1.0).unwrap();
        assert_abs_diff_eq!(d, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn impersonation_detection_rates_are_near_closed_forms() {
        let mut rng = SessionRng::new(7);
        let config = ProtocolConfig::noiseless(4, 0, 4, 2, 0);
        let trials = 4000;

        let mut detected = 0;
        for _ in 0..trials {
            let trial = impersonate_alice_session(&config, &mut rng).unwrap();
            if trial.outcome.status == SessionStatus::AbortedAuthA {
                detected += 1;
            }
        }
        let rate = detected as f64 / trials as f64;
        let expected = impersonate_alice_detection_prob(4);
        assert!((rate - expected).abs() < 0.03, "rate {rate} vs {expected}");

        let mut accepted = 0;
        let mut guessed = 0;
        for _ in 0..trials {
            let trial = impersonate_bob_session(&config, &mut rng).unwrap();
            if trial.outcome.r_match == Some(true) {
                accepted += 1;
            }
            if trial.eve.guessed_id_b1 == trial.true_id_b1 {
                guessed += 1;
            }
        }
        let rate = accepted as f64 / trials as f64;
        let expected = impersonate_bob_acceptance_prob(4);
        assert!((rate - expected).abs() < 0.02, "rate {rate} vs {expected}");
        let rate = guessed as f64 / trials as f64;
        let expected = id_b1_guess_prob(4);
        assert!((rate - expected).abs() < 0.03, "guess rate {rate} vs {expected}");
    }
}
