//! The full QSDC session with mutual authentication.
//!
//! Alice assembles a single l-qubit sequence in five stages: the message
//! (plus random check bits) encoded in a secret rotated basis, her own
//! identity qubits, Bob's masked identity qubits, the binary encoding of the
//! rotation angle, and decoy photons. Bob unwinds it in stage order — decoy
//! security check, both authentications, angle recovery, message decoding,
//! check-bit integrity — driven entirely by positions announced over the
//! classical channel. Every classical exchange is logged in a [`Transcript`].
//!
//! Positions in announcements always refer to the original transmitted
//! sequence; measured qubits are never re-indexed away. Within each role
//! group, announced positions ascend in preparation order, which is what
//! lets Bob pair the i-th announced position with the i-th identity pair,
//! masked bit, or angle bit.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

use crate::adversary::{self, AttackModel, EveRecord};
use crate::ecc::RepetitionCode;
use crate::noise::{self, ChannelModel};
use crate::quantum::{self, PureState, QuantumError, QubitBasis, Unitary};
use crate::rng::RandomSource;

/// Cardinality of the angle set Θ = {1°, …, 360°}.
pub const THETA_CARDINALITY: u16 = 360;

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("bit string of length {actual}, expected {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("identity bit string must have even length, got {0}")]
    OddIdentityLength(usize),
    #[error("angle {0} is outside the set {{1,…,360}}")]
    ThetaOutOfRange(u16),
    #[error("angle {theta} needs {needed} bits but the identity has only {k}")]
    ThetaTooWide { theta: u16, needed: usize, k: usize },
    #[error("decoy count must be at least 1")]
    NoDecoys,
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error("noise model error: {0}")]
    Noise(String),
    #[error("attack model error: {0}")]
    Attack(String),
}

impl From<noise::NoiseError> for ProtocolError {
    fn from(e: noise::NoiseError) -> Self {
        ProtocolError::Noise(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, ProtocolError>;

// ---------------------------------------------------------------------------
// Bit strings
// ---------------------------------------------------------------------------

/// A classical bit string, serialized as `"0"`/`"1"` text.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitString(Vec<u8>);

impl BitString {
    pub fn new(bits: Vec<u8>) -> Self {
        assert!(bits.iter().all(|&b| b <= 1), "bits must be 0 or 1");
        Self(bits)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0; len])
    }

    pub fn random<R: RandomSource + ?Sized>(len: usize, rng: &mut R) -> Self {
        Self((0..len).map(|_| rng.next_bit()).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bit(&self, i: usize) -> u8 {
        self.0[i]
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn push(&mut self, bit: u8) {
        assert!(bit <= 1);
        self.0.push(bit);
    }

    pub fn xor(&self, other: &Self) -> Result<Self> {
        if self.len() != other.len() {
            return Err(ProtocolError::LengthMismatch {
                expected: self.len(),
                actual: other.len(),
            });
        }
        Ok(Self(
            self.0.iter().zip(&other.0).map(|(a, b)| a ^ b).collect(),
        ))
    }

    /// Remove the bits at `positions` (sorted, within range), keeping order.
    pub fn without_positions(&self, positions: &[usize]) -> Self {
        let mut drop = vec![false; self.len()];
        for &p in positions {
            drop[p] = true;
        }
        Self(
            self.0
                .iter()
                .enumerate()
                .filter(|(i, _)| !drop[*i])
                .map(|(_, &b)| b)
                .collect(),
        )
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "\"{self}\"")
    }
}

impl FromStr for BitString {
    type Err = ProtocolError;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(ProtocolError::Config(format!(
                    "bit strings may contain only 0 and 1, found {other:?}"
                ))),
            })
            .collect::<Result<Vec<u8>>>()
            .map(Self)
    }
}

impl Serialize for BitString {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Minimal-width binary representation of an angle, most significant bit
/// first (7 → `111`, 360 → `101101000`).
pub fn theta_bit_string(theta: u16) -> BitString {
    assert!(theta >= 1, "theta must be at least 1");
    let width = 16 - theta.leading_zeros() as usize;
    BitString::new(
        (0..width)
            .rev()
            .map(|i| ((theta >> i) & 1) as u8)
            .collect(),
    )
}

fn bits_to_theta(bits: &BitString) -> u32 {
    bits.bits().iter().fold(0u32, |acc, &b| (acc << 1) | b as u32)
}

// ---------------------------------------------------------------------------
// Preparation bases
// ---------------------------------------------------------------------------

/// The two public preparation bases: computational (Z) and diagonal (X).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasisKind {
    Z,
    X,
}

impl BasisKind {
    pub fn from_bit(bit: u8) -> Self {
        if bit == 0 {
            BasisKind::Z
        } else {
            BasisKind::X
        }
    }

    pub fn qubit_basis(self) -> QubitBasis {
        match self {
            BasisKind::Z => QubitBasis::computational(),
            BasisKind::X => QubitBasis::diagonal(),
        }
    }
}

/// The four public single-qubit states: |0⟩, |1⟩, |+⟩, |−⟩.
pub fn bb84_state(basis: BasisKind, bit: u8) -> PureState {
    match (basis, bit) {
        (BasisKind::Z, 0) => PureState::zero(),
        (BasisKind::Z, _) => PureState::one(),
        (BasisKind::X, 0) => PureState::plus(),
        (BasisKind::X, _) => PureState::minus(),
    }
}

/// Uniform draw from the four public states.
pub fn random_bb84_state<R: RandomSource + ?Sized>(rng: &mut R) -> PureState {
    match rng.next_index(4) {
        0 => PureState::zero(),
        1 => PureState::one(),
        2 => PureState::plus(),
        _ => PureState::minus(),
    }
}

/// Preparation record of one decoy photon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoySpec {
    pub basis: BasisKind,
    pub bit: u8,
}

// ---------------------------------------------------------------------------
// Configuration and identities
// ---------------------------------------------------------------------------

/// Session parameters shared by both parties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    /// Message length in bits.
    pub n: usize,
    /// Number of random check bits mixed into the message.
    pub c: usize,
    /// Identity length in bits (even).
    pub k: usize,
    /// Number of decoy photons.
    pub m: usize,
    pub decoy_error_threshold: f64,
    pub auth_error_threshold: f64,
    pub check_bit_error_threshold: f64,
    pub seed: u64,
}

impl ProtocolConfig {
    /// Noiseless defaults: all acceptance thresholds at zero.
    pub fn noiseless(n: usize, c: usize, k: usize, m: usize, seed: u64) -> Self {
        Self {
            n,
            c,
            k,
            m,
            decoy_error_threshold: 0.0,
            auth_error_threshold: 0.0,
            check_bit_error_threshold: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(ProtocolError::Config("message length must be positive".into()));
        }
        if self.m == 0 {
            return Err(ProtocolError::NoDecoys);
        }
        if self.k < 2 || self.k % 2 != 0 {
            return Err(ProtocolError::Config(format!(
                "identity length k = {} must be even and at least 2",
                self.k
            )));
        }
        for (name, t) in [
            ("decoy_error_threshold", self.decoy_error_threshold),
            ("auth_error_threshold", self.auth_error_threshold),
            ("check_bit_error_threshold", self.check_bit_error_threshold),
        ] {
            if !(0.0..=1.0).contains(&t) {
                return Err(ProtocolError::Config(format!("{name} = {t} not in [0,1]")));
            }
        }
        Ok(())
    }

    /// Largest angle whose binary encoding fits in a k-bit identity.
    pub fn max_encodable_theta(&self) -> u16 {
        if self.k >= 9 {
            THETA_CARDINALITY
        } else {
            ((1u32 << self.k) - 1).min(THETA_CARDINALITY as u32) as u16
        }
    }
}

/// The pre-shared k-bit authentication identities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartyIdentities {
    pub id_a: BitString,
    pub id_b: BitString,
}

impl PartyIdentities {
    pub fn new(id_a: BitString, id_b: BitString) -> Self {
        Self { id_a, id_b }
    }

    pub fn random<R: RandomSource + ?Sized>(k: usize, rng: &mut R) -> Self {
        Self {
            id_a: BitString::random(k, rng),
            id_b: BitString::random(k, rng),
        }
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        for id in [&self.id_a, &self.id_b] {
            if id.len() != k {
                return Err(ProtocolError::LengthMismatch { expected: k, actual: id.len() });
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Sequence layout
// ---------------------------------------------------------------------------

/// What a position in the transmitted sequence carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    Message,
    Check,
    AuthA,
    AuthB,
    Theta,
    Decoy,
}

pub const ALL_ROLES: [Role; 6] = [
    Role::Message,
    Role::Check,
    Role::AuthA,
    Role::AuthB,
    Role::Theta,
    Role::Decoy,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleSlot {
    pub role: Role,
    pub ordinal: usize,
}

/// Role and preparation ordinal of every position in the sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceLayout {
    slots: Vec<RoleSlot>,
}

impl SequenceLayout {
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn slot_at(&self, pos: usize) -> RoleSlot {
        self.slots[pos]
    }

    /// Positions carrying `role`, ascending. Within a role group, ascending
    /// position order equals preparation order.
    pub fn positions_of(&self, role: Role) -> Vec<usize> {
        self.slots
            .iter()
            .enumerate()
            .filter(|(_, s)| s.role == role)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn count_of(&self, role: Role) -> usize {
        self.slots.iter().filter(|s| s.role == role).count()
    }

    /// Structural invariants: contiguous ordinals per role, ascending with
    /// position.
    pub fn check_invariants(&self) -> Result<()> {
        for role in ALL_ROLES {
            let ordinals: Vec<usize> = self
                .slots
                .iter()
                .filter(|s| s.role == role)
                .map(|s| s.ordinal)
                .collect();
            for (expected, &got) in ordinals.iter().enumerate() {
                if expected != got {
                    return Err(ProtocolError::Config(format!(
                        "layout ordinals for {role:?} are not in preparation order"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Growing sequence that supports uniformly random group insertion.
struct SequenceBuilder {
    states: Vec<PureState>,
    slots: Vec<RoleSlot>,
}

impl SequenceBuilder {
    fn from_payload(states: Vec<PureState>, slots: Vec<RoleSlot>) -> Self {
        assert_eq!(states.len(), slots.len());
        Self { states, slots }
    }

    /// Insert a group of qubits at a uniformly random set of positions of
    /// the extended sequence, preserving the group's internal order.
    fn insert_group<R: RandomSource + ?Sized>(
        &mut self,
        role: Role,
        group: Vec<PureState>,
        rng: &mut R,
    ) {
        let g = group.len();
        if g == 0 {
            return;
        }
        let new_len = self.states.len() + g;
        let positions = sample_distinct_sorted(rng, new_len, g);

        let mut states = Vec::with_capacity(new_len);
        let mut slots = Vec::with_capacity(new_len);
        let mut old_states = self.states.drain(..);
        let mut old_slots = self.slots.drain(..).collect::<Vec<_>>().into_iter();
        let mut group_iter = group.into_iter().enumerate();
        let mut next_slot = positions.iter().copied().peekable();
        for pos in 0..new_len {
            if next_slot.peek() == Some(&pos) {
                next_slot.next();
                let (ordinal, state) = group_iter.next().expect("one group item per slot");
                states.push(state);
                slots.push(RoleSlot { role, ordinal });
            } else {
                states.push(old_states.next().expect("old item"));
                slots.push(old_slots.next().expect("old slot"));
            }
        }
        drop(old_states);
        self.states = states;
        self.slots = slots;
    }

    fn finish(self) -> (Vec<PureState>, SequenceLayout) {
        (self.states, SequenceLayout { slots: self.slots })
    }
}

/// Uniform random g-subset of `0..bound`, sorted ascending.
fn sample_distinct_sorted<R: RandomSource + ?Sized>(
    rng: &mut R,
    bound: usize,
    g: usize,
) -> Vec<usize> {
    assert!(g <= bound);
    let mut taken = vec![false; bound];
    let mut picked = Vec::with_capacity(g);
    while picked.len() < g {
        let i = rng.next_index(bound);
        if !taken[i] {
            taken[i] = true;
            picked.push(i);
        }
    }
    picked.sort_unstable();
    picked
}

// ---------------------------------------------------------------------------
// Classical channel
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sender {
    Alice,
    Bob,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    SecurityCheck,
    AuthA,
    AuthB,
    Integrity,
}

/// One message on the public classical channel. Positions are indices into
/// the original transmitted sequence, strictly increasing — except in
/// `CheckReveal`, whose positions index into the decoded bit string M'.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum ClassicalMessage {
    DecoyReveal {
        positions: Vec<usize>,
        bases: Vec<BasisKind>,
    },
    DecoyResults {
        outcomes: BitString,
    },
    AuthAPositions {
        positions: Vec<usize>,
    },
    AuthBPositions {
        positions: Vec<usize>,
    },
    RAnnouncement {
        r: BitString,
    },
    ThetaPositions {
        positions: Vec<usize>,
    },
    CheckReveal {
        positions: Vec<usize>,
        values: BitString,
    },
    StageVerdict {
        stage: Stage,
        pass: bool,
    },
    Abort {
        stage: Stage,
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub sender: Sender,
    pub message: ClassicalMessage,
}

/// Ordered log of every classical exchange in a session.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Transcript {
    pub entries: Vec<TranscriptEntry>,
}

impl Transcript {
    fn push(&mut self, sender: Sender, message: ClassicalMessage) {
        self.entries.push(TranscriptEntry { sender, message });
    }

    /// Canonical JSON for audits and byte-comparison.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(self).expect("transcript serializes")
    }
}

// ---------------------------------------------------------------------------
// Session outcome
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SessionStatus {
    Delivered,
    AbortedSecurityCheck,
    AbortedAuthA,
    AbortedAuthB,
    AbortedIntegrity,
}

/// Everything observable at the end of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionOutcome {
    pub status: SessionStatus,
    /// Present exactly when `status == Delivered`.
    pub recovered_message: Option<BitString>,
    pub decoy_error_rate: f64,
    /// `None` when the stage was never reached (or the verifier was an
    /// impersonator with nothing to compare against).
    pub auth_a_error_rate: Option<f64>,
    pub r_match: Option<bool>,
    pub check_bit_error_rate: Option<f64>,
    pub transcript: Transcript,
}

// ---------------------------------------------------------------------------
// Alice's preparation operations
// ---------------------------------------------------------------------------

/// Insert `c` uniformly random check bits at uniformly random positions.
///
/// Returns the augmented string, the (ascending) positions of the check bits
/// within it, and the check values in position order.
pub fn insert_check_bits<R: RandomSource + ?Sized>(
    message: &BitString,
    c: usize,
    rng: &mut R,
) -> (BitString, Vec<usize>, BitString) {
    let total = message.len() + c;
    let positions = sample_distinct_sorted(rng, total, c);
    let values = BitString::random(c, rng);

    let mut augmented = BitString::default();
    let mut msg_iter = message.bits().iter();
    let mut check_iter = positions.iter().copied().peekable();
    let mut value_iter = values.bits().iter();
    for pos in 0..total {
        if check_iter.peek() == Some(&pos) {
            check_iter.next();
            augmented.push(*value_iter.next().expect("one value per check"));
        } else {
            augmented.push(*msg_iter.next().expect("message bit"));
        }
    }
    (augmented, positions, values)
}

/// Message-role/check-role slots for the payload block, in M' order.
pub fn payload_slots(n_prime: usize, check_positions: &[usize]) -> Vec<RoleSlot> {
    let mut slots = Vec::with_capacity(n_prime);
    let mut check_iter = check_positions.iter().copied().peekable();
    let mut message_ordinal = 0;
    let mut check_ordinal = 0;
    for pos in 0..n_prime {
        if check_iter.peek() == Some(&pos) {
            check_iter.next();
            slots.push(RoleSlot { role: Role::Check, ordinal: check_ordinal });
            check_ordinal += 1;
        } else {
            slots.push(RoleSlot { role: Role::Message, ordinal: message_ordinal });
            message_ordinal += 1;
        }
    }
    slots
}

/// Encode every bit of M' as `U_θ|bit⟩`.
pub fn encode_message_qubits(augmented: &BitString, theta: u16) -> Result<Vec<PureState>> {
    validate_theta(theta)?;
    encode_with_gate(augmented, &quantum::rotation_gate(theta as f64)?)
}

fn encode_with_gate(augmented: &BitString, gate: &Unitary) -> Result<Vec<PureState>> {
    augmented
        .bits()
        .iter()
        .map(|&b| {
            let prepared = if b == 0 { PureState::zero() } else { PureState::one() };
            Ok(quantum::apply(gate, &prepared)?)
        })
        .collect()
}

pub fn validate_theta(theta: u16) -> Result<()> {
    if theta == 0 || theta > THETA_CARDINALITY {
        return Err(ProtocolError::ThetaOutOfRange(theta));
    }
    Ok(())
}

/// Identity qubits for Alice: bit pair (2i, 2i+1) of `id_a` selects
/// |0⟩, |1⟩, |+⟩, |−⟩ for pair values 00, 01, 10, 11.
pub fn encode_identity_a(id_a: &BitString) -> Result<Vec<PureState>> {
    if id_a.len() % 2 != 0 {
        return Err(ProtocolError::OddIdentityLength(id_a.len()));
    }
    Ok(id_a
        .bits()
        .chunks(2)
        .map(|pair| bb84_state(BasisKind::from_bit(pair[0]), pair[1]))
        .collect())
}

/// Identity qubits for Bob: with masked identity `Id_B¹ = Id_B ⊕ r`, qubit i
/// is prepared in the basis selected by `Id_B,i` carrying bit `Id_B¹,i`.
pub fn encode_identity_b(id_b: &BitString, r: &BitString) -> Result<Vec<PureState>> {
    let id_b1 = id_b.xor(r)?;
    Ok(id_b
        .bits()
        .iter()
        .zip(id_b1.bits())
        .map(|(&basis_bit, &value)| bb84_state(BasisKind::from_bit(basis_bit), value))
        .collect())
}

/// Angle qubits: bit i of θ's minimal binary form, prepared in the basis
/// selected by `Id_B,i`.
pub fn encode_theta(theta: u16, id_b: &BitString) -> Result<Vec<PureState>> {
    validate_theta(theta)?;
    let bits = theta_bit_string(theta);
    if bits.len() > id_b.len() {
        return Err(ProtocolError::ThetaTooWide {
            theta,
            needed: bits.len(),
            k: id_b.len(),
        });
    }
    Ok(bits
        .bits()
        .iter()
        .zip(id_b.bits())
        .map(|(&value, &basis_bit)| bb84_state(BasisKind::from_bit(basis_bit), value))
        .collect())
}

/// Draw `m` decoy photons uniformly from {|0⟩, |1⟩, |+⟩, |−⟩}.
pub fn sample_decoys<R: RandomSource + ?Sized>(
    m: usize,
    rng: &mut R,
) -> Result<(Vec<PureState>, Vec<DecoySpec>)> {
    if m == 0 {
        return Err(ProtocolError::NoDecoys);
    }
    let mut states = Vec::with_capacity(m);
    let mut specs = Vec::with_capacity(m);
    for _ in 0..m {
        let (basis, bit) = match rng.next_index(4) {
            0 => (BasisKind::Z, 0),
            1 => (BasisKind::Z, 1),
            2 => (BasisKind::X, 0),
            _ => (BasisKind::X, 1),
        };
        states.push(bb84_state(basis, bit));
        specs.push(DecoySpec { basis, bit });
    }
    Ok((states, specs))
}

/// All prepared parts of a sequence, in preparation order.
pub struct PreparedParts {
    pub payload: Vec<PureState>,
    pub payload_slots: Vec<RoleSlot>,
    pub auth_a: Vec<PureState>,
    pub auth_b: Vec<PureState>,
    pub theta: Vec<PureState>,
    pub decoys: Vec<PureState>,
}

/// Build the transmitted sequence: insert I_A, then I_B, then Q_θ, then the
/// decoys, each group at uniformly random positions of the growing sequence.
pub fn assemble_sequence<R: RandomSource + ?Sized>(
    parts: PreparedParts,
    rng: &mut R,
) -> (Vec<PureState>, SequenceLayout) {
    let mut builder = SequenceBuilder::from_payload(parts.payload, parts.payload_slots);
    builder.insert_group(Role::AuthA, parts.auth_a, rng);
    builder.insert_group(Role::AuthB, parts.auth_b, rng);
    builder.insert_group(Role::Theta, parts.theta, rng);
    builder.insert_group(Role::Decoy, parts.decoys, rng);
    builder.finish()
}

// ---------------------------------------------------------------------------
// Repetition expansion
// ---------------------------------------------------------------------------

/// Expand a logical sequence into its d-fold repetition-coded physical form.
///
/// Contiguous mode keeps the d copies of each logical qubit adjacent;
/// interleaved mode transmits d full copies of the sequence back to back.
/// In both modes, the t-th ascending physical position of a role group maps
/// to logical index [`logical_index`]`(t, …)`.
pub fn expand_repetition(
    states: &[PureState],
    layout: &SequenceLayout,
    code: Option<RepetitionCode>,
) -> (Vec<PureState>, SequenceLayout) {
    let Some(code) = code else {
        return (states.to_vec(), layout.clone());
    };
    let d = code.distance;
    let l = states.len();
    let mut phys_states = Vec::with_capacity(l * d);
    let mut slots = Vec::with_capacity(l * d);
    let mut counts = std::collections::HashMap::new();
    for role in ALL_ROLES {
        counts.insert(role, layout.count_of(role));
    }
    if code.interleave {
        for copy in 0..d {
            for (pos, state) in states.iter().enumerate() {
                let s = layout.slot_at(pos);
                phys_states.push(state.clone());
                slots.push(RoleSlot {
                    role: s.role,
                    ordinal: copy * counts[&s.role] + s.ordinal,
                });
            }
        }
    } else {
        for (pos, state) in states.iter().enumerate() {
            let s = layout.slot_at(pos);
            for copy in 0..d {
                phys_states.push(state.clone());
                slots.push(RoleSlot {
                    role: s.role,
                    ordinal: s.ordinal * d + copy,
                });
            }
        }
    }
    (phys_states, SequenceLayout { slots })
}

/// Logical index of the t-th ascending physical position within a role group
/// of `logical_count` qubits under d-fold repetition.
pub fn logical_index(t: usize, logical_count: usize, code: Option<RepetitionCode>) -> usize {
    match code {
        None => t,
        Some(c) if c.interleave => t % logical_count,
        Some(c) => t / c.distance,
    }
}

// ---------------------------------------------------------------------------
// Flying qubits (Bob's received sequence)
// ---------------------------------------------------------------------------

/// A position of the in-flight sequence: a bare qubit, or a qubit entangled
/// with an eavesdropper's 4-dim ancilla.
#[derive(Debug, Clone, PartialEq)]
pub enum FlyingQubit {
    Single(PureState),
    Entangled(PureState),
}

impl FlyingQubit {
    pub fn apply_gate(&mut self, u: &Unitary) -> Result<()> {
        match self {
            FlyingQubit::Single(s) => *s = quantum::apply(u, s)?,
            FlyingQubit::Entangled(j) => {
                let lifted = quantum::lift_to_joint(u)?;
                *j = quantum::apply(&lifted, j)?;
            }
        }
        Ok(())
    }
}

/// Bob's stateful view of the received sequence.
struct ReceiverView {
    flying: Vec<FlyingQubit>,
    readout_error: f64,
    /// Post-measurement ancilla retained by Eve, per position.
    ancillas: Vec<(usize, PureState)>,
}

impl ReceiverView {
    fn new(flying: Vec<FlyingQubit>, readout_error: f64) -> Self {
        Self {
            flying,
            readout_error,
            ancillas: Vec::new(),
        }
    }

    fn len(&self) -> usize {
        self.flying.len()
    }

    /// Measure the qubit at `pos` in `basis`, collapse it in place, and
    /// return the recorded (readout-flipped) outcome.
    fn measure_at<R: RandomSource + ?Sized>(
        &mut self,
        pos: usize,
        basis: &QubitBasis,
        rng: &mut R,
    ) -> Result<u8> {
        let outcome = match &self.flying[pos] {
            FlyingQubit::Single(s) => {
                let (o, post) = quantum::measure(s, basis, rng)?;
                self.flying[pos] = FlyingQubit::Single(post);
                o
            }
            FlyingQubit::Entangled(j) => {
                let (o, collapsed) = quantum::partial_measure(j, basis, rng)?;
                let (_, ancilla) = quantum::project_qubit(&collapsed, basis, o)?
                    .expect("collapsed joint has the measured component");
                self.ancillas.push((pos, ancilla));
                self.flying[pos] = FlyingQubit::Entangled(collapsed);
                o
            }
        };
        Ok(noise::readout_flip(outcome, self.readout_error, rng))
    }

    fn apply_gate_at(&mut self, pos: usize, u: &Unitary) -> Result<()> {
        self.flying[pos].apply_gate(u)
    }
}

// ---------------------------------------------------------------------------
// Session setup and runner
// ---------------------------------------------------------------------------

/// A fully specified session: protocol parameters, identities, optional
/// channel noise, optional repetition coding, and the adversary.
#[derive(Clone)]
pub struct SessionSetup<'a> {
    pub config: &'a ProtocolConfig,
    pub identities: &'a PartyIdentities,
    pub attack: AttackModel,
    pub channel: Option<ChannelModel>,
    pub ecc: Option<RepetitionCode>,
    /// Pin Alice's angle instead of drawing it.
    pub forced_theta: Option<u16>,
    /// Pin Alice's random number r instead of drawing it.
    pub forced_r: Option<BitString>,
}

impl<'a> SessionSetup<'a> {
    pub fn new(config: &'a ProtocolConfig, identities: &'a PartyIdentities) -> Self {
        Self {
            config,
            identities,
            attack: AttackModel::None,
            channel: None,
            ecc: None,
            forced_theta: None,
            forced_r: None,
        }
    }

    pub fn attack(mut self, attack: AttackModel) -> Self {
        self.attack = attack;
        self
    }

    pub fn channel(mut self, channel: ChannelModel) -> Self {
        self.channel = Some(channel);
        self
    }

    pub fn ecc(mut self, code: RepetitionCode) -> Self {
        self.ecc = Some(code);
        self
    }

    pub fn force_theta(mut self, theta: u16) -> Self {
        self.forced_theta = Some(theta);
        self
    }

    pub fn force_r(mut self, r: BitString) -> Self {
        self.forced_r = Some(r);
        self
    }

    pub fn run<R: RandomSource + ?Sized>(&self, message: &BitString, rng: &mut R) -> Result<SessionOutcome> {
        self.run_detailed(message, rng).map(|(outcome, _)| outcome)
    }

    /// Run the session and also return what the adversary retained.
    pub fn run_detailed<R: RandomSource + ?Sized>(
        &self,
        message: &BitString,
        rng: &mut R,
    ) -> Result<(SessionOutcome, EveRecord)> {
        SessionRun::new(self, message)?.execute(rng)
    }
}

/// Convenience wrapper with the session inputs spelled out.
pub fn run_session<R: RandomSource + ?Sized>(
    config: &ProtocolConfig,
    identities: &PartyIdentities,
    message: &BitString,
    channel: Option<ChannelModel>,
    attack: AttackModel,
    rng: &mut R,
) -> Result<SessionOutcome> {
    let mut setup = SessionSetup::new(config, identities).attack(attack);
    setup.channel = channel;
    setup.run(message, rng)
}

struct SessionRun<'a> {
    setup: &'a SessionSetup<'a>,
    message: &'a BitString,
    d: usize,
    transcript: Transcript,
}

struct AlicePrep {
    r: BitString,
    check_positions: Vec<usize>,
    check_values: BitString,
    decoy_specs: Vec<DecoySpec>,
    phys_states: Vec<PureState>,
    phys_layout: SequenceLayout,
    logical_counts: RoleCounts,
}

struct RoleCounts {
    n_prime: usize,
    auth_a: usize,
    auth_b: usize,
    theta: usize,
    decoy: usize,
}

impl<'a> SessionRun<'a> {
    fn new(setup: &'a SessionSetup<'a>, message: &'a BitString) -> Result<Self> {
        setup.config.validate()?;
        setup.identities.validate(setup.config.k)?;
        if message.len() != setup.config.n {
            return Err(ProtocolError::LengthMismatch {
                expected: setup.config.n,
                actual: message.len(),
            });
        }
        if let Some(ch) = &setup.channel {
            ch.validate().map_err(|e| ProtocolError::Noise(e.to_string()))?;
        }
        setup
            .attack
            .validate()
            .map_err(|e| ProtocolError::Attack(e.to_string()))?;
        Ok(Self {
            setup,
            message,
            d: setup.ecc.map_or(1, |c| c.distance),
            transcript: Transcript::default(),
        })
    }

    fn execute<R: RandomSource + ?Sized>(mut self, rng: &mut R) -> Result<(SessionOutcome, EveRecord)> {
        let prep = self.prepare(rng)?;
        let (flying, mut eve) = self.transmit(&prep, rng)?;
        let readout = self
            .setup
            .channel
            .map_or(0.0, |ch| ch.device.readout_error);
        let mut receiver = ReceiverView::new(flying, readout);
        let outcome = self.receive(&prep, &mut receiver, &mut eve, rng)?;
        eve.ancilla_states = receiver.ancillas;
        Ok((outcome, eve))
    }

    /// Stage 1 of the protocol: build the physical sequence. When Eve
    /// impersonates Alice she follows the same recipe but fabricates every
    /// identity-bearing qubit, since neither identity is known to her.
    fn prepare<R: RandomSource + ?Sized>(&self, rng: &mut R) -> Result<AlicePrep> {
        let config = self.setup.config;
        let eve_is_alice = matches!(self.setup.attack, AttackModel::ImpersonateAlice);

        let (m_prime, check_positions, check_values) =
            insert_check_bits(self.message, config.c, rng);

        let theta = match self.setup.forced_theta {
            Some(t) => t,
            None => (rng.next_index(config.max_encodable_theta() as usize) + 1) as u16,
        };
        validate_theta(theta)?;
        let theta_bits = theta_bit_string(theta);
        if theta_bits.len() > config.k {
            return Err(ProtocolError::ThetaTooWide {
                theta,
                needed: theta_bits.len(),
                k: config.k,
            });
        }

        let offset = self
            .setup
            .channel
            .map_or(0.0, |ch| ch.device.calibration_offset_deg);
        let encode_gate = noise::calibrated_rotation(theta as f64, offset)?;
        let payload = encode_with_gate(&m_prime, &encode_gate)?;
        let slots = payload_slots(m_prime.len(), &check_positions);

        let auth_a = if eve_is_alice {
            (0..config.k / 2).map(|_| random_bb84_state(rng)).collect()
        } else {
            encode_identity_a(&self.setup.identities.id_a)?
        };

        let r = match &self.setup.forced_r {
            Some(r) => {
                if r.len() != config.k {
                    return Err(ProtocolError::LengthMismatch {
                        expected: config.k,
                        actual: r.len(),
                    });
                }
                r.clone()
            }
            None => BitString::random(config.k, rng),
        };

        let auth_b = if eve_is_alice {
            (0..config.k).map(|_| random_bb84_state(rng)).collect()
        } else {
            encode_identity_b(&self.setup.identities.id_b, &r)?
        };

        let theta_qubits = if eve_is_alice {
            // Eve knows her own θ bits but not the bases Id_B selects.
            theta_bits
                .bits()
                .iter()
                .map(|&b| bb84_state(BasisKind::from_bit(rng.next_bit()), b))
                .collect()
        } else {
            encode_theta(theta, &self.setup.identities.id_b)?
        };

        let (decoys, decoy_specs) = sample_decoys(config.m, rng)?;

        let logical_counts = RoleCounts {
            n_prime: m_prime.len(),
            auth_a: auth_a.len(),
            auth_b: auth_b.len(),
            theta: theta_qubits.len(),
            decoy: decoys.len(),
        };

        let (sequence, layout) = assemble_sequence(
            PreparedParts {
                payload,
                payload_slots: slots,
                auth_a,
                auth_b,
                theta: theta_qubits,
                decoys,
            },
            rng,
        );
        let (phys_states, phys_layout) = expand_repetition(&sequence, &layout, self.setup.ecc);

        Ok(AlicePrep {
            r,
            check_positions,
            check_values,
            decoy_specs,
            phys_states,
            phys_layout,
            logical_counts,
        })
    }

    /// The quantum channel: device noise first, then the eavesdropper.
    fn transmit<R: RandomSource + ?Sized>(
        &self,
        prep: &AlicePrep,
        rng: &mut R,
    ) -> Result<(Vec<FlyingQubit>, EveRecord)> {
        let mut states: Vec<PureState> = prep.phys_states.clone();
        if let Some(ch) = &self.setup.channel {
            for state in &mut states {
                *state = noise::apply_channel(state, ch, rng)?;
            }
        }
        Ok(adversary::apply_channel_attack(
            &self.setup.attack,
            states,
            rng,
        )?)
    }

    fn logical_of(&self, t: usize, logical_count: usize) -> usize {
        logical_index(t, logical_count, self.setup.ecc)
    }

    /// Majority-vote physical outcomes back into logical bits.
    fn majority_by_logical(&self, outcomes: &[u8], logical_count: usize) -> BitString {
        let mut groups = vec![Vec::with_capacity(self.d); logical_count];
        for (t, &o) in outcomes.iter().enumerate() {
            groups[self.logical_of(t, logical_count)].push(o);
        }
        BitString::new(
            groups
                .iter()
                .map(|g| crate::ecc::decode_majority(g).expect("d is odd"))
                .collect(),
        )
    }

    fn receive<R: RandomSource + ?Sized>(
        &mut self,
        prep: &AlicePrep,
        receiver: &mut ReceiverView,
        eve: &mut EveRecord,
        rng: &mut R,
    ) -> Result<SessionOutcome> {
        let config = self.setup.config;
        let eve_is_alice = matches!(self.setup.attack, AttackModel::ImpersonateAlice);
        let eve_is_bob = matches!(self.setup.attack, AttackModel::ImpersonateBob);

        // ---- Security check --------------------------------------------
        let decoy_positions = prep.phys_layout.positions_of(Role::Decoy);
        let decoy_bases: Vec<BasisKind> = (0..decoy_positions.len())
            .map(|t| prep.decoy_specs[self.logical_of(t, prep.logical_counts.decoy)].basis)
            .collect();
        self.transcript.push(
            Sender::Alice,
            ClassicalMessage::DecoyReveal {
                positions: decoy_positions.clone(),
                bases: decoy_bases.clone(),
            },
        );

        let mut decoy_outcomes = BitString::default();
        for (t, &pos) in decoy_positions.iter().enumerate() {
            let outcome = receiver.measure_at(pos, &decoy_bases[t].qubit_basis(), rng)?;
            decoy_outcomes.push(outcome);
        }
        self.transcript.push(
            Sender::Bob,
            ClassicalMessage::DecoyResults {
                outcomes: decoy_outcomes.clone(),
            },
        );

        let mismatches = decoy_positions
            .iter()
            .enumerate()
            .filter(|(t, _)| {
                let expected = prep.decoy_specs[self.logical_of(*t, prep.logical_counts.decoy)].bit;
                decoy_outcomes.bit(*t) != expected
            })
            .count();
        let decoy_error_rate = mismatches as f64 / decoy_positions.len() as f64;
        let decoy_pass = decoy_error_rate <= config.decoy_error_threshold;
        if !decoy_pass {
            self.transcript.push(
                Sender::Alice,
                ClassicalMessage::Abort {
                    stage: Stage::SecurityCheck,
                    reason: format!("decoy error rate {decoy_error_rate:.4} over threshold"),
                },
            );
            return Ok(self.outcome(
                SessionStatus::AbortedSecurityCheck,
                None,
                decoy_error_rate,
                None,
                None,
                None,
            ));
        }
        self.transcript.push(
            Sender::Alice,
            ClassicalMessage::StageVerdict {
                stage: Stage::SecurityCheck,
                pass: true,
            },
        );

        // ---- Authentication of Alice ------------------------------------
        let auth_a_positions = prep.phys_layout.positions_of(Role::AuthA);
        self.transcript.push(
            Sender::Alice,
            ClassicalMessage::AuthAPositions {
                positions: auth_a_positions.clone(),
            },
        );

        let auth_a_error_rate = if eve_is_bob {
            // An impersonating receiver has no identity to verify against;
            // she waves the stage through.
            None
        } else {
            let id_a = &self.setup.identities.id_a;
            let mut errors = 0usize;
            for (t, &pos) in auth_a_positions.iter().enumerate() {
                let logical = self.logical_of(t, prep.logical_counts.auth_a);
                let basis_bit = id_a.bit(2 * logical);
                let expected = id_a.bit(2 * logical + 1);
                let outcome =
                    receiver.measure_at(pos, &BasisKind::from_bit(basis_bit).qubit_basis(), rng)?;
                if outcome != expected {
                    errors += 1;
                }
            }
            Some(errors as f64 / auth_a_positions.len() as f64)
        };
        let auth_a_pass = auth_a_error_rate.map_or(true, |rate| rate <= config.auth_error_threshold);
        if !auth_a_pass {
            self.transcript.push(
                Sender::Bob,
                ClassicalMessage::Abort {
                    stage: Stage::AuthA,
                    reason: format!(
                        "identity error rate {:.4} over threshold",
                        auth_a_error_rate.unwrap_or(1.0)
                    ),
                },
            );
            return Ok(self.outcome(
                SessionStatus::AbortedAuthA,
                None,
                decoy_error_rate,
                auth_a_error_rate,
                None,
                None,
            ));
        }
        self.transcript.push(
            Sender::Bob,
            ClassicalMessage::StageVerdict {
                stage: Stage::AuthA,
                pass: true,
            },
        );

        // ---- Authentication of Bob ---------------------------------------
        let auth_b_positions = prep.phys_layout.positions_of(Role::AuthB);
        self.transcript.push(
            Sender::Alice,
            ClassicalMessage::AuthBPositions {
                positions: auth_b_positions.clone(),
            },
        );

        let announced_r = if eve_is_bob {
            // Eve measures in uniformly guessed bases and keeps her best
            // guess of the masked identity, but r itself is one-time-pad
            // protected, so she can only announce a uniform guess.
            let count = prep.logical_counts.auth_b;
            let mut outcomes = vec![Vec::with_capacity(self.d); count];
            let bases: Vec<BasisKind> =
                (0..count).map(|_| BasisKind::from_bit(rng.next_bit())).collect();
            for (t, &pos) in auth_b_positions.iter().enumerate() {
                let logical = self.logical_of(t, count);
                let outcome = receiver.measure_at(pos, &bases[logical].qubit_basis(), rng)?;
                outcomes[logical].push(outcome);
            }
            let guess = BitString::new(
                outcomes
                    .iter()
                    .map(|g| crate::ecc::decode_majority(g).expect("d is odd"))
                    .collect(),
            );
            eve.guessed_id_b1 = Some(guess);
            BitString::random(config.k, rng)
        } else {
            let id_b = &self.setup.identities.id_b;
            let count = prep.logical_counts.auth_b;
            let mut outcomes = Vec::with_capacity(auth_b_positions.len());
            for (t, &pos) in auth_b_positions.iter().enumerate() {
                let logical = self.logical_of(t, count);
                let basis = BasisKind::from_bit(id_b.bit(logical)).qubit_basis();
                outcomes.push(receiver.measure_at(pos, &basis, rng)?);
            }
            let id_b1 = self.majority_by_logical(&outcomes, count);
            id_b1.xor(id_b)?
        };
        self.transcript.push(
            Sender::Bob,
            ClassicalMessage::RAnnouncement {
                r: announced_r.clone(),
            },
        );

        let r_match = announced_r == prep.r;
        // A fabricated sender has no r to check; she accepts anything.
        let auth_b_pass = eve_is_alice || r_match;
        if !auth_b_pass {
            self.transcript.push(
                Sender::Alice,
                ClassicalMessage::Abort {
                    stage: Stage::AuthB,
                    reason: "announced r does not match".into(),
                },
            );
            return Ok(self.outcome(
                SessionStatus::AbortedAuthB,
                None,
                decoy_error_rate,
                auth_a_error_rate,
                Some(r_match),
                None,
            ));
        }
        self.transcript.push(
            Sender::Alice,
            ClassicalMessage::StageVerdict {
                stage: Stage::AuthB,
                pass: true,
            },
        );

        // ---- Decoding -----------------------------------------------------
        let theta_positions = prep.phys_layout.positions_of(Role::Theta);
        self.transcript.push(
            Sender::Alice,
            ClassicalMessage::ThetaPositions {
                positions: theta_positions.clone(),
            },
        );

        let theta_count = prep.logical_counts.theta;
        let mut theta_outcomes = Vec::with_capacity(theta_positions.len());
        let theta_bases: Vec<BasisKind> = if eve_is_bob {
            (0..theta_count).map(|_| BasisKind::from_bit(rng.next_bit())).collect()
        } else {
            (0..theta_count)
                .map(|i| BasisKind::from_bit(self.setup.identities.id_b.bit(i)))
                .collect()
        };
        for (t, &pos) in theta_positions.iter().enumerate() {
            let logical = self.logical_of(t, theta_count);
            theta_outcomes.push(receiver.measure_at(pos, &theta_bases[logical].qubit_basis(), rng)?);
        }
        let theta_recovered_bits = self.majority_by_logical(&theta_outcomes, theta_count);
        let theta_decoded = bits_to_theta(&theta_recovered_bits);
        if theta_decoded == 0 || theta_decoded > THETA_CARDINALITY as u32 {
            self.transcript.push(
                Sender::Bob,
                ClassicalMessage::Abort {
                    stage: Stage::Integrity,
                    reason: format!("decoded angle {theta_decoded} is outside the angle set"),
                },
            );
            return Ok(self.outcome(
                SessionStatus::AbortedIntegrity,
                None,
                decoy_error_rate,
                auth_a_error_rate,
                Some(r_match),
                None,
            ));
        }
        let decode_gate = quantum::rotation_gate(theta_decoded as f64)?.inverse();

        // The unannounced positions are the payload, ascending in M' order.
        let mut announced = vec![false; receiver.len()];
        for positions in [
            &decoy_positions,
            &auth_a_positions,
            &auth_b_positions,
            &theta_positions,
        ] {
            for &p in positions.iter() {
                announced[p] = true;
            }
        }
        let payload_positions: Vec<usize> = (0..receiver.len())
            .filter(|&p| !announced[p])
            .collect();

        let z = QubitBasis::computational();
        let mut payload_outcomes = Vec::with_capacity(payload_positions.len());
        for &pos in &payload_positions {
            receiver.apply_gate_at(pos, &decode_gate)?;
            payload_outcomes.push(receiver.measure_at(pos, &z, rng)?);
        }
        let m_prime_recovered =
            self.majority_by_logical(&payload_outcomes, prep.logical_counts.n_prime);

        // ---- Integrity ----------------------------------------------------
        self.transcript.push(
            Sender::Alice,
            ClassicalMessage::CheckReveal {
                positions: prep.check_positions.clone(),
                values: prep.check_values.clone(),
            },
        );
        let observed_checks = BitString::new(
            prep.check_positions
                .iter()
                .map(|&p| m_prime_recovered.bit(p))
                .collect(),
        );
        self.transcript.push(
            Sender::Bob,
            ClassicalMessage::CheckReveal {
                positions: prep.check_positions.clone(),
                values: observed_checks.clone(),
            },
        );
        let check_errors = observed_checks
            .bits()
            .iter()
            .zip(prep.check_values.bits())
            .filter(|(a, b)| a != b)
            .count();
        let check_bit_error_rate = if config.c == 0 {
            0.0
        } else {
            check_errors as f64 / config.c as f64
        };
        let recovered = m_prime_recovered.without_positions(&prep.check_positions);
        if eve_is_bob {
            eve.guessed_message = Some(recovered.clone());
        }
        let pass = check_bit_error_rate <= config.check_bit_error_threshold;
        if !pass {
            self.transcript.push(
                Sender::Bob,
                ClassicalMessage::Abort {
                    stage: Stage::Integrity,
                    reason: format!("check-bit error rate {check_bit_error_rate:.4} over threshold"),
                },
            );
            return Ok(self.outcome(
                SessionStatus::AbortedIntegrity,
                None,
                decoy_error_rate,
                auth_a_error_rate,
                Some(r_match),
                Some(check_bit_error_rate),
            ));
        }
        self.transcript.push(
            Sender::Bob,
            ClassicalMessage::StageVerdict {
                stage: Stage::Integrity,
                pass: true,
            },
        );

        Ok(self.outcome(
            SessionStatus::Delivered,
            Some(recovered),
            decoy_error_rate,
            auth_a_error_rate,
            Some(r_match),
            Some(check_bit_error_rate),
        ))
    }

    #[allow(clippy::too_many_arguments)]
    fn outcome(
        &mut self,
        status: SessionStatus,
        recovered_message: Option<BitString>,
        decoy_error_rate: f64,
        auth_a_error_rate: Option<f64>,
        r_match: Option<bool>,
        check_bit_error_rate: Option<f64>,
    ) -> SessionOutcome {
        SessionOutcome {
            status,
            recovered_message,
            decoy_error_rate,
            auth_a_error_rate,
            r_match,
            check_bit_error_rate,
            transcript: std::mem::take(&mut self.transcript),
        }
    }
}

/// Compare decoded check bits against the revealed ones and strip them.
///
/// Returns the error rate over the check positions, the bare message, and
/// whether the rate clears `threshold`.
pub fn verify_integrity(
    m_prime: &BitString,
    check_positions: &[usize],
    check_values: &BitString,
    threshold: f64,
) -> (f64, BitString, bool) {
    let errors = check_positions
        .iter()
        .zip(check_values.bits())
        .filter(|(&p, &v)| m_prime.bit(p) != v)
        .count();
    let rate = if check_positions.is_empty() {
        0.0
    } else {
        errors as f64 / check_positions.len() as f64
    };
    let message = m_prime.without_positions(check_positions);
    (rate, message, rate <= threshold)
}
