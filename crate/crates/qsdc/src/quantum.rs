//! Exact linear-algebra substrate: pure states, angle-parameterized qubit
//! bases, small unitaries, Born-rule measurement (analytic and sampled),
//! tensor products and reduced density matrices.
//!
//! Dimensions are tiny by construction (a qubit, a 4-dim ancilla, or their
//! 8-dim joint), so everything is dense `Vec<Complex64>` arithmetic in double
//! precision. Angles are carried in degrees and converted to radians only at
//! trig boundaries.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Norm / probability tolerance for state invariants.
pub const STATE_TOL: f64 = 1e-12;
/// Entrywise tolerance for unitarity and density-matrix invariants.
pub const MATRIX_TOL: f64 = 1e-10;

const SUPPORTED_DIMS: [usize; 3] = [2, 4, 8];

#[derive(Debug, Error, PartialEq)]
pub enum QuantumError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("unsupported dimension {0} (expected 2, 4 or 8)")]
    UnsupportedDimension(usize),
    #[error("state is not normalized: |norm^2 - 1| = {0:e}")]
    NotNormalized(f64),
    #[error("matrix is not unitary (max |U†U - I| entry = {0:e})")]
    NotUnitary(f64),
    #[error("matrix is not a valid density operator: {0}")]
    InvalidDensity(String),
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
}

pub type Result<T> = std::result::Result<T, QuantumError>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn cr(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

// ---------------------------------------------------------------------------
// PureState
// ---------------------------------------------------------------------------

/// A normalized complex amplitude vector over a 2-, 4- or 8-dimensional
/// Hilbert space.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amps: Vec<Complex64>,
}

impl PureState {
    /// Build a state from amplitudes, validating dimension and normalization.
    pub fn new(amps: Vec<Complex64>) -> Result<Self> {
        if !SUPPORTED_DIMS.contains(&amps.len()) {
            return Err(QuantumError::UnsupportedDimension(amps.len()));
        }
        let norm_sq: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > STATE_TOL {
            return Err(QuantumError::NotNormalized((norm_sq - 1.0).abs()));
        }
        Ok(Self { amps })
    }

    /// Basis vector `|index⟩` of the given dimension.
    pub fn basis_vector(dim: usize, index: usize) -> Result<Self> {
        if !SUPPORTED_DIMS.contains(&dim) {
            return Err(QuantumError::UnsupportedDimension(dim));
        }
        assert!(index < dim, "basis index out of range");
        let mut amps = vec![cr(0.0); dim];
        amps[index] = cr(1.0);
        Ok(Self { amps })
    }

    pub fn zero() -> Self {
        Self::basis_vector(2, 0).unwrap()
    }

    pub fn one() -> Self {
        Self::basis_vector(2, 1).unwrap()
    }

    pub fn plus() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self { amps: vec![cr(h), cr(h)] }
    }

    pub fn minus() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self { amps: vec![cr(h), cr(-h)] }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    /// Inner product `⟨self|other⟩`.
    pub fn overlap(&self, other: &Self) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(QuantumError::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Squared overlap `|⟨self|other⟩|²`; 1 means equal up to global phase.
    pub fn fidelity(&self, other: &Self) -> Result<f64> {
        Ok(self.overlap(other)?.norm_sqr())
    }

    /// Equality up to an unobservable global phase.
    pub fn approx_eq_up_to_phase(&self, other: &Self, tol: f64) -> bool {
        match self.fidelity(other) {
            Ok(f) => (f - 1.0).abs() <= tol,
            Err(_) => false,
        }
    }
}

impl Serialize for PureState {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = self.amps.iter().map(|a| [a.re, a.im]).collect();
        pairs.serialize(s)
    }
}

impl<'de> Deserialize<'de> for PureState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        let amps = pairs.iter().map(|p| c(p[0], p[1])).collect();
        PureState::new(amps).map_err(serde::de::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// QubitBasis
// ---------------------------------------------------------------------------

/// The orthonormal pair `{U_θ|0⟩, U_θ|1⟩}`, identified by the rotation angle
/// in degrees. 0° is the computational basis, 45° the diagonal one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitBasis {
    angle_deg: f64,
}

impl QubitBasis {
    /// Any finite angle is accepted and reduced into `[0, 360)`.
    pub fn from_degrees(angle_deg: f64) -> Result<Self> {
        if !angle_deg.is_finite() {
            return Err(QuantumError::NonFinite("basis angle"));
        }
        Ok(Self {
            angle_deg: angle_deg.rem_euclid(360.0),
        })
    }

    pub fn computational() -> Self {
        Self { angle_deg: 0.0 }
    }

    pub fn diagonal() -> Self {
        Self { angle_deg: 45.0 }
    }

    pub fn angle_deg(&self) -> f64 {
        self.angle_deg
    }

    /// The two basis vectors, in outcome order.
    pub fn vectors(&self) -> (PureState, PureState) {
        let g = rotation_gate(self.angle_deg).expect("finite angle");
        (
            apply(&g, &PureState::zero()).expect("dim 2"),
            apply(&g, &PureState::one()).expect("dim 2"),
        )
    }
}

// ---------------------------------------------------------------------------
// Unitary
// ---------------------------------------------------------------------------

/// A dense `dim × dim` unitary matrix (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct Unitary {
    dim: usize,
    entries: Vec<Complex64>,
}

impl Unitary {
    /// Validates `U†U = I` entrywise to [`MATRIX_TOL`].
    pub fn new(dim: usize, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(QuantumError::DimensionMismatch {
                left: dim * dim,
                right: entries.len(),
            });
        }
        let u = Self { dim, entries };
        let dev = u.unitarity_deviation();
        if dev > MATRIX_TOL {
            return Err(QuantumError::NotUnitary(dev));
        }
        Ok(u)
    }

    fn unitarity_deviation(&self) -> f64 {
        let n = self.dim;
        let mut max_dev: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut acc = cr(0.0);
                for k in 0..n {
                    acc += self.entries[k * n + i].conj() * self.entries[k * n + j];
                }
                let expected = if i == j { cr(1.0) } else { cr(0.0) };
                max_dev = max_dev.max((acc - expected).norm());
            }
        }
        max_dev
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![cr(0.0); dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = cr(1.0);
        }
        Self { dim, entries }
    }

    /// Pauli X.
    pub fn pauli_x() -> Self {
        Self {
            dim: 2,
            entries: vec![cr(0.0), cr(1.0), cr(1.0), cr(0.0)],
        }
    }

    /// The real matrix `iσ_y = [[0, 1], [-1, 0]]`.
    pub fn pauli_iy() -> Self {
        Self {
            dim: 2,
            entries: vec![cr(0.0), cr(1.0), cr(-1.0), cr(0.0)],
        }
    }

    /// Pauli Z.
    pub fn pauli_z() -> Self {
        Self {
            dim: 2,
            entries: vec![cr(1.0), cr(0.0), cr(0.0), cr(-1.0)],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim + col]
    }

    /// Conjugate transpose; for a unitary this is the inverse.
    pub fn inverse(&self) -> Self {
        let n = self.dim;
        let mut entries = vec![cr(0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                entries[i * n + j] = self.entries[j * n + i].conj();
            }
        }
        Self { dim: n, entries }
    }

    /// Matrix product `self · other`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(QuantumError::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        let n = self.dim;
        let mut entries = vec![cr(0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = cr(0.0);
                for k in 0..n {
                    acc += self.entries[i * n + k] * other.entries[k * n + j];
                }
                entries[i * n + j] = acc;
            }
        }
        Ok(Self { dim: n, entries })
    }
}

/// The paper's encoding rotation: `[[cos θ, −sin θ], [sin θ, cos θ]]` with θ
/// given in degrees.
pub fn rotation_gate(theta_deg: f64) -> Result<Unitary> {
    if !theta_deg.is_finite() {
        return Err(QuantumError::NonFinite("rotation angle"));
    }
    let t = theta_deg.to_radians();
    let (s, co) = t.sin_cos();
    Ok(Unitary {
        dim: 2,
        entries: vec![cr(co), cr(-s), cr(s), cr(co)],
    })
}

/// Lift a single-qubit unitary to the qubit factor of a qubit ⊗ 4-dim-ancilla
/// joint space: `u ⊗ I₄`.
pub fn lift_to_joint(u: &Unitary) -> Result<Unitary> {
    if u.dim != 2 {
        return Err(QuantumError::DimensionMismatch { left: 2, right: u.dim });
    }
    let mut entries = vec![cr(0.0); 64];
    for qi in 0..2 {
        for qj in 0..2 {
            for a in 0..4 {
                entries[(qi * 4 + a) * 8 + (qj * 4 + a)] = u.entry(qi, qj);
            }
        }
    }
    Ok(Unitary { dim: 8, entries })
}

/// Matrix–vector application. The output of a valid unitary on a valid state
/// is normalized by construction.
pub fn apply(u: &Unitary, s: &PureState) -> Result<PureState> {
    if u.dim != s.dim() {
        return Err(QuantumError::DimensionMismatch {
            left: u.dim,
            right: s.dim(),
        });
    }
    let n = u.dim;
    let mut amps = vec![cr(0.0); n];
    for (i, amp) in amps.iter_mut().enumerate() {
        for (j, input) in s.amps.iter().enumerate() {
            *amp += u.entries[i * n + j] * input;
        }
    }
    debug_assert!(
        (amps.iter().map(|a| a.norm_sqr()).sum::<f64>() - 1.0).abs() <= STATE_TOL,
        "unitary application should preserve the norm"
    );
    Ok(PureState { amps })
}

// ---------------------------------------------------------------------------
// Measurement
// ---------------------------------------------------------------------------

/// Born-rule outcome probabilities of measuring a qubit in `basis`.
///
/// This is the analytic oracle; [`measure`] samples from it.
pub fn outcome_distribution(s: &PureState, basis: &QubitBasis) -> Result<(f64, f64)> {
    if s.dim() != 2 {
        return Err(QuantumError::DimensionMismatch { left: 2, right: s.dim() });
    }
    let (b0, b1) = basis.vectors();
    let p0 = b0.overlap(s)?.norm_sqr();
    let p1 = b1.overlap(s)?.norm_sqr();
    debug_assert!((p0 + p1 - 1.0).abs() <= STATE_TOL);
    Ok((p0, p1))
}

/// Projective measurement of a qubit: samples an outcome and collapses the
/// state to the corresponding basis vector.
pub fn measure<R: crate::rng::RandomSource + ?Sized>(
    s: &PureState,
    basis: &QubitBasis,
    rng: &mut R,
) -> Result<(u8, PureState)> {
    let (p0, _) = outcome_distribution(s, basis)?;
    let (b0, b1) = basis.vectors();
    if rng.next_f64() < p0 {
        Ok((0, b0))
    } else {
        Ok((1, b1))
    }
}

/// Kronecker product of two states.
pub fn tensor(a: &PureState, b: &PureState) -> Result<PureState> {
    let dim = a.dim() * b.dim();
    if !SUPPORTED_DIMS.contains(&dim) {
        return Err(QuantumError::UnsupportedDimension(dim));
    }
    let mut amps = Vec::with_capacity(dim);
    for x in &a.amps {
        for y in &b.amps {
            amps.push(x * y);
        }
    }
    Ok(PureState { amps })
}

/// Project the qubit factor of an 8-dim joint state onto a basis outcome.
///
/// Returns the Born probability of that outcome and the renormalized ancilla
/// component, or `None` when the probability vanishes.
pub fn project_qubit(
    joint: &PureState,
    basis: &QubitBasis,
    outcome: u8,
) -> Result<Option<(f64, PureState)>> {
    if joint.dim() != 8 {
        return Err(QuantumError::DimensionMismatch { left: 8, right: joint.dim() });
    }
    let (b0, b1) = basis.vectors();
    let bv = if outcome == 0 { b0 } else { b1 };
    // Component ⟨b_o|⊗I₄ applied to the joint.
    let mut comp = vec![cr(0.0); 4];
    for (a, slot) in comp.iter_mut().enumerate() {
        for q in 0..2 {
            *slot += bv.amps[q].conj() * joint.amps[q * 4 + a];
        }
    }
    let prob: f64 = comp.iter().map(|x| x.norm_sqr()).sum();
    if prob <= 0.0 {
        return Ok(None);
    }
    let scale = cr(1.0 / prob.sqrt());
    let anc = PureState {
        amps: comp.into_iter().map(|x| x * scale).collect(),
    };
    Ok(Some((prob, anc)))
}

/// Outcome probabilities of measuring only the qubit factor of a joint state.
pub fn partial_outcome_probs(joint: &PureState, basis: &QubitBasis) -> Result<(f64, f64)> {
    let p0 = project_qubit(joint, basis, 0)?.map_or(0.0, |(p, _)| p);
    let p1 = project_qubit(joint, basis, 1)?.map_or(0.0, |(p, _)| p);
    debug_assert!((p0 + p1 - 1.0).abs() <= 1e-9);
    Ok((p0, p1))
}

/// Measure the qubit factor of an 8-dim joint state, collapsing the whole
/// state to `basis_vector(outcome) ⊗ ancilla`.
pub fn partial_measure<R: crate::rng::RandomSource + ?Sized>(
    joint: &PureState,
    basis: &QubitBasis,
    rng: &mut R,
) -> Result<(u8, PureState)> {
    let (p0, _) = partial_outcome_probs(joint, basis)?;
    let outcome = if rng.next_f64() < p0 { 0 } else { 1 };
    let (_, anc) = project_qubit(joint, basis, outcome)?
        .expect("sampled outcome has positive probability");
    let (b0, b1) = basis.vectors();
    let bv = if outcome == 0 { b0 } else { b1 };
    Ok((outcome, tensor(&bv, &anc)?))
}

// ---------------------------------------------------------------------------
// Density matrices
// ---------------------------------------------------------------------------

/// Which factor of a qubit ⊗ ancilla joint state to keep when tracing out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Subsystem {
    Qubit,
    Ancilla,
}

/// A Hermitian, unit-trace, positive-semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dim: usize,
    entries: Vec<Complex64>,
}

impl DensityMatrix {
    pub fn new(dim: usize, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(QuantumError::DimensionMismatch {
                left: dim * dim,
                right: entries.len(),
            });
        }
        let m = Self { dim, entries };
        for i in 0..dim {
            for j in 0..dim {
                let dev = (m.entry(i, j) - m.entry(j, i).conj()).norm();
                if dev > MATRIX_TOL {
                    return Err(QuantumError::InvalidDensity(format!(
                        "not Hermitian, deviation {dev:e} at ({i},{j})"
                    )));
                }
            }
        }
        let trace: Complex64 = (0..dim).map(|i| m.entry(i, i)).sum();
        if (trace - cr(1.0)).norm() > MATRIX_TOL {
            return Err(QuantumError::InvalidDensity(format!(
                "trace {trace} is not 1"
            )));
        }
        let min_eig = m
            .eigenvalues()
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -MATRIX_TOL {
            return Err(QuantumError::InvalidDensity(format!(
                "negative eigenvalue {min_eig:e}"
            )));
        }
        Ok(m)
    }

    pub fn from_pure(s: &PureState) -> Self {
        let n = s.dim();
        let mut entries = vec![cr(0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                entries[i * n + j] = s.amps[i] * s.amps[j].conj();
            }
        }
        Self { dim: n, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim + col]
    }

    /// Real eigenvalues of this Hermitian matrix.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(self.dim, &self.entries)
    }
}

fn hermitian_eigenvalues(dim: usize, entries: &[Complex64]) -> Vec<f64> {
    let m = nalgebra::DMatrix::from_fn(dim, dim, |i, j| entries[i * dim + j]);
    m.symmetric_eigen().eigenvalues.iter().copied().collect()
}

/// Partial trace of an 8-dim joint pure state onto one factor.
pub fn reduced_density(joint: &PureState, keep: Subsystem) -> Result<DensityMatrix> {
    if joint.dim() != 8 {
        return Err(QuantumError::DimensionMismatch { left: 8, right: joint.dim() });
    }
    let amp = |q: usize, a: usize| joint.amps[q * 4 + a];
    match keep {
        Subsystem::Qubit => {
            let mut entries = vec![cr(0.0); 4];
            for i in 0..2 {
                for j in 0..2 {
                    let mut acc = cr(0.0);
                    for a in 0..4 {
                        acc += amp(i, a) * amp(j, a).conj();
                    }
                    entries[i * 2 + j] = acc;
                }
            }
            Ok(DensityMatrix { dim: 2, entries })
        }
        Subsystem::Ancilla => {
            let mut entries = vec![cr(0.0); 16];
            for i in 0..4 {
                for j in 0..4 {
                    let mut acc = cr(0.0);
                    for q in 0..2 {
                        acc += amp(q, i) * amp(q, j).conj();
                    }
                    entries[i * 4 + j] = acc;
                }
            }
            Ok(DensityMatrix { dim: 4, entries })
        }
    }
}

/// Trace distance `½ Σ |eig(ρ₁ − ρ₂)|`, in `[0, 1]`.
pub fn trace_distance(r1: &DensityMatrix, r2: &DensityMatrix) -> Result<f64> {
    if r1.dim != r2.dim {
        return Err(QuantumError::DimensionMismatch {
            left: r1.dim,
            right: r2.dim,
        });
    }
    let diff: Vec<Complex64> = r1
        .entries
        .iter()
        .zip(&r2.entries)
        .map(|(a, b)| a - b)
        .collect();
    let sum: f64 = hermitian_eigenvalues(r1.dim, &diff)
        .into_iter()
        .map(f64::abs)
        .sum();
    Ok(0.5 * sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{RandomSource, SessionRng};
    use approx::assert_abs_diff_eq;

    fn random_qubit(rng: &mut SessionRng) -> PureState {
        // Uniform Haar-ish is unnecessary; any normalized state will do.
        let a = c(rng.next_f64() - 0.5, rng.next_f64() - 0.5);
        let b = c(rng.next_f64() - 0.5, rng.next_f64() - 0.5);
        let norm = (a.norm_sqr() + b.norm_sqr()).sqrt();
        PureState::new(vec![a / norm, b / norm]).unwrap()
    }

    #[test]
    fn rotation_gate_at_zero_is_identity() {
        let g = rotation_gate(0.0).unwrap();
        assert_eq!(g, Unitary::identity(2));
    }

    #[test]
    fn rotation_gate_quarter_turn_maps_zero_to_one() {
        let g = rotation_gate(90.0).unwrap();
        let s = apply(&g, &PureState::zero()).unwrap();
        assert!(s.approx_eq_up_to_phase(&PureState::one(), STATE_TOL));
        assert_abs_diff_eq!(g.entry(0, 1).re, -1.0, epsilon = STATE_TOL);
    }

    #[test]
    fn rotation_gate_seven_degrees_amplitudes() {
        // Oracle: high-precision cos/sin of 7 degrees.
        let g = rotation_gate(7.0).unwrap();
        let s = apply(&g, &PureState::zero()).unwrap();
        assert_abs_diff_eq!(s.amplitudes()[0].re, 0.992546151641322, epsilon = 1e-12);
        assert_abs_diff_eq!(s.amplitudes()[1].re, 0.121869343405147, epsilon = 1e-12);
    }

    #[test]
    fn rotation_gate_rejects_non_finite() {
        assert!(matches!(
            rotation_gate(f64::NAN),
            Err(QuantumError::NonFinite(_))
        ));
    }

    #[test]
    fn apply_identity_fixes_one() {
        let s = apply(&Unitary::identity(2), &PureState::one()).unwrap();
        assert_eq!(s, PureState::one());
    }

    #[test]
    fn apply_45_maps_zero_to_plus() {
        let s = apply(&rotation_gate(45.0).unwrap(), &PureState::zero()).unwrap();
        assert!(s.approx_eq_up_to_phase(&PureState::plus(), STATE_TOL));
    }

    #[test]
    fn apply_dimension_mismatch_errors() {
        let joint = tensor(&PureState::zero(), &PureState::basis_vector(4, 0).unwrap()).unwrap();
        assert!(apply(&Unitary::identity(2), &joint).is_err());
    }

    #[test]
    fn inverse_composition_round_trips_random_states() {
        let mut rng = SessionRng::new(11);
        for _ in 0..50 {
            let theta = rng.next_index(360) as f64 + 1.0;
            let g = rotation_gate(theta).unwrap();
            let back = g.inverse().compose(&g).unwrap();
            let s = random_qubit(&mut rng);
            let rt = apply(&back, &s).unwrap();
            assert!(rt.approx_eq_up_to_phase(&s, STATE_TOL));
        }
    }

    #[test]
    fn rotation_inverse_is_negative_angle() {
        for theta in 1..=360 {
            let g = rotation_gate(theta as f64).unwrap();
            let inv = rotation_gate(-(theta as f64)).unwrap();
            let prod = g.compose(&inv).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert!((prod.entry(i, j) - cr(expected)).norm() < STATE_TOL);
                }
            }
        }
    }

    #[test]
    fn basis_vectors_are_orthonormal_for_all_angles() {
        for angle in 0..360 {
            let b = QubitBasis::from_degrees(angle as f64).unwrap();
            let (v0, v1) = b.vectors();
            assert!(v0.overlap(&v1).unwrap().norm() < STATE_TOL);
            assert_abs_diff_eq!(v0.overlap(&v0).unwrap().re, 1.0, epsilon = STATE_TOL);
            assert_abs_diff_eq!(v1.overlap(&v1).unwrap().re, 1.0, epsilon = STATE_TOL);
        }
    }

    #[test]
    fn outcome_distribution_on_eigenstate() {
        let (p0, p1) = outcome_distribution(&PureState::zero(), &QubitBasis::computational()).unwrap();
        assert_abs_diff_eq!(p0, 1.0, epsilon = STATE_TOL);
        assert_abs_diff_eq!(p1, 0.0, epsilon = STATE_TOL);
    }

    #[test]
    fn outcome_distribution_matches_rotated_projection_rows() {
        // |0⟩ measured in the θ₀ basis → (cos²θ₀, sin²θ₀).
        for theta in [7.0, 30.0, 137.0, 271.0] {
            let b = QubitBasis::from_degrees(theta).unwrap();
            let (p0, p1) = outcome_distribution(&PureState::zero(), &b).unwrap();
            let t = (theta as f64).to_radians();
            assert_abs_diff_eq!(p0, t.cos().powi(2), epsilon = STATE_TOL);
            assert_abs_diff_eq!(p1, t.sin().powi(2), epsilon = STATE_TOL);
        }
    }

    #[test]
    fn outcome_distribution_of_plus_in_rotated_basis() {
        // |+⟩ in basis θ₀ → (½(cosθ₀+sinθ₀)², ½(cosθ₀−sinθ₀)²).
        for theta in [7.0, 45.0, 200.0] {
            let b = QubitBasis::from_degrees(theta).unwrap();
            let (p0, p1) = outcome_distribution(&PureState::plus(), &b).unwrap();
            let t = (theta as f64).to_radians();
            let (s, co) = t.sin_cos();
            assert_abs_diff_eq!(p0, 0.5 * (co + s).powi(2), epsilon = STATE_TOL);
            assert_abs_diff_eq!(p1, 0.5 * (co - s).powi(2), epsilon = STATE_TOL);
        }
    }

    #[test]
    fn basis_change_coefficients_for_all_angles() {
        // Expressing |0⟩,|1⟩,|+⟩,|−⟩ in {|x₀⟩,|y₀⟩} reproduces the projection
        // coefficients of the rotated-frame expansion at every integer angle.
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for deg in 0..360 {
            let t = (deg as f64).to_radians();
            let (s, co) = t.sin_cos();
            let basis = QubitBasis::from_degrees(deg as f64).unwrap();
            let (x0, y0) = basis.vectors();
            let cases: [(&PureState, f64, f64); 4] = [
                (&PureState::zero(), co, -s),
                (&PureState::one(), s, co),
                (&PureState::plus(), h * (co + s), h * (co - s)),
                (&PureState::minus(), h * (co - s), -h * (co + s)),
            ];
            for (state, cx, cy) in cases {
                assert_abs_diff_eq!(x0.overlap(state).unwrap().re, cx, epsilon = STATE_TOL);
                assert_abs_diff_eq!(y0.overlap(state).unwrap().re, cy, epsilon = STATE_TOL);
            }
        }
    }

    #[test]
    fn measure_eigenstate_is_deterministic() {
        let mut rng = SessionRng::new(3);
        for _ in 0..100 {
            let (o, post) = measure(&PureState::minus(), &QubitBasis::diagonal(), &mut rng).unwrap();
            assert_eq!(o, 1);
            assert!(post.approx_eq_up_to_phase(&PureState::minus(), STATE_TOL));
        }
    }

    #[test]
    fn measure_frequencies_track_distribution() {
        let mut rng = SessionRng::new(4);
        let n = 100_000usize;

        let mut zeros = 0u32;
        for _ in 0..n {
            let (o, _) = measure(&PureState::plus(), &QubitBasis::computational(), &mut rng).unwrap();
            if o == 0 {
                zeros += 1;
            }
        }
        assert!((zeros as f64 / n as f64 - 0.5).abs() < 0.01);

        let tilted = apply(&rotation_gate(7.0).unwrap(), &PureState::zero()).unwrap();
        let (p0, _) = outcome_distribution(&tilted, &QubitBasis::computational()).unwrap();
        let mut hits = 0u32;
        for _ in 0..n {
            let (o, _) = measure(&tilted, &QubitBasis::computational(), &mut rng).unwrap();
            if o == 0 {
                hits += 1;
            }
        }
        let freq = hits as f64 / n as f64;
        assert!((freq - p0).abs() < 0.005, "freq {freq} vs p0 {p0}");
    }

    #[test]
    fn tensor_basis_index_arithmetic() {
        let e0 = PureState::basis_vector(4, 0).unwrap();
        let e3 = PureState::basis_vector(4, 3).unwrap();
        let t0 = tensor(&PureState::zero(), &e0).unwrap();
        assert_abs_diff_eq!(t0.amplitudes()[0].re, 1.0, epsilon = STATE_TOL);
        let t7 = tensor(&PureState::one(), &e3).unwrap();
        assert_abs_diff_eq!(t7.amplitudes()[7].re, 1.0, epsilon = STATE_TOL);
        let tp = tensor(&PureState::plus(), &e0).unwrap();
        assert_abs_diff_eq!(tp.amplitudes()[0].re, std::f64::consts::FRAC_1_SQRT_2, epsilon = STATE_TOL);
        assert_abs_diff_eq!(tp.amplitudes()[4].re, std::f64::consts::FRAC_1_SQRT_2, epsilon = STATE_TOL);
    }

    #[test]
    fn tensor_rejects_unsupported_dimension() {
        let e0 = PureState::basis_vector(4, 0).unwrap();
        assert!(tensor(&e0, &e0).is_err());
    }

    #[test]
    fn partial_measure_of_product_state_is_deterministic() {
        let mut rng = SessionRng::new(5);
        let joint = tensor(&PureState::zero(), &PureState::basis_vector(4, 0).unwrap()).unwrap();
        let (o, collapsed) = partial_measure(&joint, &QubitBasis::computational(), &mut rng).unwrap();
        assert_eq!(o, 0);
        assert!(collapsed.approx_eq_up_to_phase(&joint, STATE_TOL));
    }

    #[test]
    fn reduced_density_of_product_state_is_projector() {
        let e2 = PureState::basis_vector(4, 2).unwrap();
        let joint = tensor(&PureState::zero(), &e2).unwrap();
        let rho = reduced_density(&joint, Subsystem::Ancilla).unwrap();
        let expected = DensityMatrix::from_pure(&e2);
        for i in 0..4 {
            for j in 0..4 {
                assert!((rho.entry(i, j) - expected.entry(i, j)).norm() < STATE_TOL);
            }
        }
    }

    #[test]
    fn reduced_density_of_maximally_entangled_pair_is_mixed() {
        // (|0⟩e₀ + |1⟩e₁)/√2 embedded in C²⊗C⁴; qubit marginal is I/2.
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut amps = vec![cr(0.0); 8];
        amps[0] = cr(h);
        amps[5] = cr(h);
        let joint = PureState::new(amps).unwrap();
        let rho = reduced_density(&joint, Subsystem::Qubit).unwrap();
        assert!((rho.entry(0, 0) - cr(0.5)).norm() < STATE_TOL);
        assert!((rho.entry(1, 1) - cr(0.5)).norm() < STATE_TOL);
        assert!(rho.entry(0, 1).norm() < STATE_TOL);
    }

    #[test]
    fn trace_distance_extremes() {
        let r0 = DensityMatrix::from_pure(&PureState::zero());
        let r1 = DensityMatrix::from_pure(&PureState::one());
        let rp = DensityMatrix::from_pure(&PureState::plus());
        assert_abs_diff_eq!(trace_distance(&r0, &r0).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(trace_distance(&r0, &r1).unwrap(), 1.0, epsilon = 1e-10);
        // Closed form for two pure qubit states: √(1 − |⟨a|b⟩|²) = 1/√2.
        assert_abs_diff_eq!(
            trace_distance(&r0, &rp).unwrap(),
            std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-10
        );
    }

    #[test]
    fn density_matrix_validation_rejects_bad_trace() {
        let entries = vec![cr(0.9), cr(0.0), cr(0.0), cr(0.2)];
        assert!(DensityMatrix::new(2, entries).is_err());
    }

    #[test]
    fn normalization_preserved_by_core_ops() {
        let mut rng = SessionRng::new(6);
        for _ in 0..50 {
            let s = random_qubit(&mut rng);
            let theta = rng.next_index(360) as f64 + 1.0;
            let rotated = apply(&rotation_gate(theta).unwrap(), &s).unwrap();
            let norm: f64 = rotated.amplitudes().iter().map(|a| a.norm_sqr()).sum();
            assert_abs_diff_eq!(norm, 1.0, epsilon = STATE_TOL);

            let joint = tensor(&s, &PureState::basis_vector(4, rng.next_index(4)).unwrap()).unwrap();
            let (_, collapsed) = partial_measure(&joint, &QubitBasis::diagonal(), &mut rng).unwrap();
            let norm: f64 = collapsed.amplitudes().iter().map(|a| a.norm_sqr()).sum();
            assert_abs_diff_eq!(norm, 1.0, epsilon = STATE_TOL);
        }
    }
}
