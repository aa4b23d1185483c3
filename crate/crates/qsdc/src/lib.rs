//! Deterministic simulator and analysis laboratory for a single-basis QSDC
//! protocol with mutual authentication.
//!
//! The crate is organized around the protocol's lifecycle:
//!
//! - [`quantum`] — exact qubit/ancilla state vectors, rotations, measurement;
//! - [`protocol`] — Alice's sequence assembly, the decoy security check,
//!   mutual authentication, and message decoding with a full transcript;
//! - [`adversary`] — pluggable eavesdropper strategies and their analytic
//!   detection bounds;
//! - [`noise`] — identity-gate channel errors, T1 decay, readout flips,
//!   calibration offsets, and the success-probability curve fit;
//! - [`ecc`] — repetition coding with logical-error and threshold calculators;
//! - [`analysis`] — seeded Monte Carlo batches, confidence intervals, and
//!   closed-form comparison reports;
//! - [`cli`] — the `qsdc` command-line frontend.

pub mod adversary;
pub mod analysis;
pub mod cli;
pub mod ecc;
pub mod noise;
pub mod protocol;
pub mod quantum;
pub mod rng;
