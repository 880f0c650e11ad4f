//! Exact computation of magic-state monotones and branch-exact verification of
//! stabilizer resource-conversion protocols.
//!
//! The crate is organized around one scalar type and one state type:
//!
//! * [`cyclotomic::Cyclotomic`] — an exact element of the ring
//!   `R_d = Z[exp(iπ/2^d), 1/2]`, with the Galois-style maps `σ_k`, the
//!   rational norm `N_d`, and the dyadic valuation `v₂`.
//! * [`states::ExactState`] — an n-qubit state vector over that ring, carrying
//!   an exact norm certificate; Pauli spectra, stabilizer nullity `ν`, the
//!   dyadic monotone `μ₂`, and the ring-level obstruction are computed from it
//!   without floating point.
//!
//! On top of these sit:
//!
//! * [`pauli`] — Pauli operators in symplectic bit-pair form and Clifford
//!   tableaux.
//! * [`extent`] — stabilizer-state enumeration and the stabilizer-extent
//!   convex program with dual-witness certification.
//! * [`simulator`] — exact branch-by-branch simulation of circuits with
//!   Clifford gates, diagonal non-Clifford gates, Pauli measurements,
//!   post-selection, and classical feed-forward.
//! * [`canonical`] — compilation of post-selected stabilizer circuits into the
//!   form `C · M_{P₁} ⋯ M_{P_k}`.
//! * [`phasepoly`] — ℤ₈-weighted phase polynomials for diagonal third-level
//!   unitaries, the T-count upper bound τ, and catalytic conversion accounting.
//! * [`protocols`] — an executable catalog of resource-conversion protocols,
//!   each verified exactly on every measurement branch.
//! * [`bounds`] — monotone-ratio conversion bounds, the conversion-rate
//!   tables, and the synthesis lower-bound formulas.

pub mod bounds;
pub mod canonical;
pub mod cyclotomic;
pub mod error;
pub mod extent;
pub mod pauli;
pub mod phasepoly;
pub mod protocols;
pub mod simulator;
pub mod states;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Hard cap on the cyclotomic level `d` (coefficient vectors are `2^d` long).
///
/// Level 3 covers `√T`; quantum-Fourier states on `n` qubits need `d = n−1`,
/// so the cap admits QFT states up to 8 qubits.
pub const MAX_LEVEL: u8 = 7;

/// Hard cap on qubit counts for dense exact states (amplitude vectors are
/// `2^n` long and monotone enumeration is `4^n`).
pub const MAX_QUBITS: usize = 24;

/// Default cap for full-spectrum enumeration (`4^n` expectations).
pub const SPECTRUM_CAP: usize = 8;
