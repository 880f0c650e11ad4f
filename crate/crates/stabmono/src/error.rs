//! Crate-wide error type.

use thiserror::Error;

/// Everything that can go wrong across the library.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Two operands were defined on different qubit counts.
    #[error("qubit count mismatch: {0} vs {1}")]
    SizeMismatch(usize, usize),

    /// A qubit index fell outside the register.
    #[error("qubit index {index} out of range for {n} qubits")]
    IndexOutOfRange { index: usize, n: usize },

    /// A qubit count exceeded a configured cap.
    #[error("qubit count {0} exceeds the configured cap {1}")]
    QubitCap(usize, usize),

    /// A cyclotomic level exceeded the configured cap.
    #[error("cyclotomic level {0} exceeds the configured cap {1}")]
    LevelCap(u8, u8),

    /// `σ_k` is only defined for odd `k`.
    #[error("sigma map requires odd k, got {0}")]
    SigmaEven(i64),

    /// An operation required a Hermitian Pauli operator.
    #[error("Pauli operator {0} is not Hermitian")]
    NonHermitian(String),

    /// A named gate was not recognized.
    #[error("unknown gate `{0}`")]
    UnknownGate(String),

    /// Bad user input (state expressions, circuit files, CLI payloads).
    #[error("parse error at {pos}: {msg}")]
    Parse { pos: String, msg: String },

    /// A constructor or instruction received invalid parameters.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A post-selected measurement outcome has exact probability zero.
    #[error("post-selected outcome has probability zero (annihilation) at {0}")]
    Annihilation(String),

    /// Discarding a qubit that is still entangled with the rest.
    #[error("cannot discard qubit {0}: not exactly disentangled")]
    EntangledDiscard(usize),

    /// Exhaustive branching exceeded the tree guard.
    #[error("branching measurement count {0} exceeds the tree guard {1}")]
    TreeGuard(usize, usize),

    /// The convex solver did not converge within its iteration budget.
    #[error("extent solver did not converge: primal residual {residual:.3e}, gap {gap:.3e} after {iterations} iterations")]
    SolverNonConvergence {
        residual: f64,
        gap: f64,
        iterations: usize,
    },

    /// A verification predicate failed (protocol branch, canonical form, ...).
    #[error("verification failed: {0}")]
    VerificationFailed(String),

    /// Internal consistency violation that indicates a bug, reported instead
    /// of panicking so the CLI can exit with a diagnostic.
    #[error("internal invariant violated: {0}")]
    Internal(String),

    /// An I/O failure interacting with files (message-only to stay `Clone`).
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Per the CLI contract: 0 success, 1 verification failure, 2 input
    /// error, 3 solver non-convergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::VerificationFailed(_) | Error::Annihilation(_) => 1,
            Error::SolverNonConvergence { .. } => 3,
            Error::Internal(_) => 1,
            _ => 2,
        }
    }
}
