use thiserror::Error;

/// Errors raised by the operator kernels.
///
/// Failed identity checks are not errors; they are reported as data through
/// [`crate::fundamental::IdentityReport`] and [`crate::models::ModelReport`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GmlError {
    #[error("matrix is not Hermitian (asymmetry {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },
    #[error("matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("operator is not a contraction (norm {norm:.12})")]
    NotAContraction { norm: f64 },
    #[error("iteration did not converge after {iterations} steps (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("structured singular value {mu:.6} exceeds one")]
    MuExceedsOne { mu: f64 },
    #[error("pencil commutativity conditions violated: {0}")]
    ConditionsViolated(String),
    #[error("fundamental equations not solvable (residual {residual:.3e} > {tolerance:.3e})")]
    NotSolvable { residual: f64, tolerance: f64 },
    #[error("unknown identity id `{0}`")]
    UnknownIdentity(String),
    #[error("point outside the open unit disk (|z| = {modulus})")]
    OutsideDisk { modulus: f64 },
    #[error("operator is not unitary (defect {defect:.3e})")]
    NotUnitary { defect: f64 },
    #[error("distinguished contraction is not pure")]
    NotPure,
    #[error("distinguished contraction is not completely non-unitary")]
    NotCnu,
    #[error("adjoint commutation hypothesis violated (max defect {defect:.3e})")]
    HypothesisViolated { defect: f64 },
    #[error("Q is singular on ran A (smallest singular value {min_singular:.3e})")]
    SingularQ { min_singular: f64 },
    #[error("alpha must lie in the open unit disk (|alpha| = {modulus})")]
    AlphaNotInDisk { modulus: f64 },
    #[error("alpha must be nonzero for the mismatch to be visible")]
    DegenerateAlpha,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, GmlError>;
