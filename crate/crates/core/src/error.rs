use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid factor permutation")]
    InvalidPermutation,

    #[error("invalid factor shape: {0}")]
    InvalidShape(String),

    #[error("matrix is not unitary (residual {0:e})")]
    NotUnitary(f64),

    #[error("matrix is not Hermitian (residual {0:e})")]
    NotHermitian(f64),

    #[error("imaginary residue {0:e} on a quantity that must be real")]
    ImaginaryResidue(f64),

    #[error("gate dimension N = {0} is degenerate: the second Haar moment needs N >= 2")]
    DegenerateDimension(usize),

    #[error("slot {0} is not a variable gate")]
    NotVariable(usize),

    #[error("index {index} out of range (count {count})")]
    IndexOutOfRange { index: usize, count: usize },

    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),

    #[error("invalid gate assignment: {0}")]
    InvalidAssignment(String),

    #[error("tangent vector is based at a different point")]
    BasePointMismatch,

    #[error("insufficient samples: {found} < {required}")]
    InsufficientSamples { required: usize, found: usize },

    #[error("expected exactly {expected} variable slots, found {found}")]
    SlotCount { expected: usize, found: usize },

    #[error("register dimension {dim} exceeds the dense-simulation limit {limit}")]
    DimensionLimit { dim: usize, limit: usize },

    #[error("non-finite cost encountered")]
    NonFiniteCost,

    #[error("identity violated: {0}")]
    Violation(String),
}
