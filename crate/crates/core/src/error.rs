use alloc::string::String;

use crate::lp::FarkasCertificate;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{what}: expected length {expected}, found {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("malformed instance: {0}")]
    MalformedInstance(String),

    #[error("malformed linear system: {0}")]
    MalformedSystem(String),

    #[error("point is not feasible for the instance")]
    InfeasiblePoint,

    #[error("biactive set of size {q} exceeds the configured cap {cap}")]
    BiactiveCapExceeded { q: usize, cap: usize },

    #[error("constraint data is nonlinear and no tangent-cone fixture was supplied")]
    NonlinearWithoutFixture,

    #[error("constraint data or objective is outside the supported affine/convex-quadratic class")]
    UnsupportedData,

    #[error("invalid curve specification: {0}")]
    InvalidPsiSpec(String),

    #[error("non-finite input to psi")]
    NonFiniteInput,

    #[error("closed-form curves cannot be checked exactly; supply a table or linear curve")]
    UndecidableCurve,

    #[error("multipliers missing for biactive pattern #{0}")]
    MissingPattern(usize),

    #[error("multipliers for pattern #{pattern} violate the A(alpha) sign condition at biactive index {index}")]
    PatternSignViolation { pattern: usize, index: usize },

    #[error("Miranda boundary sign condition violated on axis {axis}")]
    BoundarySignViolation { axis: usize },

    #[error("A(alpha) system infeasible for biactive pattern #{pattern}")]
    AlphaInfeasible {
        pattern: usize,
        certificate: FarkasCertificate,
    },

    #[error("internal consistency check failed: {0}")]
    Internal(&'static str),
}
