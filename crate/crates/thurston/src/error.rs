//! Crate-wide error type.
//!
//! Domain errors (geometry says no) are distinguished from plumbing errors
//! (I/O, parsing) at the CLI boundary; the library itself only produces
//! domain and range errors.

use thiserror::Error;

/// Errors produced by the geometry kernel.
#[derive(Debug, Error)]
pub enum Error {
    /// A slope string or pair could not be reduced to a valid rational slope.
    #[error("invalid slope `{0}`: expected a reduced fraction p/q (q may be 0 for 1/0)")]
    InvalidSlope(String),

    /// A trace triple failed validation.
    #[error("invalid point: {0}")]
    InvalidPoint(String),

    /// Traces (or other intermediates) left the representable range.
    #[error("numeric range exceeded: {0}")]
    Range(String),

    /// The target point does not lie in the forward cone of the stretch curve.
    #[error("target point is not in the out-envelope of the witness curve")]
    NotInOut,

    /// The maximally stretched set does not look like an isolated simple curve.
    #[error("maximally stretched locus is not an isolated simple curve")]
    NotSimpleCurve,

    /// Geodesics intersect, so no common perpendicular exists.
    #[error("geodesics cross: no common perpendicular")]
    Crossing,

    /// Geodesics are asymptotic (share a boundary endpoint).
    #[error("geodesics share an endpoint at infinity")]
    SharedEndpoint,

    /// Curves do not intersect, so there is no h/v decomposition.
    #[error("curves are disjoint: no h/v decomposition")]
    Disjoint,

    /// The zero tangent vector has no norm direction.
    #[error("zero tangent vector")]
    ZeroVector,
}

pub type Result<T> = std::result::Result<T, Error>;
