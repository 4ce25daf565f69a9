//! Crate-wide error type.
//!
//! Numerical routines fail loudly: series that do not meet their
//! truncation contract, arguments inside pole guards, and matrices too
//! ill-conditioned to trust are all surfaced as typed errors rather
//! than silently returning garbage.

use thiserror::Error;

/// Alias used by every fallible operation in the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Modulus outside the upper half plane, or non-finite.
    #[error("invalid modular parameter: {0}")]
    InvalidModularParam(String),

    /// A non-finite floating-point argument where a finite one is required.
    #[error("non-finite input: {0}")]
    NonFiniteInput(&'static str),

    /// A series or product hit its term cap before meeting the
    /// truncation contract (three consecutive terms below 1e-16 of the
    /// running partial sum).
    #[error("series failed to converge within {terms} terms")]
    SeriesDivergence { terms: usize },

    /// Argument closer to a pole than the configured guard.
    #[error("argument within pole guard: |distance| = {distance:.3e} < {guard:.3e}")]
    PoleProximity { distance: f64, guard: f64 },

    /// Structurally invalid input: unordered configuration, point
    /// outside the domain, time outside [0, t*), mismatched lengths.
    #[error("domain violation: {0}")]
    DomainViolation(String),

    /// Exactly singular matrix in a determinant or solve.
    #[error("singular matrix")]
    SingularMatrix,

    /// A solve succeeded but the condition estimate voids the accuracy
    /// contract of the downstream quantity.
    #[error("matrix too ill-conditioned: cond ~ {cond:.3e}")]
    IllConditioned { cond: f64 },

    /// An exponential growth factor would overflow (exponent > 700).
    #[error("growth factor exp({exponent:.1}) overflows the evaluation window")]
    OverflowWindow { exponent: f64 },

    /// Adaptive quadrature failed to stabilize within the order cap.
    #[error("quadrature did not converge (last delta {delta:.3e} at order {order})")]
    QuadratureNonConvergence { order: usize, delta: f64 },

    /// Too many simulated paths were flagged as degraded.
    #[error("ensemble degraded: {flagged} of {total} paths flagged")]
    EnsembleDegraded { flagged: usize, total: usize },

    /// Invalid user-supplied parameter (bad bin count, zero paths, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}
