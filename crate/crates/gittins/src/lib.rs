//! Exact verification engine for discrete-time dynamic allocation.
//!
//! Everything here lives on a finite probability space with strictly positive
//! atoms, so essential suprema are pointwise maxima and every identity can be
//! checked exactly in rational arithmetic. The crate computes, for each
//! project of a multi-armed allocation problem:
//!
//! * Snell envelopes and optimal stopping values `V(t;m)` with an exit reward,
//! * Gittins index sequences `M(t)`, their running lower envelopes, and the
//!   right-inverse structure linking the optimal rules to the envelope,
//! * operational clocks `tau(m)` / surrender values `N(t)` for a collection
//!   of projects, the explicit synchronizing strategy, and the five
//!   equivalent characterizations of index-type behaviour,
//! * allocation values by several independent routes (product-form integral,
//!   decreasing-surrogate closed forms, explicit strategy replay, Bellman
//!   backward induction) together with brute-force enumeration oracles.
//!
//! The oracles enumerate every adapted stopping rule or allocation strategy
//! outright and are kept free of any engine shortcuts; they are the trust
//! anchor the faster routes are certified against.
//!
//! Numeric modes: [`Exact`] (arbitrary-precision rationals, zero tolerance)
//! and [`Approx`] (f64 with an explicit tolerance). All acceptance-grade
//! checks run in the exact mode.

pub mod allocation;
pub mod gittins;
pub mod lattice;
pub mod oracle;
pub mod prob;
pub mod report;
pub mod scalar;
pub mod scenario;
pub mod stopping;
pub mod suites;
pub mod values;

pub use scalar::{Approx, Exact, Scalar};

/// Exact scalar type used by the acceptance battery.
pub type ExactScalar = Exact;
/// Floating-point scalar type for the tolerance-based mode.
pub type FloatScalar = Approx;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("enumeration budget exceeded: {0}")]
    Budget(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
