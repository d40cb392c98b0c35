//! Exact symbolic kernel for graded geometric structures over polynomial base
//! rings.
//!
//! The crate is organized in layers:
//!
//! - [`exact`] — exact rational arithmetic, sparse multivariate polynomials,
//!   polynomial vector fields, and differential forms on an affine base.
//! - [`graded`] — free graded-commutative algebras on finitely many graded
//!   generators with Koszul signs, weight grading, and derivations determined
//!   by their values on generators.
//! - [`algebroid`] — L∞ algebroid data over the base, the correspondence with
//!   square-zero degree-1 derivations (in both directions), morphism
//!   verification, and homotopy transfer along special deformation retracts.
//! - [`forms`] — the bigraded algebra of mixed differential forms with both
//!   differentials, the Euler contraction homotopy, the potentials complex,
//!   the twisting map, and the normalized complex of closed forms.
//! - [`symplectic`] — nondegeneracy and closure verification for shifted
//!   symplectic structures at shifts 0, 1, and 2.
//! - [`courant`] — (twisted) Courant algebroids, Dirac structures, conversions
//!   to and from two-shifted symplectic data, restriction, tensor products,
//!   and Poisson/coisotropic checks.
//! - [`dsl`] — a line-oriented textual definition format for all of the above,
//!   plus machine-readable verification reports; drives the `gradedkit` CLI.
//!
//! All arithmetic is exact: coefficients are arbitrary-precision rationals and
//! every verified identity holds with zero tolerance. Values are immutable
//! after construction and operations are pure functions.

pub mod algebroid;
pub mod courant;
pub mod dsl;
pub mod exact;
pub mod forms;
pub mod graded;
pub mod matrix;
pub mod symplectic;
pub mod verdict;

/// Errors produced by fallible kernel operations.
///
/// Structural verification failures (a bracket table violating an identity,
/// say) are *verdicts*, not errors; errors are reserved for malformed inputs
/// that make an operation meaningless.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Two values built over different polynomial rings were combined.
    #[error("mismatched variable sets: {0}")]
    RingMismatch(String),
    /// A degree precondition was violated (e.g. contracting a 0-form).
    #[error("degree error: {0}")]
    Degree(String),
    /// A generator table precondition was violated.
    #[error("generator error: {0}")]
    Generator(String),
    /// Structural data is incomplete or inconsistent.
    #[error("invalid structure: {0}")]
    Structure(String),
    /// A parse diagnostic with source position.
    #[error("{file}:{line}:{col}: {msg}")]
    Parse {
        /// Source label (file name or "<input>").
        file: String,
        /// 1-based line number.
        line: usize,
        /// 1-based column number.
        col: usize,
        /// Human-readable diagnostic, including the expected-token set when known.
        msg: String,
    },
    /// An iteration cap was reached, indicating a convention bug rather than
    /// a genuinely divergent computation.
    #[error("iteration cap reached: {0}")]
    IterationCap(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
