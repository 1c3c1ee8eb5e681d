#![forbid(unsafe_code)]

//! Numerical workbench for additive combinatorics on `Z/NZ`.
//!
//! The crate turns the standard toolkit around arithmetic progressions into
//! executable, checkable numerics:
//!
//! - [`zmod`]: complex functions on `Z/NZ`, the mean-normalized discrete
//!   Fourier transform, `L^p` and spectral norms, shifts and characters.
//! - [`gowers`]: box inner products and norms on product sets, the `U^d`
//!   uniformity norms, the van der Corput and generalized von Neumann
//!   bounds, and the cubic dual function.
//! - [`ap_forms`]: the multilinear progression forms `Lambda_k`, exact
//!   progression counting and search in integer sets, and the Varnavides
//!   covering statistic.
//! - [`structure`]: Bohr-cell partitions, conditional expectation, an
//!   executable density-increment progression search, an executable
//!   energy-increment (Koopman-von Neumann) decomposition, quadratic phase
//!   fitting and the additive-quadruple statistic.
//! - [`primes`]: sieve tables for the von Mangoldt and Moebius functions,
//!   partially sifted sets, truncated divisor-sum weights, the small-prime
//!   residue trick, and exponential sums over prime powers.
//! - [`singular`]: singular-series constants from brute-force local factors
//!   with rigorous truncation tails.
//!
//! Every identity used anywhere in the crate is backed by a test against an
//! independent direct-sum oracle; see the `acceptance` integration test for
//! the headline checks.

pub mod ap_forms;
pub mod budget;
pub mod error;
pub mod generators;
pub mod gowers;
pub mod primes;
pub mod singular;
pub mod structure;
pub mod tol;
pub mod zmod;

pub use budget::WorkBudgets;
pub use error::Error;
pub use tol::Tolerance;
pub use zmod::{CyclicFn, Spectrum};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
