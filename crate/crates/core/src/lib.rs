//! Digital Kronecker sequences over prime fields.
//!
//! Points are built from truncated Laurent series in `x^{-1}` over `Z_q`,
//! either by polynomial multiplication or through Hankel generating
//! matrices. Discrepancy is computed by direct counting and, on the grid
//! `Q^s(q^m)`, through its exact Walsh expansion. The [`metrical`] module
//! checks the measure identities behind the almost-everywhere lower bound at
//! sizes small enough to enumerate.

pub mod error;
pub mod gf_poly;
pub mod laurent;
pub mod metrical;
pub mod sequence;
pub mod suite;
pub mod walsh;
pub mod discrepancy;
pub mod rational_str;

pub use error::{Error, Result};

/// Exact rational used for counts and measures.
pub type Rational = num_rational::Ratio<i128>;
