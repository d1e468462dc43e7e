//! Numerical laboratory for recovering signals from group-invariant
//! measurements under low-dimensional semi-algebraic priors.
//!
//! - [`repr`]: isotypic decompositions, ambiguity and data group actions,
//!   Haar sampling, effective dimensions.
//! - [`invariants`]: Gram blocks, empirical second moments, power spectra,
//!   rowsort.
//! - [`priors`]: semi-algebraic prior sets and their generic translates.
//! - [`bounds`]: recoverability verdicts from dimension counts.
//! - [`recovery`]: Gram factoring and orbit/prior intersection search.
//! - [`experiments`]: seeded Monte Carlo runners, reports and the CLI.

pub mod bounds;
pub mod error;
pub mod experiments;
pub mod invariants;
pub mod priors;
pub mod recovery;
pub mod repr;

pub use error::{Error, Result};
pub use repr::{AmbiguityElement, Block, DataGroupSpec, GroupElement, RepresentationSpec, Signal};
