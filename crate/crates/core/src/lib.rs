//! Cumulant and Wick-polynomial algebra for random lattice fields, together
//! with numerical certification of clustering-norm bounds.
//!
//! The crate is organised bottom-up:
//!
//! * [`partitions`] enumerates set partitions of index sequences, including
//!   the restricted partitions that appear in expectations of Wick products.
//! * [`cumulants`] converts between moments and cumulants, builds Wick
//!   polynomials and evaluates expectations of their products over any
//!   [`MomentProvider`].
//! * [`fields`] supplies concrete providers: finite discrete fields, Gaussian
//!   vectors, stationary spectral Gaussian fields on `Z` and Monte Carlo
//!   ensembles.
//! * [`clustering`] computes `l_p`-clustering norms, magnitude constants and
//!   the Wick kernel `Phi_n`, and checks the joint-cumulant `l_2` bounds.
//! * [`dnls`] simulates the discrete nonlinear Schrödinger equation on a
//!   periodic lattice and measures the deviation of its two-point time
//!   correlation from free harmonic transport.

pub mod clustering;
pub mod cumulants;
pub mod dnls;
mod error;
pub mod fields;
pub mod partitions;
pub mod report;

pub use error::{Error, Result};

pub use cumulants::{CumulantSource, CumulantTable, MomentProvider, WickExpansion};
pub use partitions::{IndexSequence, SetPartition, Site, SiteRef};
pub use report::BoundReport;

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
