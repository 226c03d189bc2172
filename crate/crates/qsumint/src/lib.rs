//! Numerical verification of q-hypergeometric sum-integral identities.
//!
//! The crate evaluates both sides of the q-beta sum-integral evaluation and
//! the star-triangle relation built from the M sum-integral operator and
//! the D-function, under the general balancing conditions (index sum zero,
//! fugacity product q), and reports residuals from randomized pole-safe
//! parameter sweeps.
//!
//! Layering:
//! - [`qkernel`]: q-Pochhammer products, the fixed q^{1/2} branch, balanced
//!   Pochhammer ratios, the reflection identity;
//! - [`quadrature`]: the [d_m z] measure, trapezoidal contour quadrature,
//!   truncated Z-sums, pole admissibility;
//! - [`operators`]: the D-function, the M operator and its composite
//!   parameter, Bailey steps;
//! - [`identities`]: q-beta and star-triangle verifiers, the substitution
//!   map, seeded samplers;
//! - [`report`], [`config`], [`runner`]: reports, run configuration, and
//!   the sweep driver behind the `verify` binary.

pub mod config;
pub mod error;
pub mod identities;
pub mod operators;
pub mod qkernel;
pub mod quadrature;
pub mod report;
pub mod runner;

pub use error::{Error, Result};
