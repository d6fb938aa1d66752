//! Numerical toolkit for Lévy-type generators built on a non-degenerate
//! α-stable part: characteristic exponents, heat-kernel inversion, the
//! resolvent and its gradient, perturbation series, kernel approximation and
//! path simulation.

// Guards are written as `!(x > 0.0)` on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod approx;
pub mod density;
pub mod error;
pub mod flagship;
pub mod kernel;
pub mod lattice;
pub mod ledger;
pub mod par;
pub mod perturb;
pub mod quad;
pub mod resolvent;
pub mod simulate;
pub mod stats;
pub mod symbol;

pub use error::{Error, Result};
