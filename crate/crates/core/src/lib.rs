//! Lagrangian gas dynamics on the periodic slab with a physical vacuum
//! boundary.
//!
//! The crate integrates the kappa-regularized Euler system for a flow map
//! `eta`, checks the geometric identities of the Lagrangian formulation, and
//! evaluates the energy functionals and inequalities that control the flow
//! near the degenerate boundary.

pub mod geometry;
pub mod grid;
pub mod diagnostics;
pub mod kappa;
pub mod parabolic;
pub mod vacuum;
pub mod hardy;
pub mod harness;
