//! Solvers for a Brinkman flow coupled to a sixth-order Cahn-Hilliard phase
//! field, with distributed velocity control.
//!
//! The crate is organized bottom-up:
//!
//! - [`field`]: grids, scalar/vector fields, discrete differential operators
//!   with periodic and box-Neumann closures, inner products, and the Fourier
//!   diagonalization used by the periodic solvers;
//! - [`model`]: the double-well potential, structural coefficients, energies,
//!   the tracking cost, and the box+L1 proximal map;
//! - [`brinkman`]: the stationary velocity subproblem (drag + viscous stress,
//!   divergence-free constraint) and its coercivity diagnostics;
//! - [`forward`]: semi-implicit time integration of the coupled state system;
//! - [`adjoint`]: the exact discrete tangent/adjoint of the forward map, the
//!   continuous-form adjoint as a consistency reference, and the reduced
//!   gradient;
//! - [`optim`]: projected proximal-gradient minimization with Armijo
//!   backtracking, stationarity and sparsity audits.
//!
//! Everything is deterministic: summation orders are fixed, iterative solvers
//! are sequential, and reruns on identical inputs are bit-identical.

#![cfg_attr(not(feature = "std"), no_std)]
// validation uses `!(x > 0.0)` deliberately: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// indexed loops over cells and steps mirror the discrete formulas
#![allow(clippy::needless_range_loop)]

extern crate alloc;

pub mod adjoint;
pub mod brinkman;
pub mod error;
pub mod field;
pub mod forward;
pub mod linalg;
pub mod model;
pub mod optim;
pub mod rng;

pub use error::Error;
pub type Result<T> = core::result::Result<T, Error>;
