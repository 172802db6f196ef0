#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN
#![allow(clippy::needless_range_loop)] // indexed loops mirror the formulas

//! Independent oracles for the solver crate.
//!
//! Everything here deliberately avoids the production stencil and solver
//! code paths (field containers are shared, stencils are not): the
//! brute-force probe assembles dense difference matrices from the closure
//! rules and inverts them by LU, the spectral oracle builds its own FFT-based
//! Leray solve on top of `rustfft`, and the gradient oracle is plain central
//! differencing of the reduced cost. All oracles are seeded and reproducible.

pub mod appendix;
pub mod bruteforce;
pub mod fd;
pub mod spectral_oracle;

pub use appendix::{appendix_inequality_check, AppendixReport};
pub use bruteforce::{small_instance_bruteforce, BruteforceReport};
pub use fd::{fd_gradient, gradient_check, FdRow};
pub use spectral_oracle::spectral_brinkman_oracle;
