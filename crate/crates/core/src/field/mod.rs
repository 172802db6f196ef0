//! Grids, field containers, discrete differential operators, and inner
//! products.
//!
//! Two boundary closures are supported. In `Periodic` mode all stencils wrap.
//! In `BoxNeumann` mode scalar derivatives use an even mirror (the ghost cell
//! copies the adjacent interior cell, enforcing a zero normal derivative)
//! while the conjugate divergence uses an odd mirror (ghost negates the
//! interior cell, enforcing zero normal flux). With this pairing the discrete
//! divergence is exactly the negative transpose of the discrete gradient, and
//! the Laplacian, defined as `divergence(gradient(f))` and never as a separate
//! stencil, is symmetric negative semidefinite in both modes. The adjoint
//! solvers rely on these identities holding at machine precision.

mod data;
mod grid;
mod ops;
pub mod spectral;

pub use data::{ScalarField, SymTensorField, VectorField};
pub use grid::{BcMode, Grid, TimeGrid};
pub use ops::{
    bilaplacian, divergence, gradient, inner, inner_vec, integral, laplacian, mean, norm_h1,
    norm_h2, norm_l2, norm_l2_vec, sym_gradient, trilaplacian, vec_norm_h1, velocity_deriv,
    velocity_deriv_adjoint, Closure,
};
