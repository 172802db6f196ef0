use alloc::vec;
use alloc::vec::Vec;

use super::data::{ScalarField, SymTensorField, VectorField};
use super::grid::{BcMode, Grid};
use crate::{Error, Result};

/// Ghost-cell rule used by a centered difference at the domain ends.
///
/// `Even` copies the boundary cell (zero normal derivative), `Odd` negates it
/// (zero normal flux). The adjoint of a centered difference with one closure
/// is the negated difference with the [`Closure::dual`] closure; the operators
/// below are paired so that divergence = -gradient^T holds exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Closure {
    Periodic,
    Even,
    Odd,
}

impl Closure {
    pub fn dual(self) -> Closure {
        match self {
            Closure::Periodic => Closure::Periodic,
            Closure::Even => Closure::Odd,
            Closure::Odd => Closure::Even,
        }
    }
}

fn scalar_closure(grid: &Grid) -> Closure {
    match grid.bc() {
        BcMode::Periodic => Closure::Periodic,
        BcMode::BoxNeumann => Closure::Even,
    }
}

fn flux_closure(grid: &Grid) -> Closure {
    match grid.bc() {
        BcMode::Periodic => Closure::Periodic,
        BcMode::BoxNeumann => Closure::Odd,
    }
}

/// Centered second-order difference of `f` along `axis` with the given
/// closure, divided by `2 h_axis`.
fn diff_axis(f: &ScalarField, axis: usize, closure: Closure) -> ScalarField {
    let grid = *f.grid();
    let (n0, n1) = (grid.n(0), grid.n(1));
    let na = grid.n(axis);
    let inv2h = 1.0 / (2.0 * grid.h(axis));
    let src = f.data();
    let mut out = vec![0.0; src.len()];

    // stride along the differentiated axis
    let stride = if axis == 0 { n1 } else { 1 };

    for i0 in 0..n0 {
        for i1 in 0..n1 {
            let pos = i0 * n1 + i1;
            let j = if axis == 0 { i0 } else { i1 };
            let left = if j > 0 {
                src[pos - stride]
            } else {
                match closure {
                    Closure::Periodic => src[pos + (na - 1) * stride],
                    Closure::Even => src[pos],
                    Closure::Odd => -src[pos],
                }
            };
            let right = if j + 1 < na {
                src[pos + stride]
            } else {
                match closure {
                    Closure::Periodic => src[pos - (na - 1) * stride],
                    Closure::Even => src[pos],
                    Closure::Odd => -src[pos],
                }
            };
            out[pos] = (right - left) * inv2h;
        }
    }
    ScalarField::from_data(grid, out).expect("same grid")
}

/// Discrete gradient with the scalar (even-mirror) closure.
pub fn gradient(f: &ScalarField) -> VectorField {
    let grid = *f.grid();
    let closure = scalar_closure(&grid);
    let comps = (0..grid.dim()).map(|a| diff_axis(f, a, closure)).collect();
    VectorField::from_components(comps).expect("same grid")
}

/// Discrete divergence, the exact negative transpose of [`gradient`].
///
/// In box mode each component is differentiated along its own axis with the
/// odd mirror, which encodes a zero normal flux at the walls.
pub fn divergence(v: &VectorField) -> ScalarField {
    let grid = *v.grid();
    let closure = flux_closure(&grid);
    let mut out = diff_axis(v.comp(0), 0, closure);
    for a in 1..grid.dim() {
        let d = diff_axis(v.comp(a), a, closure);
        out.axpy(1.0, &d);
    }
    out
}

/// `divergence(gradient(f))`, by operator composition.
pub fn laplacian(f: &ScalarField) -> ScalarField {
    divergence(&gradient(f))
}

pub fn bilaplacian(f: &ScalarField) -> ScalarField {
    laplacian(&laplacian(f))
}

pub fn trilaplacian(f: &ScalarField) -> ScalarField {
    laplacian(&bilaplacian(f))
}

/// Derivative of velocity component `comp` along `axis`.
///
/// Components normal to a wall use the odd mirror (no penetration), the
/// tangential ones the even mirror (free slip).
pub fn velocity_deriv(v: &ScalarField, comp: usize, axis: usize) -> ScalarField {
    let closure = match v.grid().bc() {
        BcMode::Periodic => Closure::Periodic,
        BcMode::BoxNeumann => {
            if comp == axis {
                Closure::Odd
            } else {
                Closure::Even
            }
        }
    };
    diff_axis(v, axis, closure)
}

/// Adjoint of [`velocity_deriv`]: `velocity_deriv(.., comp, axis)^T g`.
pub fn velocity_deriv_adjoint(g: &ScalarField, comp: usize, axis: usize) -> ScalarField {
    let closure = match g.grid().bc() {
        BcMode::Periodic => Closure::Periodic,
        BcMode::BoxNeumann => {
            if comp == axis {
                Closure::Odd
            } else {
                Closure::Even
            }
        }
    };
    let mut out = diff_axis(g, axis, closure.dual());
    out.scale(-1.0);
    out
}

/// Symmetric part of the velocity gradient, `(grad v + grad v^T) / 2`.
pub fn sym_gradient(v: &VectorField) -> SymTensorField {
    let grid = *v.grid();
    let d = grid.dim();
    let mut entries = Vec::new();
    for i in 0..d {
        for j in i..d {
            let mut e = velocity_deriv(v.comp(j), j, i);
            if i != j {
                let other = velocity_deriv(v.comp(i), i, j);
                e.axpy(1.0, &other);
                e.scale(0.5);
            }
            entries.push(e);
        }
    }
    SymTensorField::new(grid, entries)
}

/// Volume-weighted inner product with a fixed sequential summation order.
pub fn inner(a: &ScalarField, b: &ScalarField) -> Result<f64> {
    if a.grid() != b.grid() {
        return Err(Error::IncompatibleGrids);
    }
    let mut acc = 0.0;
    for (x, y) in a.data().iter().zip(b.data().iter()) {
        acc += x * y;
    }
    Ok(acc * a.grid().cell_volume())
}

pub fn inner_vec(a: &VectorField, b: &VectorField) -> Result<f64> {
    if a.grid() != b.grid() {
        return Err(Error::IncompatibleGrids);
    }
    let mut acc = 0.0;
    for (ca, cb) in a.components().iter().zip(b.components().iter()) {
        for (x, y) in ca.data().iter().zip(cb.data().iter()) {
            acc += x * y;
        }
    }
    Ok(acc * a.grid().cell_volume())
}

pub fn integral(f: &ScalarField) -> f64 {
    let mut acc = 0.0;
    for x in f.data() {
        acc += x;
    }
    acc * f.grid().cell_volume()
}

pub fn mean(f: &ScalarField) -> f64 {
    integral(f) / (f.grid().cells() as f64 * f.grid().cell_volume())
}

pub fn norm_l2(f: &ScalarField) -> f64 {
    libm::sqrt(inner(f, f).expect("same grid"))
}

pub fn norm_l2_vec(v: &VectorField) -> f64 {
    libm::sqrt(inner_vec(v, v).expect("same grid"))
}

pub fn norm_h1(f: &ScalarField) -> f64 {
    let g = gradient(f);
    let sq = inner(f, f).expect("same grid") + inner_vec(&g, &g).expect("same grid");
    libm::sqrt(sq)
}

pub fn norm_h2(f: &ScalarField) -> f64 {
    let g = gradient(f);
    let l = laplacian(f);
    let sq = inner(f, f).expect("same grid")
        + inner_vec(&g, &g).expect("same grid")
        + inner(&l, &l).expect("same grid");
    libm::sqrt(sq)
}

/// H1 norm of a vector field using the velocity closures for the Jacobian.
pub fn vec_norm_h1(v: &VectorField) -> f64 {
    let d = v.grid().dim();
    let mut sq = inner_vec(v, v).expect("same grid");
    for j in 0..d {
        for i in 0..d {
            let g = velocity_deriv(v.comp(j), j, i);
            sq += inner(&g, &g).expect("same grid");
        }
    }
    libm::sqrt(sq)
}
