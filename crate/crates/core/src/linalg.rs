//! Matrix-free conjugate gradients for the SPD solves.

use alloc::vec;

#[derive(Debug, Clone, Copy)]
pub struct CgResult {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        acc += x * y;
    }
    acc
}

pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// Preconditioned conjugate gradients on `A x = b` with `A` given as a
/// matvec closure and an optional inverse-diagonal (Jacobi) preconditioner.
///
/// `x` holds the initial guess on entry and the solution on exit. The
/// iteration stops on `||r|| <= rtol * ||b|| + atol`, on the iteration cap,
/// or when the recurrence stagnates (no residual improvement for 80
/// iterations); the best iterate seen is returned in that case. The true
/// residual is recomputed every 64 iterations to limit drift.
pub fn pcg(
    apply: &mut dyn FnMut(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    inv_diag: Option<&[f64]>,
    rtol: f64,
    atol: f64,
    max_iter: usize,
) -> CgResult {
    let n = b.len();
    let tol = rtol * norm(b) + atol;

    let mut r = vec![0.0; n];
    let mut ax = vec![0.0; n];
    apply(x, &mut ax);
    for i in 0..n {
        r[i] = b[i] - ax[i];
    }
    let mut rnorm = norm(&r);
    if rnorm <= tol || rnorm == 0.0 {
        return CgResult {
            iterations: 0,
            residual: rnorm,
            converged: true,
        };
    }

    let precond = |r: &[f64], z: &mut [f64]| match inv_diag {
        Some(d) => {
            for i in 0..r.len() {
                z[i] = d[i] * r[i];
            }
        }
        None => z.copy_from_slice(r),
    };

    let mut z = vec![0.0; n];
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut best_x = x.to_vec();
    let mut best_rnorm = rnorm;
    let mut since_best = 0usize;

    for it in 1..=max_iter {
        apply(&p, &mut ax);
        let pap = dot(&p, &ax);
        if pap <= 0.0 {
            // numerically lost positive definiteness; bail with best iterate
            x.copy_from_slice(&best_x);
            return CgResult {
                iterations: it,
                residual: best_rnorm,
                converged: best_rnorm <= tol,
            };
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ax[i];
        }
        if it % 64 == 0 {
            apply(x, &mut ax);
            for i in 0..n {
                r[i] = b[i] - ax[i];
            }
        }
        rnorm = norm(&r);
        if rnorm < best_rnorm {
            best_rnorm = rnorm;
            best_x.copy_from_slice(x);
            since_best = 0;
        } else {
            since_best += 1;
        }
        if rnorm <= tol {
            return CgResult {
                iterations: it,
                residual: rnorm,
                converged: true,
            };
        }
        if since_best > 80 {
            x.copy_from_slice(&best_x);
            return CgResult {
                iterations: it,
                residual: best_rnorm,
                converged: best_rnorm <= tol,
            };
        }
        precond(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    x.copy_from_slice(&best_x);
    CgResult {
        iterations: max_iter,
        residual: best_rnorm,
        converged: best_rnorm <= tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedRng;

    #[test]
    fn solves_small_spd_system() {
        // tridiagonal SPD matrix 2I - shift
        let n = 50;
        let mut apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                let mut v = 4.0 * x[i];
                if i > 0 {
                    v -= x[i - 1];
                }
                if i + 1 < n {
                    v -= x[i + 1];
                }
                y[i] = v;
            }
        };
        let mut rng = SeedRng::new(4);
        let xs: alloc::vec::Vec<f64> = (0..n).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        let mut b = alloc::vec![0.0; n];
        apply(&xs, &mut b);
        let mut x = alloc::vec![0.0; n];
        let res = pcg(&mut apply, &b, &mut x, None, 1e-14, 0.0, 1000);
        assert!(res.converged);
        for i in 0..n {
            assert!((x[i] - xs[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_rhs_with_zero_guess_returns_immediately() {
        let mut apply = |x: &[f64], y: &mut [f64]| y.copy_from_slice(x);
        let b = [0.0; 8];
        let mut x = [0.0; 8];
        let res = pcg(&mut apply, &b, &mut x, None, 1e-12, 0.0, 100);
        assert_eq!(res.iterations, 0);
        assert_eq!(x, [0.0; 8]);
    }
}
