//! FFT-based reference solution of the periodic constant-drag velocity
//! problem, built on `rustfft` and independent of the production solver.
//!
//! The weak form `eta0 (Dv : D zeta) + lambda0 v . zeta = f . zeta` over
//! divergence-free fields diagonalizes per Fourier mode: with the centered
//! difference symbol `i s_a` (`s_a = sin(2 pi k_a / n_a) / h_a`), a
//! divergence-free polarization `e` (`s . e = 0`) sees
//! `Dv : Dv = |s|^2 / 2`, so the solution is the Leray projection of the
//! force divided by `eta0 |s|^2 / 2 + lambda0`. Modes whose symbol vanishes
//! (the mean and the sawtooth modes) carry no divergence constraint and
//! reduce to `v = f / lambda0`.

use bch_core::field::{Grid, ScalarField, VectorField};
use bch_core::{Error, Result};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

fn fft_2d(grid: &Grid, data: &[f64], inverse: bool, planner: &mut FftPlanner<f64>) -> Vec<Complex<f64>> {
    let (n0, n1) = (grid.n(0), grid.n(1));
    let mut buf: Vec<Complex<f64>> = data.iter().map(|&x| Complex::new(x, 0.0)).collect();
    fft_2d_complex(grid, &mut buf, inverse, planner);
    let _ = (n0, n1);
    buf
}

fn fft_2d_complex(
    grid: &Grid,
    buf: &mut [Complex<f64>],
    inverse: bool,
    planner: &mut FftPlanner<f64>,
) {
    let (n0, n1) = (grid.n(0), grid.n(1));
    // axis 1 (contiguous rows)
    if n1 > 1 {
        let fft1 = if inverse {
            planner.plan_fft_inverse(n1)
        } else {
            planner.plan_fft_forward(n1)
        };
        for row in buf.chunks_mut(n1) {
            fft1.process(row);
        }
    }
    // axis 0 (strided columns)
    let fft0 = if inverse {
        planner.plan_fft_inverse(n0)
    } else {
        planner.plan_fft_forward(n0)
    };
    let mut col = vec![Complex::new(0.0, 0.0); n0];
    for j in 0..n1 {
        for i in 0..n0 {
            col[i] = buf[i * n1 + j];
        }
        fft0.process(&mut col);
        for i in 0..n0 {
            buf[i * n1 + j] = col[i];
        }
    }
    if inverse {
        let scale = 1.0 / (n0 * n1) as f64;
        for c in buf.iter_mut() {
            *c *= scale;
        }
    }
}

fn symbol(grid: &Grid, axis: usize, k: usize) -> f64 {
    let na = grid.n(axis);
    if 2 * k == na {
        0.0
    } else {
        (2.0 * std::f64::consts::PI * k as f64 / na as f64).sin() / grid.h(axis)
    }
}

/// Exact solve of the periodic constant-drag problem by Leray projection in
/// Fourier space.
pub fn spectral_brinkman_oracle(
    force: &VectorField,
    lambda0: f64,
    eta0: f64,
) -> Result<VectorField> {
    let grid = *force.grid();
    if grid.bc() != bch_core::field::BcMode::Periodic {
        return Err(Error::InvalidArgument(
            "spectral oracle requires periodic boundaries".into(),
        ));
    }
    if !(lambda0 > 0.0) {
        return Err(Error::CoercivityViolated);
    }
    let d = grid.dim();
    let (n0, n1) = (grid.n(0), grid.n(1));
    let mut planner = FftPlanner::new();
    let mut spectra: Vec<Vec<Complex<f64>>> = (0..d)
        .map(|c| fft_2d(&grid, force.comp(c).data(), false, &mut planner))
        .collect();

    for k0 in 0..n0 {
        for k1 in 0..n1 {
            let idx = k0 * n1 + k1;
            let mut s = [0.0f64; 2];
            s[0] = symbol(&grid, 0, k0);
            if d == 2 {
                s[1] = symbol(&grid, 1, k1);
            }
            let s2: f64 = s.iter().take(d).map(|x| x * x).sum();
            if s2 == 0.0 {
                for spec in spectra.iter_mut() {
                    spec[idx] /= lambda0;
                }
                continue;
            }
            let mut proj = Complex::new(0.0, 0.0);
            for (a, spec) in spectra.iter().enumerate() {
                proj += s[a] * spec[idx];
            }
            proj /= s2;
            let denom = eta0 * s2 / 2.0 + lambda0;
            for (a, spec) in spectra.iter_mut().enumerate() {
                spec[idx] = (spec[idx] - s[a] * proj) / denom;
            }
        }
    }

    let mut comps = Vec::with_capacity(d);
    for mut spec in spectra {
        fft_2d_complex(&grid, &mut spec, true, &mut planner);
        let data: Vec<f64> = spec.iter().map(|c| c.re).collect();
        comps.push(ScalarField::from_data(grid, data)?);
    }
    VectorField::from_components(comps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use bch_core::field::{divergence, norm_l2, norm_l2_vec};
    use bch_core::rng::SeedRng;

    #[test]
    fn constant_force_gives_constant_velocity() {
        let grid = Grid::periodic(2, &[8, 8]).unwrap();
        let mut force = VectorField::zeros(grid);
        *force.comp_mut(0) = ScalarField::constant(grid, 2.0);
        let v = spectral_brinkman_oracle(&force, 0.5, 1.0).unwrap();
        for &x in v.comp(0).data() {
            assert!((x - 4.0).abs() < 1e-12);
        }
        assert!(v.comp(1).max_abs() < 1e-12);
    }

    #[test]
    fn zero_force_gives_zero() {
        let grid = Grid::periodic(2, &[8, 8]).unwrap();
        let v = spectral_brinkman_oracle(&VectorField::zeros(grid), 1.0, 1.0).unwrap();
        assert_eq!(v.max_abs(), 0.0);
    }

    #[test]
    fn projected_solution_is_divergence_free() {
        let grid = Grid::periodic(2, &[12, 8]).unwrap();
        let mut rng = SeedRng::new(11);
        let force = rng.random_vector(grid, 1.0);
        let v = spectral_brinkman_oracle(&force, 0.7, 1.0).unwrap();
        let div = divergence(&v);
        assert!(
            norm_l2(&div) <= 1e-13 * norm_l2_vec(&v).max(1.0),
            "div {}",
            norm_l2(&div)
        );
    }

    #[test]
    fn production_solver_matches_the_oracle() {
        let grid = Grid::periodic(2, &[8, 8]).unwrap();
        let mut rng = SeedRng::new(13);
        for trial in 0..3 {
            let force = rng.smooth_vector(grid, 1.0, 2);
            let lambda0 = 0.5 + 0.4 * trial as f64;
            let lam = ScalarField::constant(grid, lambda0);
            let sol = bch_core::brinkman::solve_brinkman(
                &bch_core::brinkman::BrinkmanProblem::new(lam, force.clone(), 1.0),
            )
            .unwrap();
            let oracle = spectral_brinkman_oracle(&force, lambda0, 1.0).unwrap();
            let rel = norm_l2_vec(&sol.v.sub(&oracle)) / norm_l2_vec(&oracle);
            assert!(rel <= 1e-9, "trial {trial}: rel {rel}");
        }
    }
}
