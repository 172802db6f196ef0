//! Exhaustive consistency probe on a tiny 1D instance.
//!
//! The forward map is frozen along a base trajectory and its exact Jacobian
//! is assembled as an explicit dense matrix chain: every stage of a step is
//! a dense matrix built here directly from the closure rules (independent of
//! the production stencil code), and the implicit solve becomes an LU solve.
//! The chain is compared entrywise against unit-vector probes of the tangent
//! sweep, and the adjoint sweep is checked to be its exact transpose. In 1D
//! the velocity is pinned to zero, so every control column of the Jacobian
//! must vanish identically; that is asserted bit-exactly.

use bch_core::adjoint::{adjoint_sweep, tangent_sweep};
use bch_core::field::{BcMode, Grid, ScalarField, TimeGrid};
use bch_core::forward::{solve_forward, ControlField, StateSolver};
use bch_core::model::{ModelParams, Potential, SourceProfile};
use bch_core::rng::SeedRng;
use bch_core::{Error, Result};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub struct BruteforceReport {
    pub cells: usize,
    pub steps: usize,
    /// Max entrywise deviation between the probed tangent and the dense chain.
    pub max_jacobian_error: f64,
    /// Max entrywise deviation between the probed adjoint and the transpose.
    pub max_transpose_error: f64,
    /// Whether all control columns came out exactly zero (no-flow mode).
    pub control_columns_zero: bool,
}

#[derive(Clone, Copy)]
enum Clo {
    Periodic,
    Even,
}

/// Centered difference matrix assembled directly from the ghost-cell rules.
fn centered_diff_matrix(n: usize, h: f64, closure: Clo) -> DMatrix<f64> {
    let inv2h = 1.0 / (2.0 * h);
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        if j + 1 < n {
            m[(j, j + 1)] += inv2h;
        } else {
            match closure {
                Clo::Periodic => m[(j, 0)] += inv2h,
                Clo::Even => m[(j, j)] += inv2h,
            }
        }
        if j > 0 {
            m[(j, j - 1)] -= inv2h;
        } else {
            match closure {
                Clo::Periodic => m[(j, n - 1)] -= inv2h,
                Clo::Even => m[(j, j)] -= inv2h,
            }
        }
    }
    m
}

fn diag_of(values: impl Iterator<Item = f64>, n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for (i, v) in values.enumerate() {
        m[(i, i)] = v;
    }
    m
}

/// Assemble the dense Jacobian chain and probe tangent and adjoint with unit
/// vectors on an instance with at most 6 cells and 3 steps.
pub fn small_instance_bruteforce(
    n: usize,
    steps: usize,
    bc: BcMode,
    seed: u64,
) -> Result<BruteforceReport> {
    if !(4..=6).contains(&n) || steps == 0 || steps > 3 {
        return Err(Error::InvalidArgument(
            "brute force instance needs 4..=6 cells and 1..=3 steps".into(),
        ));
    }
    let grid = Grid::new(1, &[n], &[1.0], bc)?;
    let tg = TimeGrid::new(steps as f64 * 1e-3, steps)?;
    let params = ModelParams {
        nu: 0.3,
        sigma: 0.1,
        h_source: SourceProfile::Tanh { amplitude: 0.5 },
        ..Default::default()
    };
    let pot = Potential::Quartic;
    let mut rng = SeedRng::new(seed);
    let phi0 = rng.smooth_scalar(grid, 0.6, 2);
    let u = ControlField::zeros(grid, steps);
    let traj = solve_forward(&phi0, &u, &params, pot, &tg)?;
    let solver = StateSolver::new(grid, params, pot, tg.tau)?;

    // dense operators, rebuilt from the closure rules
    let closure = match bc {
        BcMode::Periodic => Clo::Periodic,
        BcMode::BoxNeumann => Clo::Even,
    };
    let g = centered_diff_matrix(n, grid.h(0), closure);
    let lap = -(g.transpose() * &g);
    let bilap = &lap * &lap;
    let trilap = &lap * &bilap;
    let eye = DMatrix::<f64>::identity(n, n);
    let tau = tg.tau;
    let m_mob = params.mobility;
    let a_stab = solver.a_stab();

    let l_implicit = &eye / tau - m_mob * &trilap + m_mob * a_stab * &bilap;
    let l_lu = l_implicit.lu();

    // per-step Jacobian: L^-1 (I/tau + diag(S') + m lap Mmu - m lap^3 + m A lap^2)
    let mut step_mats: Vec<DMatrix<f64>> = Vec::with_capacity(steps);
    for k in 0..steps {
        let phik = traj.phi[k].data();
        let w_dense = {
            let phi_vec = DVector::from_iterator(n, phik.iter().copied());
            let mut w = -(&lap * &phi_vec);
            for i in 0..n {
                w[i] += pot.f(phik[i]);
            }
            w
        };
        let m_w = -&lap + diag_of(phik.iter().map(|&s| pot.f_prime(s)), n);
        let m_mu = (-&lap + diag_of(phik.iter().map(|&s| pot.f_prime(s) + params.nu), n)) * &m_w
            + diag_of((0..n).map(|i| pot.f_second(phik[i]) * w_dense[i]), n);
        let m_rhs = &eye / tau
            + diag_of(phik.iter().map(|&s| params.source_s_prime(s)), n)
            + m_mob * (&lap * &m_mu)
            - m_mob * &trilap
            + m_mob * a_stab * &bilap;
        let step = l_lu.solve(&m_rhs).ok_or(Error::SolverDiverged {
            what: "dense implicit solve",
            residual: f64::NAN,
            iterations: 0,
        })?;
        step_mats.push(step);
    }

    // explicit chain: level rows vs (phi0 columns | control columns = 0)
    let out_dim = steps * n;
    let in_dim = n + steps * n;
    let mut j_dense = DMatrix::<f64>::zeros(out_dim, in_dim);
    let mut prod = eye.clone();
    for (k, step) in step_mats.iter().enumerate() {
        prod = step * &prod;
        j_dense.view_mut((k * n, 0), (n, n)).copy_from(&prod);
    }

    // tangent probes
    let zeros_h = ControlField::zeros(grid, steps);
    let mut j_tan = DMatrix::<f64>::zeros(out_dim, in_dim);
    let mut control_columns_zero = true;
    for j in 0..in_dim {
        let (h, dphi0) = if j < n {
            let mut d = ScalarField::zeros(grid);
            d.data_mut()[j] = 1.0;
            (zeros_h.clone(), d)
        } else {
            let mut h = ControlField::zeros(grid, steps);
            let s = (j - n) / n;
            let c = (j - n) % n;
            h.get_mut(s).comp_mut(0).data_mut()[c] = 1.0;
            (h, ScalarField::zeros(grid))
        };
        let tan = tangent_sweep(&solver, &traj, &h, &dphi0)?;
        for level in 1..=steps {
            for c in 0..n {
                let val = tan.dphi[level].data()[c];
                j_tan[((level - 1) * n + c, j)] = val;
                if j >= n && val != 0.0 {
                    control_columns_zero = false;
                }
            }
        }
    }
    let max_jacobian_error = (&j_tan - &j_dense).abs().max();

    // adjoint probes: each output row must reproduce the tangent row
    let mut max_transpose_error = 0.0f64;
    for level in 1..=steps {
        for c in 0..n {
            let mut inject: Vec<ScalarField> =
                (0..=steps).map(|_| ScalarField::zeros(grid)).collect();
            inject[level].data_mut()[c] = 1.0;
            let adj = adjoint_sweep(&solver, &traj, &inject)?;
            let row = (level - 1) * n + c;
            for j in 0..n {
                let err = (adj.p[0].data()[j] - j_tan[(row, j)]).abs();
                max_transpose_error = max_transpose_error.max(err);
            }
            for s in 0..steps {
                for cc in 0..n {
                    let val = tau * adj.omega[s].comp(0).data()[cc];
                    let err = (val - j_tan[(row, n + s * n + cc)]).abs();
                    max_transpose_error = max_transpose_error.max(err);
                }
            }
        }
    }

    Ok(BruteforceReport {
        cells: n,
        steps,
        max_jacobian_error,
        max_transpose_error,
        control_columns_zero,
    })
}
