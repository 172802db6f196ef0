//! Semi-implicit time integration of the coupled state system.
//!
//! One step from level `n` advances in four segregated stages:
//!
//! 1. auxiliary fields at the old level, by operator composition:
//!    `w_n = -eps lap(phi_n) + f(phi_n)/eps`,
//!    `mu_n = -eps lap(w_n) + (f'(phi_n)/eps + nu) w_n`;
//! 2. velocity from the Brinkman solve with drag `lambda(phi_n)` and force
//!    `mu_n grad(phi_n) + u_n` (skipped in 1D, which runs in no-flow mode);
//! 3. explicit transport and source at the old level;
//! 4. implicit solve of the sixth-order linear part,
//!    `(1/tau - m eps^2 lap^3 + m A lap^2) phi_{n+1} = rhs_n`, where the
//!    right-hand side carries the lagged nonlinear remainder
//!    `mu_n - eps^2 lap^2 phi_n` of the reduced chemical potential and `A`
//!    stabilizes the lagged `f'`. Periodic grids solve the diagonal system
//!    exactly in Fourier space; box grids use CG.
//!
//! The segregated structure makes the discrete tangent and adjoint clean
//! compositions of linear maps (see [`crate::adjoint`]).
//!
//! A forward solve is inherently sequential over time and internally
//! single-threaded; independent trajectories may run concurrently since
//! everything here is a pure function of its inputs.

use alloc::vec::Vec;

use crate::brinkman::{solve_brinkman, BrinkmanProblem};
use crate::field::spectral::SpectralGrid;
use crate::field::{
    bilaplacian, gradient, integral, laplacian, norm_h1, norm_l2, trilaplacian, Grid, ScalarField,
    TimeGrid, VectorField,
};
use crate::linalg::pcg;
use crate::model::{energy_total, EnergyBreakdown, ModelParams, Potential};
use crate::{Error, Result};

/// Time-indexed control, one d-component field per step.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlField {
    grid: Grid,
    values: Vec<VectorField>,
}

impl ControlField {
    pub fn zeros(grid: Grid, steps: usize) -> Self {
        ControlField {
            grid,
            values: (0..steps).map(|_| VectorField::zeros(grid)).collect(),
        }
    }

    pub fn from_values(values: Vec<VectorField>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::ShapeMismatch("control needs at least one step".into()));
        }
        let grid = *values[0].grid();
        if values.iter().any(|v| *v.grid() != grid) {
            return Err(Error::IncompatibleGrids);
        }
        Ok(ControlField { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn steps(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, n: usize) -> &VectorField {
        &self.values[n]
    }

    pub fn get_mut(&mut self, n: usize) -> &mut VectorField {
        &mut self.values[n]
    }

    pub fn values(&self) -> &[VectorField] {
        &self.values
    }

    pub fn axpy(&mut self, s: f64, other: &ControlField) {
        debug_assert_eq!(self.values.len(), other.values.len());
        for (a, b) in self.values.iter_mut().zip(other.values.iter()) {
            a.axpy(s, b);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for v in self.values.iter_mut() {
            v.scale(s);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.max_abs()))
    }

    /// Space-time inner product `sum_n tau <a_n, b_n>`.
    pub fn inner_space_time(&self, other: &ControlField, tau: f64) -> Result<f64> {
        if self.values.len() != other.values.len() {
            return Err(Error::ShapeMismatch("control step counts differ".into()));
        }
        let mut acc = 0.0;
        for (a, b) in self.values.iter().zip(other.values.iter()) {
            acc += crate::field::inner_vec(a, b)?;
        }
        Ok(acc * tau)
    }

    pub fn norm_space_time(&self, tau: f64) -> f64 {
        libm::sqrt(self.inner_space_time(self, tau).expect("same shape"))
    }
}

/// Per-level solver diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct StepDiagnostics {
    pub energy: EnergyBreakdown,
    pub mass: f64,
    pub brinkman_iters: usize,
    pub ch_iters: usize,
    pub residual: f64,
}

/// Dense in-memory record of a forward solve, the input to the adjoint sweep.
#[derive(Debug, Clone)]
pub struct StateTrajectory {
    pub time_grid: TimeGrid,
    /// `steps + 1` phase fields; `phi[0]` is the initial datum.
    pub phi: Vec<ScalarField>,
    /// Reported auxiliary fields at the new level of each step.
    pub mu: Vec<ScalarField>,
    pub w: Vec<ScalarField>,
    /// Velocity used during each step (computed from old-level data).
    pub v: Vec<VectorField>,
    pub diagnostics: Vec<StepDiagnostics>,
}

impl StateTrajectory {
    pub fn steps(&self) -> usize {
        self.time_grid.steps
    }

    pub fn grid(&self) -> &Grid {
        self.phi[0].grid()
    }
}

/// Old-level quantities every step (and its linearization) needs.
#[derive(Debug, Clone)]
pub struct FrozenStage {
    pub w: ScalarField,
    pub mu: ScalarField,
    pub lambda: ScalarField,
    pub grad_phi: VectorField,
}

/// Output of one state step.
pub struct StepOutput {
    pub phi_next: ScalarField,
    pub mu_rep: ScalarField,
    pub w_rep: ScalarField,
    pub v: VectorField,
    pub brinkman_iters: usize,
    pub ch_iters: usize,
    pub residual: f64,
}

/// Reusable per-run solver state: stabilization constant, spectral tables,
/// solver tolerances.
pub struct StateSolver {
    grid: Grid,
    pub params: ModelParams,
    pub potential: Potential,
    pub tau: f64,
    a_stab: f64,
    spectral: Option<SpectralGrid>,
    ch_symbol: Vec<f64>,
    pub brinkman_tol: f64,
    pub ch_rtol: f64,
}

impl StateSolver {
    pub fn new(grid: Grid, params: ModelParams, potential: Potential, tau: f64) -> Result<Self> {
        params.validate()?;
        if !(tau > 0.0) {
            return Err(Error::InvalidArgument("tau must be positive".into()));
        }
        // stabilization dominates the lagged f' over the phase range [-2, 2]
        let mut a_stab = 0.0f64;
        let samples = 801;
        for i in 0..samples {
            let s = -2.0 + 4.0 * i as f64 / (samples - 1) as f64;
            let coeff = potential.f_prime(s) + params.eps * params.nu;
            a_stab = a_stab.max(coeff.abs());
        }

        let (spectral, ch_symbol) = if grid.bc() == crate::field::BcMode::Periodic {
            let sg = SpectralGrid::new(grid)?;
            let m = params.mobility;
            let e2 = params.eps * params.eps;
            let symbol: Vec<f64> = sg
                .laplacian_eigenvalues()
                .iter()
                .map(|lam| 1.0 / tau + m * e2 * lam * lam * lam + m * a_stab * lam * lam)
                .collect();
            (Some(sg), symbol)
        } else {
            (None, Vec::new())
        };

        Ok(StateSolver {
            grid,
            params,
            potential,
            tau,
            a_stab,
            spectral,
            ch_symbol,
            brinkman_tol: 1e-13,
            ch_rtol: 1e-13,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn a_stab(&self) -> f64 {
        self.a_stab
    }

    /// `w(phi)` and `mu(phi)` by operator composition.
    pub fn chemical_potentials(&self, phi: &ScalarField) -> (ScalarField, ScalarField) {
        let eps = self.params.eps;
        let nu = self.params.nu;
        let pot = self.potential;
        let mut w = laplacian(phi);
        w.scale(-eps);
        w.axpy(1.0 / eps, &phi.map(|s| pot.f(s)));

        let mut mu = laplacian(&w);
        mu.scale(-eps);
        let coeff = phi.map(|s| pot.f_prime(s) / eps + nu);
        mu.axpy(1.0, &coeff.mul(&w));
        (w, mu)
    }

    /// Everything the step and its linearization evaluate at the old level.
    pub fn frozen_stage(&self, phi: &ScalarField) -> FrozenStage {
        let (w, mu) = self.chemical_potentials(phi);
        let lambda = phi.map(|s| self.params.lambda(s));
        let grad_phi = gradient(phi);
        FrozenStage {
            w,
            mu,
            lambda,
            grad_phi,
        }
    }

    /// The implicit operator `x/tau - m eps^2 lap^3 x + m A lap^2 x`.
    pub fn apply_implicit(&self, x: &ScalarField) -> ScalarField {
        let m = self.params.mobility;
        let e2 = self.params.eps * self.params.eps;
        let mut out = x.clone();
        out.scale(1.0 / self.tau);
        out.axpy(-m * e2, &trilaplacian(x));
        out.axpy(m * self.a_stab, &bilaplacian(x));
        out
    }

    /// Solve the implicit system. Returns `(solution, iterations, residual)`.
    ///
    /// A guess whose residual is exactly zero is returned unchanged, which
    /// keeps equilibria bit-exact through the spectral path as well.
    pub fn implicit_solve(
        &self,
        rhs: &ScalarField,
        guess: &ScalarField,
    ) -> Result<(ScalarField, usize, f64)> {
        let r0 = rhs.sub(&self.apply_implicit(guess));
        if r0.max_abs() == 0.0 {
            return Ok((guess.clone(), 0, 0.0));
        }
        let rhs_norm = norm_l2(rhs).max(f64::MIN_POSITIVE);
        if let Some(sg) = &self.spectral {
            let x = sg.solve_diagonal(rhs, &self.ch_symbol);
            let res = norm_l2(&rhs.sub(&self.apply_implicit(&x))) / rhs_norm;
            return Ok((x, 0, res));
        }
        let grid = self.grid;
        let mut x = guess.data().to_vec();
        let mut apply = |xs: &[f64], ys: &mut [f64]| {
            let f = ScalarField::from_data(grid, xs.to_vec()).expect("len");
            ys.copy_from_slice(self.apply_implicit(&f).data());
        };
        let res = pcg(
            &mut apply,
            rhs.data(),
            &mut x,
            None,
            self.ch_rtol,
            1e-300,
            60 * grid.cells(),
        );
        let rel = res.residual / rhs_norm;
        if !res.converged && rel > 1e-8 {
            return Err(Error::SolverDiverged {
                what: "phase implicit solve",
                residual: rel,
                iterations: res.iterations,
            });
        }
        Ok((
            ScalarField::from_data(grid, x)?,
            res.iterations,
            rel,
        ))
    }

    /// Brinkman solve for the velocity given the old-level stage data.
    pub fn velocity_solve(
        &self,
        stage: &FrozenStage,
        force: VectorField,
    ) -> Result<(VectorField, usize, f64)> {
        let problem = BrinkmanProblem {
            grid: self.grid,
            lambda_field: stage.lambda.clone(),
            force,
            eta0: self.params.eta0,
            solver_tol: self.brinkman_tol,
            max_iter: 10 * self.grid.cells(),
        };
        let sol = solve_brinkman(&problem)?;
        Ok((sol.v, sol.iterations, sol.residual))
    }

    /// Advance one step from `phi_n` under control `u_n`.
    pub fn step(&self, step_idx: usize, phi_n: &ScalarField, u_n: &VectorField) -> Result<StepOutput> {
        let params = &self.params;
        let stage = self.frozen_stage(phi_n);
        if !stage.mu.is_finite() {
            return Err(Error::Blowup {
                step: step_idx,
                advective_cfl: f64::NAN,
            });
        }

        let (v, brinkman_iters, brinkman_res) = if self.grid.dim() == 1 {
            (VectorField::zeros(self.grid), 0, 0.0)
        } else {
            let mut force = stage.grad_phi.mul_scalar(&stage.mu);
            force.axpy(1.0, u_n);
            self.velocity_solve(&stage, force)?
        };

        let conv = v.dot(&stage.grad_phi);
        let m = params.mobility;
        let e2 = params.eps * params.eps;

        let mut rhs = phi_n.clone();
        rhs.scale(1.0 / self.tau);
        rhs.axpy(-1.0, &conv);
        rhs.axpy(1.0, &phi_n.map(|s| params.source_s(s)));
        rhs.axpy(m, &laplacian(&stage.mu));
        rhs.axpy(-m * e2, &trilaplacian(phi_n));
        rhs.axpy(m * self.a_stab, &bilaplacian(phi_n));

        let (phi_next, ch_iters, ch_res) = self.implicit_solve(&rhs, phi_n)?;
        if !phi_next.is_finite() {
            return Err(Error::Blowup {
                step: step_idx,
                advective_cfl: self.tau * v.max_abs() / self.grid.min_h(),
            });
        }

        let (w_rep, mu_rep) = self.chemical_potentials(&phi_next);
        Ok(StepOutput {
            phi_next,
            mu_rep,
            w_rep,
            v,
            brinkman_iters,
            ch_iters,
            residual: ch_res.max(brinkman_res),
        })
    }
}

/// Integrate the state system from `phi0` under the control `u`.
pub fn solve_forward(
    phi0: &ScalarField,
    u: &ControlField,
    params: &ModelParams,
    potential: Potential,
    tg: &TimeGrid,
) -> Result<StateTrajectory> {
    if u.steps() != tg.steps {
        return Err(Error::ShapeMismatch(
            "control must have one entry per time step".into(),
        ));
    }
    if u.grid() != phi0.grid() {
        return Err(Error::IncompatibleGrids);
    }
    if !phi0.is_finite() {
        return Err(Error::InvalidArgument("phi0 must be finite".into()));
    }
    let solver = StateSolver::new(*phi0.grid(), *params, potential, tg.tau)?;

    let mut phi = Vec::with_capacity(tg.steps + 1);
    let mut mu = Vec::with_capacity(tg.steps);
    let mut w = Vec::with_capacity(tg.steps);
    let mut v = Vec::with_capacity(tg.steps);
    let mut diagnostics = Vec::with_capacity(tg.steps + 1);

    phi.push(phi0.clone());
    diagnostics.push(StepDiagnostics {
        energy: energy_total(phi0, params, &potential),
        mass: integral(phi0),
        brinkman_iters: 0,
        ch_iters: 0,
        residual: 0.0,
    });

    for n in 0..tg.steps {
        let out = solver.step(n, &phi[n], u.get(n))?;
        diagnostics.push(StepDiagnostics {
            energy: energy_total(&out.phi_next, params, &potential),
            mass: integral(&out.phi_next),
            brinkman_iters: out.brinkman_iters,
            ch_iters: out.ch_iters,
            residual: out.residual,
        });
        phi.push(out.phi_next);
        mu.push(out.mu_rep);
        w.push(out.w_rep);
        v.push(out.v);
    }

    Ok(StateTrajectory {
        time_grid: *tg,
        phi,
        mu,
        w,
        v,
        diagnostics,
    })
}

/// Ratio `max_t |phi1 - phi2|_H1 / |u1 - u2|_{L2}` for two forward solves, a
/// monitored local-Lipschitz diagnostic of the control-to-state map.
pub fn lipschitz_probe(
    phi0: &ScalarField,
    u1: &ControlField,
    u2: &ControlField,
    params: &ModelParams,
    potential: Potential,
    tg: &TimeGrid,
) -> Result<f64> {
    let mut du = u1.clone();
    du.axpy(-1.0, u2);
    let denom = du.norm_space_time(tg.tau);
    if denom == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    let t1 = solve_forward(phi0, u1, params, potential, tg)?;
    let t2 = solve_forward(phi0, u2, params, potential, tg)?;
    let mut numer = 0.0f64;
    for n in 0..=tg.steps {
        numer = numer.max(norm_h1(&t1.phi[n].sub(&t2.phi[n])));
    }
    Ok(numer / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{mean, BcMode};
    use crate::model::SourceProfile;
    use crate::rng::SeedRng;
    use approx::assert_relative_eq;
    use core::f64::consts::PI;

    fn quartic() -> Potential {
        Potential::Quartic
    }

    #[test]
    fn pure_phase_is_exactly_stationary() {
        for c in [1.0f64, -1.0] {
            let grid = Grid::periodic(2, &[8, 8]).unwrap();
            let tg = TimeGrid::new(0.1, 5).unwrap();
            let params = ModelParams::default();
            let phi0 = ScalarField::constant(grid, c);
            let u = ControlField::zeros(grid, 5);
            let traj = solve_forward(&phi0, &u, &params, quartic(), &tg).unwrap();
            for n in 0..=5 {
                assert_eq!(traj.phi[n].data(), phi0.data(), "level {n}");
                assert_eq!(traj.diagnostics[n].energy.total, 0.0);
            }
            for n in 0..5 {
                assert_eq!(traj.v[n].max_abs(), 0.0);
                assert_eq!(traj.mu[n].max_abs(), 0.0);
                assert_eq!(traj.w[n].max_abs(), 0.0);
            }
        }
    }

    #[test]
    fn spatially_constant_state_stays_constant() {
        let grid = Grid::new(1, &[8], &[1.0], BcMode::BoxNeumann).unwrap();
        let tg = TimeGrid::new(0.05, 4).unwrap();
        let params = ModelParams::default(); // sigma = 0, h = 0
        let phi0 = ScalarField::constant(grid, 0.37);
        let u = ControlField::zeros(grid, 4);
        let traj = solve_forward(&phi0, &u, &params, quartic(), &tg).unwrap();
        for n in 0..=4 {
            assert_eq!(traj.phi[n].data(), phi0.data());
        }
    }

    #[test]
    fn one_step_matches_scalar_amplification_factor() {
        // linearize about phi = 1: per Fourier mode with eigenvalue lam the
        // coded scheme reduces to a scalar update a -> G(lam) a. Re-derive G
        // here and compare against the solver on a tiny perturbation.
        let n = 16;
        let k = 2.0;
        let grid = Grid::periodic(1, &[n]).unwrap();
        let tau = 1e-3;
        let params = ModelParams::default();
        let pot = quartic();
        let solver = StateSolver::new(grid, params, pot, tau).unwrap();

        let delta = 1e-6;
        let phi0 = ScalarField::from_fn(grid, |x| 1.0 + delta * libm::cos(2.0 * PI * k * x[0]));
        let u = VectorField::zeros(grid);
        let out = solver.step(0, &phi0, &u).unwrap();

        let h = grid.h(0);
        let s = libm::sin(2.0 * PI * k * h) / h;
        let lam = s * s;
        let fp = pot.f_prime(1.0); // 2
        let big_w = lam + fp; // d w / d a   (eps = 1)
        let mu_a = (lam + fp + params.nu) * big_w; // d mu / d a
        let a_stab = solver.a_stab();
        let m = params.mobility;
        let numer = 1.0 / tau - m * lam * mu_a + m * lam * lam * lam + m * a_stab * lam * lam;
        let denom = 1.0 / tau + m * lam * lam * lam + m * a_stab * lam * lam;
        let growth = numer / denom;

        // project the numeric step onto the mode
        let mode = ScalarField::from_fn(grid, |x| libm::cos(2.0 * PI * k * x[0]));
        let a0 = crate::field::inner(&phi0.map(|x| x - 1.0), &mode).unwrap()
            / crate::field::inner(&mode, &mode).unwrap();
        let a1 = crate::field::inner(&out.phi_next.map(|x| x - 1.0), &mode).unwrap()
            / crate::field::inner(&mode, &mode).unwrap();
        assert_relative_eq!(a1 / a0, growth, max_relative = 1e-4);
    }

    #[test]
    fn mass_is_conserved_per_step_in_box_mode() {
        let grid = Grid::new(2, &[8, 8], &[1.0, 1.0], BcMode::BoxNeumann).unwrap();
        let steps = 4;
        let tg = TimeGrid::new(0.004, steps).unwrap();
        let params = ModelParams {
            lambda_lo: 0.5,
            lambda_hi: 1.5,
            lambda_profile: crate::model::LambdaProfile::SmoothBounded,
            ..Default::default()
        };
        let mut rng = SeedRng::new(55);
        let mut phi0 = rng.smooth_scalar(grid, 0.4, 2);
        phi0.axpy(1.0, &ScalarField::constant(grid, 0.3));
        let mut u = ControlField::zeros(grid, steps);
        for n in 0..steps {
            *u.get_mut(n) = rng.smooth_vector(grid, 0.5, 2);
        }
        let traj = solve_forward(&phi0, &u, &params, quartic(), &tg).unwrap();
        for n in 0..steps {
            let m0 = traj.diagnostics[n].mass;
            let m1 = traj.diagnostics[n + 1].mass;
            assert!(
                (m1 - m0).abs() <= 1e-10 * m0.abs(),
                "step {n}: {m0} -> {m1}"
            );
        }
    }

    #[test]
    fn energy_decays_in_restricted_mode() {
        // nu = 0, no flow (1D), no source: the step is a stabilized IMEX
        // discretization of the H^-1 gradient flow of the squared-residual
        // energy, monitored to be non-increasing at small tau.
        let grid = Grid::periodic(1, &[32]).unwrap();
        let steps = 30;
        let tg = TimeGrid::new(30.0 * 2e-6, steps).unwrap();
        let params = ModelParams::default();
        let mut rng = SeedRng::new(99);
        let phi0 = rng.smooth_scalar(grid, 0.6, 3);
        let u = ControlField::zeros(grid, steps);
        let traj = solve_forward(&phi0, &u, &params, quartic(), &tg).unwrap();
        let e0 = traj.diagnostics[0].energy.total;
        for n in 0..steps {
            let a = traj.diagnostics[n].energy.total;
            let b = traj.diagnostics[n + 1].energy.total;
            assert!(b <= a + 1e-8 * e0, "step {n}: {a} -> {b}");
        }
    }

    #[test]
    fn self_convergence_first_order_in_tau() {
        let grid = Grid::periodic(1, &[16]).unwrap();
        let params = ModelParams {
            nu: 0.5,
            ..Default::default()
        };
        let mut rng = SeedRng::new(7);
        // fundamental mode only: higher modes relax below any tested step
        let phi0 = rng.smooth_scalar(grid, 1.0, 1);
        // mid-transient horizon: a few relaxation times of the slowest mode
        let t_final = 4e-5;
        let solve = |steps: usize| {
            let tg = TimeGrid::new(t_final, steps).unwrap();
            let u = ControlField::zeros(grid, steps);
            solve_forward(&phi0, &u, &params, quartic(), &tg)
                .unwrap()
                .phi
                .last()
                .unwrap()
                .clone()
        };
        let p1 = solve(4);
        let p2 = solve(8);
        let p4 = solve(16);
        let d1 = norm_l2(&p1.sub(&p2));
        let d2 = norm_l2(&p2.sub(&p4));
        let slope = libm::log2(d1 / d2);
        assert!((slope - 1.0).abs() <= 0.2, "slope {slope} (d1 {d1:.3e}, d2 {d2:.3e})");
    }

    #[test]
    fn self_convergence_second_order_in_h() {
        // restrict fine solutions to the coarse grid by 2-cell averaging;
        // tau is far below the spatial error so the h-order dominates
        let params = ModelParams::default();
        let t_final = 2e-5;
        let steps = 200;
        let solve = |n: usize| {
            let grid = Grid::periodic(1, &[n]).unwrap();
            let phi0 = ScalarField::from_fn(grid, |x| 0.5 * libm::sin(2.0 * PI * x[0]));
            let tg = TimeGrid::new(t_final, steps).unwrap();
            let u = ControlField::zeros(grid, steps);
            solve_forward(&phi0, &u, &params, quartic(), &tg)
                .unwrap()
                .phi
                .last()
                .unwrap()
                .clone()
        };
        let restrict = |fine: &ScalarField, n_coarse: usize| {
            let grid = Grid::periodic(1, &[n_coarse]).unwrap();
            let data: Vec<f64> = (0..n_coarse)
                .map(|j| 0.5 * (fine.data()[2 * j] + fine.data()[2 * j + 1]))
                .collect();
            ScalarField::from_data(grid, data).unwrap()
        };
        let c16 = solve(16);
        let c32 = solve(32);
        let c64 = solve(64);
        let d1 = norm_l2(&restrict(&c32, 16).sub(&c16));
        let d2 = norm_l2(&restrict(&c64, 32).sub(&c32));
        let slope = libm::log2(d1 / d2);
        assert!((slope - 2.0).abs() <= 0.4, "slope {slope} (d1 {d1:.3e}, d2 {d2:.3e})");
    }

    #[test]
    fn trajectories_are_bit_reproducible() {
        let grid = Grid::periodic(2, &[6, 6]).unwrap();
        let steps = 3;
        let tg = TimeGrid::new(0.01, steps).unwrap();
        let params = ModelParams {
            lambda_lo: 0.5,
            lambda_hi: 1.2,
            lambda_profile: crate::model::LambdaProfile::SmoothBounded,
            sigma: 0.2,
            h_source: SourceProfile::Tanh { amplitude: 0.5 },
            nu: -0.3,
            ..Default::default()
        };
        let mut rng = SeedRng::new(15);
        let phi0 = rng.smooth_scalar(grid, 0.5, 2);
        let mut u = ControlField::zeros(grid, steps);
        for n in 0..steps {
            *u.get_mut(n) = rng.smooth_vector(grid, 0.3, 2);
        }
        let t1 = solve_forward(&phi0, &u, &params, quartic(), &tg).unwrap();
        let t2 = solve_forward(&phi0, &u, &params, quartic(), &tg).unwrap();
        for n in 0..=steps {
            assert_eq!(t1.phi[n].data(), t2.phi[n].data());
        }
    }

    #[test]
    fn blowup_is_reported_with_step_index() {
        let grid = Grid::periodic(1, &[8]).unwrap();
        let tg = TimeGrid::new(1.0, 4).unwrap();
        let params = ModelParams::default();
        let phi0 = ScalarField::constant(grid, 1e80);
        let u = ControlField::zeros(grid, 4);
        match solve_forward(&phi0, &u, &params, quartic(), &tg) {
            Err(Error::Blowup { step, .. }) => assert_eq!(step, 0),
            other => panic!("expected blowup, got {other:?}"),
        }
    }

    #[test]
    fn lipschitz_probe_behaves() {
        let grid = Grid::periodic(2, &[6, 6]).unwrap();
        let steps = 3;
        let tg = TimeGrid::new(0.006, steps).unwrap();
        let params = ModelParams {
            lambda_lo: 0.8,
            lambda_hi: 1.6,
            lambda_profile: crate::model::LambdaProfile::SmoothBounded,
            ..Default::default()
        };
        let mut rng = SeedRng::new(25);
        let phi0 = rng.smooth_scalar(grid, 0.4, 2);
        let mut u1 = ControlField::zeros(grid, steps);
        for n in 0..steps {
            *u1.get_mut(n) = rng.smooth_vector(grid, 0.4, 2);
        }
        let mut dir = ControlField::zeros(grid, steps);
        for n in 0..steps {
            *dir.get_mut(n) = rng.smooth_vector(grid, 1.0, 2);
        }

        // equal controls: guarded error
        assert_eq!(
            lipschitz_probe(&phi0, &u1, &u1, &params, quartic(), &tg).unwrap_err(),
            Error::ZeroDenominator
        );

        let mut ratios = Vec::new();
        for t in [1e-1, 1e-2, 1e-3] {
            let mut u2 = u1.clone();
            u2.axpy(t, &dir);
            let r = lipschitz_probe(&phi0, &u1, &u2, &params, quartic(), &tg).unwrap();
            let r_swapped = lipschitz_probe(&phi0, &u2, &u1, &params, quartic(), &tg).unwrap();
            assert_relative_eq!(r, r_swapped, max_relative = 1e-12);
            ratios.push(r);
        }
        let rmax = ratios.iter().cloned().fold(0.0f64, f64::max);
        let rmin = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(rmax <= 3.0 * rmin, "ratios {ratios:?}");
    }

    #[test]
    fn forward_mean_matches_mass_column() {
        let grid = Grid::periodic(1, &[8]).unwrap();
        let tg = TimeGrid::new(0.01, 2).unwrap();
        let params = ModelParams::default();
        let phi0 = ScalarField::constant(grid, 0.25);
        let u = ControlField::zeros(grid, 2);
        let traj = solve_forward(&phi0, &u, &params, quartic(), &tg).unwrap();
        assert_relative_eq!(traj.diagnostics[0].mass, 0.25, max_relative = 1e-13);
        assert_relative_eq!(mean(&traj.phi[2]), 0.25, max_relative = 1e-12);
    }
}
