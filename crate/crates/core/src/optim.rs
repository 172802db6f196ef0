//! Projected proximal-gradient minimization of the full objective
//! (tracking + Tikhonov + L1 + box indicator).
//!
//! The fixed points of [`prox_grad_step`] are exactly the controls
//! satisfying the pointwise projection conditions
//! `u_i = max(lo_i, min(hi_i, -(omega_i + kappa_i lambda_i)/b3))` with a
//! subgradient selection `lambda_i`, so the stationarity residual used for
//! termination is the optimality system itself. Backtracking on the full
//! objective keeps the cost sequence monotone; the proximal map produces
//! exact zeros, which makes the sparsity fraction well-defined without a
//! tolerance.
//!
//! The outer loop is sequential. Sweep entries (distinct sparsity weights)
//! are independent and may run on separate threads, each owning its own
//! trajectory storage.

use alloc::vec;
use alloc::vec::Vec;

use crate::adjoint::{adjoint_sweep_discrete, AdjointTrajectory, ReducedGradient};
use crate::field::{ScalarField, TimeGrid, VectorField};
use crate::forward::{solve_forward, ControlField, StateTrajectory};
use crate::model::{cost_j, prox_box_l1, BoxBounds, CostBreakdown, CostSpec, ModelParams, Potential};
use crate::{Error, Result};

/// Everything needed to evaluate the reduced objective.
#[derive(Clone, Copy)]
pub struct ControlProblem<'a> {
    pub phi0: &'a ScalarField,
    pub spec: &'a CostSpec,
    pub bounds: &'a BoxBounds,
    pub params: &'a ModelParams,
    pub potential: Potential,
    pub tg: &'a TimeGrid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    /// Initial proximal step.
    pub step_tau: f64,
    /// Multiplicative backtracking factor in (0, 1).
    pub backtrack_factor: f64,
    pub backtrack_max: usize,
    /// Stationarity tolerance.
    pub stop_tol: f64,
    /// Outer iteration cap.
    pub max_outer: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            step_tau: 1.0,
            backtrack_factor: 0.5,
            backtrack_max: 40,
            stop_tol: 1e-6,
            max_outer: 200,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_tau > 0.0) || !(self.stop_tol > 0.0) {
            return Err(Error::InvalidArgument(
                "step_tau and stop_tol must be positive".into(),
            ));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(Error::InvalidArgument(
                "backtrack_factor must lie in (0, 1)".into(),
            ));
        }
        if self.backtrack_max == 0 || self.max_outer == 0 {
            return Err(Error::InvalidArgument(
                "backtrack_max and max_outer must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Per-iteration record of the outer loop.
#[derive(Debug, Clone)]
pub struct IterRecord {
    pub iter: usize,
    pub cost: CostBreakdown,
    pub stationarity: f64,
    pub step: f64,
    pub backtracks: usize,
    /// Bit-exact-zero fraction of the iterate, per control component.
    pub sparsity: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct OptimizerReport {
    pub iterates: Vec<IterRecord>,
    pub final_stationarity: f64,
    /// Fraction of bit-exact zero entries, per control component.
    pub sparsity_fraction: Vec<f64>,
    /// Maximal pointwise projection defect at the final iterate.
    pub projection_residual: f64,
    pub wall_time_secs: f64,
    pub converged: bool,
    pub backtracking_exhausted: bool,
}

/// Result bundle of [`optimize`].
pub struct OptimizeOutcome {
    pub u: ControlField,
    pub state: StateTrajectory,
    pub adjoint: AdjointTrajectory,
    pub gradient: ReducedGradient,
    pub report: OptimizerReport,
}

/// One proximal-gradient step: componentwise soft threshold of
/// `u - step * smooth_gradient` with threshold `step * kappa_i`, clipped to
/// the box.
pub fn prox_grad_step(
    u: &ControlField,
    gradient: &ReducedGradient,
    step: f64,
    bounds: &BoxBounds,
) -> Result<ControlField> {
    if !(step > 0.0) {
        return Err(Error::InvalidArgument("step must be positive".into()));
    }
    if gradient.smooth.len() != u.steps() {
        return Err(Error::ShapeMismatch("gradient step count".into()));
    }
    let dim = u.grid().dim();
    let mut out = u.clone();
    for n in 0..u.steps() {
        for i in 0..dim {
            let g = gradient.smooth[n].comp(i).data();
            let k = step * gradient.kappa[i];
            let comp = out.get_mut(n).comp_mut(i);
            let data = comp.data_mut();
            for c in 0..data.len() {
                let (lo, hi) = bounds.at(i, c);
                data[c] = prox_box_l1(data[c] - step * g[c], k, lo, hi)?;
            }
        }
    }
    Ok(out)
}

/// Scaled fixed-point residual `|u - prox(u - s g)|_U / s`; zero exactly at
/// points satisfying the projection conditions.
pub fn stationarity_residual(
    u: &ControlField,
    gradient: &ReducedGradient,
    bounds: &BoxBounds,
    probe_step: f64,
    tau: f64,
) -> Result<f64> {
    if !(probe_step > 0.0) {
        return Err(Error::InvalidArgument("probe_step must be positive".into()));
    }
    let trial = prox_grad_step(u, gradient, probe_step, bounds)?;
    let mut diff = trial;
    diff.axpy(-1.0, u);
    Ok(diff.norm_space_time(tau) / probe_step)
}

/// Fraction of bit-exact zeros per component across all steps and cells.
pub fn sparsity_fraction(u: &ControlField) -> Vec<f64> {
    let dim = u.grid().dim();
    let mut frac = vec![0.0; dim];
    for i in 0..dim {
        let mut zeros = 0usize;
        let mut total = 0usize;
        for n in 0..u.steps() {
            for &x in u.get(n).comp(i).data() {
                total += 1;
                if x == 0.0 {
                    zeros += 1;
                }
            }
        }
        frac[i] = zeros as f64 / total as f64;
    }
    frac
}

/// Pointwise audit of the projection conditions and of the sparsity
/// equivalence `u_i = 0 <=> |omega_i| <= kappa_i`.
#[derive(Debug, Clone, Copy)]
pub struct KktAudit {
    pub max_defect: f64,
    /// Fraction of cells (components with `kappa > 0` only) where the
    /// equivalence holds within the one-sided margins.
    pub equivalence_fraction: f64,
    pub checked_cells: usize,
}

pub fn kkt_audit(
    u: &ControlField,
    omega: &[VectorField],
    bounds: &BoxBounds,
    kappa: &[f64],
    b3: f64,
    tol: f64,
) -> Result<KktAudit> {
    if omega.len() != u.steps() {
        return Err(Error::ShapeMismatch("omega step count".into()));
    }
    let dim = u.grid().dim();
    let mut max_defect = 0.0f64;
    let mut checked = 0usize;
    let mut ok = 0usize;
    for n in 0..u.steps() {
        for i in 0..dim {
            let ud = u.get(n).comp(i).data();
            let od = omega[n].comp(i).data();
            let k = kappa[i];
            for c in 0..ud.len() {
                let (lo, hi) = bounds.at(i, c);
                // defect-minimizing subgradient selection
                let lam = if ud[c] > 0.0 {
                    1.0
                } else if ud[c] < 0.0 {
                    -1.0
                } else if k > 0.0 {
                    (-od[c] / k).clamp(-1.0, 1.0)
                } else {
                    0.0
                };
                let proj = (-(od[c] + k * lam) / b3).clamp(lo, hi);
                max_defect = max_defect.max((ud[c] - proj).abs());
                if k > 0.0 {
                    checked += 1;
                    let zero = ud[c].abs() <= tol;
                    let violated = if zero {
                        od[c].abs() > k + tol
                    } else {
                        od[c].abs() < k - tol
                    };
                    if !violated {
                        ok += 1;
                    }
                }
            }
        }
    }
    Ok(KktAudit {
        max_defect,
        equivalence_fraction: if checked > 0 {
            ok as f64 / checked as f64
        } else {
            1.0
        },
        checked_cells: checked,
    })
}

fn clip_into_box(u: &mut ControlField, bounds: &BoxBounds) {
    let dim = u.grid().dim();
    for n in 0..u.steps() {
        for i in 0..dim {
            let data = u.get_mut(n).comp_mut(i).data_mut();
            for c in 0..data.len() {
                let (lo, hi) = bounds.at(i, c);
                data[c] = data[c].clamp(lo, hi);
            }
        }
    }
}

/// Proximal-gradient loop: forward solve, discrete adjoint, proximal step,
/// Armijo backtracking on the full objective. Terminates on the
/// stationarity tolerance or the iteration cap; backtracking exhaustion
/// returns the best iterate with a warning flag.
pub fn optimize(
    problem: &ControlProblem<'_>,
    config: &OptimizerConfig,
    u0: Option<&ControlField>,
) -> Result<OptimizeOutcome> {
    config.validate()?;
    let tg = problem.tg;
    let grid = *problem.phi0.grid();
    problem.spec.validate(&grid, tg.steps)?;

    #[cfg(feature = "std")]
    let t_start = std::time::Instant::now();

    let mut u = match u0 {
        Some(u0) => {
            if u0.steps() != tg.steps {
                return Err(Error::ShapeMismatch("u0 step count".into()));
            }
            let mut u = u0.clone();
            clip_into_box(&mut u, problem.bounds);
            u
        }
        None => {
            let mut u = ControlField::zeros(grid, tg.steps);
            clip_into_box(&mut u, problem.bounds);
            u
        }
    };

    let forward = |u: &ControlField| -> Result<(StateTrajectory, CostBreakdown)> {
        let state = solve_forward(problem.phi0, u, problem.params, problem.potential, tg)?;
        let cost = cost_j(&state.phi, u.values(), problem.spec, tg)?;
        Ok((state, cost))
    };

    let (mut state, mut cost) = forward(&u)?;
    let (mut adj, mut grad) =
        adjoint_sweep_discrete(&state, &u, problem.spec, problem.params, problem.potential)?;

    let mut step = config.step_tau;
    let mut iterates = Vec::new();
    let mut converged = false;
    let mut backtracking_exhausted = false;
    let mut last_backtracks = 0usize;
    let armijo = 1e-4;

    for iter in 0..=config.max_outer {
        let resid = stationarity_residual(&u, &grad, problem.bounds, step, tg.tau)?;
        iterates.push(IterRecord {
            iter,
            cost,
            stationarity: resid,
            step,
            backtracks: last_backtracks,
            sparsity: sparsity_fraction(&u),
        });
        if resid <= config.stop_tol {
            converged = true;
            break;
        }
        if iter == config.max_outer {
            break;
        }

        let mut accepted: Option<(ControlField, StateTrajectory, CostBreakdown)> = None;
        let mut tries = 0usize;
        let mut trial_step = step;
        loop {
            let u_trial = prox_grad_step(&u, &grad, trial_step, problem.bounds)?;
            let mut diff = u_trial.clone();
            diff.axpy(-1.0, &u);
            let dn2 = diff.inner_space_time(&diff, tg.tau)?;
            match forward(&u_trial) {
                Ok((st, ct)) => {
                    if ct.total <= cost.total - armijo / trial_step * dn2 {
                        accepted = Some((u_trial, st, ct));
                    }
                }
                Err(Error::Blowup { .. }) => {} // treat as a failed trial
                Err(e) => return Err(e),
            }
            if accepted.is_some() {
                break;
            }
            tries += 1;
            if tries >= config.backtrack_max {
                backtracking_exhausted = true;
                break;
            }
            trial_step *= config.backtrack_factor;
        }
        last_backtracks = tries;

        match accepted {
            Some((u_new, st, ct)) => {
                u = u_new;
                state = st;
                cost = ct;
                step = trial_step;
                let (a, g) = adjoint_sweep_discrete(
                    &state,
                    &u,
                    problem.spec,
                    problem.params,
                    problem.potential,
                )?;
                adj = a;
                grad = g;
            }
            None => break, // exhausted: return the best (current) iterate
        }
    }

    let audit = kkt_audit(
        &u,
        &adj.omega,
        problem.bounds,
        &problem.spec.kappa,
        problem.spec.b3,
        10.0 * config.stop_tol,
    )?;
    let final_stationarity = iterates.last().map(|r| r.stationarity).unwrap_or(f64::NAN);

    #[cfg(feature = "std")]
    let wall_time_secs = t_start.elapsed().as_secs_f64();
    #[cfg(not(feature = "std"))]
    let wall_time_secs = 0.0;

    let report = OptimizerReport {
        final_stationarity,
        sparsity_fraction: sparsity_fraction(&u),
        projection_residual: audit.max_defect,
        wall_time_secs,
        converged,
        backtracking_exhausted,
        iterates,
    };

    Ok(OptimizeOutcome {
        u,
        state,
        adjoint: adj,
        gradient: grad,
        report,
    })
}

/// Sup-norm of the adjoint velocity at zero control, the calibration scale
/// for sparsity sweeps.
pub fn omega_sup_at_zero_control(problem: &ControlProblem<'_>) -> Result<f64> {
    let grid = *problem.phi0.grid();
    let u = ControlField::zeros(grid, problem.tg.steps);
    let state = solve_forward(problem.phi0, &u, problem.params, problem.potential, problem.tg)?;
    let (adj, _) =
        adjoint_sweep_discrete(&state, &u, problem.spec, problem.params, problem.potential)?;
    Ok(adj.omega.iter().fold(0.0, |m, o| m.max(o.max_abs())))
}

#[derive(Debug, Clone, Copy)]
pub struct SweepRow {
    pub kappa: f64,
    /// Overall fraction of bit-exact zero entries.
    pub fraction: f64,
    pub omega_inf: f64,
}

#[derive(Debug, Clone)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Smallest grid value reaching fraction 1.0.
    pub full_sparsity_kappa: Option<f64>,
    /// Whether `|omega|_inf <= kappa` held at that value.
    pub omega_bound_verified: bool,
    /// Soft monotonicity flag (fraction non-decreasing along the grid).
    pub monotone: bool,
}

/// One optimizer run per sparsity weight on an ascending grid.
pub fn sparsity_sweep(
    problem: &ControlProblem<'_>,
    config: &OptimizerConfig,
    kappa_grid: &[f64],
) -> Result<SweepTable> {
    if kappa_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument("kappa grid must be ascending".into()));
    }
    let dim = problem.phi0.grid().dim();
    let mut rows = Vec::with_capacity(kappa_grid.len());
    for &kappa in kappa_grid {
        let mut spec = problem.spec.clone();
        spec.kappa = vec![kappa; dim];
        let sub = ControlProblem {
            spec: &spec,
            ..*problem
        };
        let outcome = optimize(&sub, config, None)?;
        let mut zeros = 0usize;
        let mut total = 0usize;
        for n in 0..outcome.u.steps() {
            for i in 0..dim {
                for &x in outcome.u.get(n).comp(i).data() {
                    total += 1;
                    if x == 0.0 {
                        zeros += 1;
                    }
                }
            }
        }
        let omega_inf = outcome.adjoint.omega.iter().fold(0.0, |m: f64, o| m.max(o.max_abs()));
        rows.push(SweepRow {
            kappa,
            fraction: zeros as f64 / total as f64,
            omega_inf,
        });
    }
    let full = rows.iter().find(|r| r.fraction == 1.0);
    let table = SweepTable {
        full_sparsity_kappa: full.map(|r| r.kappa),
        omega_bound_verified: full.map(|r| r.omega_inf <= r.kappa).unwrap_or(false),
        monotone: rows.windows(2).all(|w| w[0].fraction <= w[1].fraction),
        rows,
    };
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid;
    use crate::model::LambdaProfile;
    use crate::rng::SeedRng;
    use approx::assert_relative_eq;

    fn quartic() -> Potential {
        Potential::Quartic
    }

    fn small_problem_params() -> ModelParams {
        ModelParams {
            nu: 0.2,
            lambda_lo: 0.6,
            lambda_hi: 1.4,
            lambda_profile: LambdaProfile::SmoothBounded,
            ..Default::default()
        }
    }

    fn mk_control(grid: Grid, steps: usize, seed: u64, amp: f64) -> ControlField {
        let mut rng = SeedRng::new(seed);
        let mut u = ControlField::zeros(grid, steps);
        for n in 0..steps {
            *u.get_mut(n) = rng.smooth_vector(grid, amp, 2);
        }
        u
    }

    #[test]
    fn prox_step_scalar_instance() {
        // u = 0.5, gradient 0.3, step 1, kappa 0.1, box [-1, 1] -> 0.1
        let grid = Grid::periodic(1, &[4]).unwrap();
        let u = {
            let mut u = ControlField::zeros(grid, 1);
            *u.get_mut(0).comp_mut(0) = ScalarField::constant(grid, 0.5);
            u
        };
        let grad = ReducedGradient {
            smooth: vec![{
                let mut v = VectorField::zeros(grid);
                *v.comp_mut(0) = ScalarField::constant(grid, 0.3);
                v
            }],
            kappa: vec![0.1],
        };
        let bounds = BoxBounds::symmetric(1, -1.0, 1.0).unwrap();
        let out = prox_grad_step(&u, &grad, 1.0, &bounds).unwrap();
        for &x in out.get(0).comp(0).data() {
            assert_relative_eq!(x, 0.1, max_relative = 1e-14);
        }
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        let grid = Grid::periodic(1, &[4]).unwrap();
        let u = mk_control(grid, 2, 1, 0.5);
        let grad = ReducedGradient {
            smooth: (0..2).map(|_| VectorField::zeros(grid)).collect(),
            kappa: vec![0.0],
        };
        let bounds = BoxBounds::symmetric(1, -1.0, 1.0).unwrap();
        let out = prox_grad_step(&u, &grad, 0.7, &bounds).unwrap();
        for n in 0..2 {
            assert_eq!(out.get(n), u.get(n));
        }
    }

    #[test]
    fn dead_zone_keeps_zero_control() {
        let grid = Grid::periodic(1, &[4]).unwrap();
        let u = ControlField::zeros(grid, 1);
        let mut rng = SeedRng::new(2);
        let omega = rng.random_scalar(grid, 0.09);
        let grad = ReducedGradient {
            smooth: vec![{
                let mut v = VectorField::zeros(grid);
                *v.comp_mut(0) = omega;
                v
            }],
            kappa: vec![0.1],
        };
        let bounds = BoxBounds::symmetric(1, -1.0, 1.0).unwrap();
        let out = prox_grad_step(&u, &grad, 1.0, &bounds).unwrap();
        assert_eq!(out.get(0).max_abs(), 0.0);
    }

    #[test]
    fn stationarity_reduces_to_gradient_norm_unconstrained() {
        let grid = Grid::periodic(1, &[8]).unwrap();
        let steps = 2;
        let tau = 0.1;
        let u = mk_control(grid, steps, 3, 0.01);
        let mut rng = SeedRng::new(4);
        let smooth: Vec<VectorField> = (0..steps).map(|_| rng.smooth_vector(grid, 0.02, 2)).collect();
        let grad = ReducedGradient {
            smooth: smooth.clone(),
            kappa: vec![0.0],
        };
        let bounds = BoxBounds::symmetric(1, -10.0, 10.0).unwrap();
        let resid = stationarity_residual(&u, &grad, &bounds, 1e-3, tau).unwrap();
        let mut gnorm2 = 0.0;
        for g in &smooth {
            gnorm2 += tau * crate::field::inner_vec(g, g).unwrap();
        }
        assert_relative_eq!(resid, libm::sqrt(gnorm2), max_relative = 1e-10);
    }

    #[test]
    fn probe_step_robustness_near_stationarity() {
        let grid = Grid::periodic(1, &[8]).unwrap();
        let u = mk_control(grid, 2, 5, 1e-7);
        let mut rng = SeedRng::new(6);
        let grad = ReducedGradient {
            smooth: (0..2).map(|_| rng.smooth_vector(grid, 1e-7, 2)).collect(),
            kappa: vec![0.0],
        };
        let bounds = BoxBounds::symmetric(1, -1.0, 1.0).unwrap();
        let r1 = stationarity_residual(&u, &grad, &bounds, 1e-2, 0.1).unwrap();
        let r2 = stationarity_residual(&u, &grad, &bounds, 5e-3, 0.1).unwrap();
        assert!(r1 <= 2.0 * r2 + 1e-15 && r2 <= 2.0 * r1 + 1e-15, "{r1} vs {r2}");
    }

    #[test]
    fn constructed_fixed_point_has_zero_residual_and_defect() {
        // build u from the projection formula and check that it is a
        // fixed point of the proximal step and defect-free in the audit
        let grid = Grid::periodic(1, &[8]).unwrap();
        let steps = 2;
        let tau = 0.1;
        let (b3, kappa) = (2.0, 0.3);
        let (lo, hi) = (-0.4, 0.4);
        let bounds = BoxBounds::symmetric(1, lo, hi).unwrap();
        let mut rng = SeedRng::new(77);
        let mut u = ControlField::zeros(grid, steps);
        let mut omega = Vec::new();
        for n in 0..steps {
            let om = rng.random_scalar(grid, 1.5);
            for (uc, &oc) in u
                .get_mut(n)
                .comp_mut(0)
                .data_mut()
                .iter_mut()
                .zip(om.data())
            {
                // the stationary u has sign -sign(omega) when |omega| > kappa
                let lam = if oc.abs() <= kappa { -oc / kappa } else { -oc.signum() };
                *uc = (-(oc + kappa * lam) / b3).clamp(lo, hi);
            }
            let mut v = VectorField::zeros(grid);
            *v.comp_mut(0) = om;
            omega.push(v);
        }
        let grad = ReducedGradient {
            smooth: (0..steps)
                .map(|n| {
                    let mut g = u.get(n).clone();
                    g.scale(b3);
                    g.axpy(1.0, &omega[n]);
                    g
                })
                .collect(),
            kappa: vec![kappa],
        };
        let resid = stationarity_residual(&u, &grad, &bounds, 0.37, tau).unwrap();
        assert!(resid <= 1e-12, "residual {resid}");
        let audit = kkt_audit(&u, &omega, &bounds, &[kappa], b3, 1e-12).unwrap();
        assert!(audit.max_defect <= 1e-12, "defect {}", audit.max_defect);
    }

    #[test]
    fn per_cell_bounds_are_honored_by_the_prox_step() {
        let grid = Grid::periodic(1, &[8]).unwrap();
        let mut rng = SeedRng::new(79);
        let lo = rng.random_scalar(grid, 0.5).map(|x| -0.5 + 0.2 * x);
        let hi = rng.random_scalar(grid, 0.5).map(|x| 0.5 + 0.2 * x);
        let bounds = BoxBounds::per_cell(vec![(lo.clone(), hi.clone())]).unwrap();
        let u = {
            let mut u = ControlField::zeros(grid, 1);
            *u.get_mut(0).comp_mut(0) = rng.random_scalar(grid, 2.0);
            u
        };
        let grad = ReducedGradient {
            smooth: vec![rng.smooth_vector(grid, 3.0, 2)],
            kappa: vec![0.05],
        };
        let out = prox_grad_step(&u, &grad, 0.8, &bounds).unwrap();
        for (c, &x) in out.get(0).comp(0).data().iter().enumerate() {
            assert!(x >= lo.data()[c] && x <= hi.data()[c]);
        }
        // inverted per-cell bounds are rejected at construction
        assert!(BoxBounds::per_cell(vec![(hi, lo)]).is_err());
    }

    #[test]
    fn pure_tikhonov_converges_in_two_iterations() {
        let grid = Grid::periodic(2, &[6, 6]).unwrap();
        let steps = 2;
        let tg = TimeGrid::new(2e-3, steps).unwrap();
        let params = small_problem_params();
        let mut rng = SeedRng::new(7);
        let phi0 = rng.smooth_scalar(grid, 0.3, 1);
        let spec = CostSpec::static_target(
            (0.0, 0.0, 1.0),
            ScalarField::zeros(grid),
            ScalarField::zeros(grid),
            vec![0.0, 0.0],
            steps,
        );
        let bounds = BoxBounds::symmetric(2, -1.0, 1.0).unwrap();
        let problem = ControlProblem {
            phi0: &phi0,
            spec: &spec,
            bounds: &bounds,
            params: &params,
            potential: quartic(),
            tg: &tg,
        };
        let config = OptimizerConfig {
            step_tau: 1.0, // = 1/b3
            stop_tol: 1e-10,
            ..Default::default()
        };
        let u0 = mk_control(grid, steps, 8, 0.5);
        let out = optimize(&problem, &config, Some(&u0)).unwrap();
        assert!(out.report.converged);
        assert!(out.u.max_abs() == 0.0);
        // iterate records include the initial point; <= 2 accepted steps
        assert!(out.report.iterates.len() <= 3, "{:?}", out.report.iterates.len());
    }

    #[test]
    fn inverse_crime_recovery_descends_and_stalls_at_stationarity() {
        let grid = Grid::periodic(2, &[6, 6]).unwrap();
        let steps = 3;
        let tg = TimeGrid::new(3e-3, steps).unwrap();
        let params = small_problem_params();
        let mut rng = SeedRng::new(9);
        let phi0 = rng.smooth_scalar(grid, 0.4, 1);
        let u_hat = mk_control(grid, steps, 10, 0.4);
        let target = solve_forward(&phi0, &u_hat, &params, quartic(), &tg).unwrap();
        let spec = CostSpec {
            b1: 1.0,
            b2: 1.0,
            b3: 0.05,
            phi_q: target.phi.clone(),
            phi_omega: target.phi[steps].clone(),
            kappa: vec![0.0, 0.0],
        };
        let bounds = BoxBounds::symmetric(2, -1.0, 1.0).unwrap();
        let problem = ControlProblem {
            phi0: &phi0,
            spec: &spec,
            bounds: &bounds,
            params: &params,
            potential: quartic(),
            tg: &tg,
        };
        let config = OptimizerConfig {
            step_tau: 20.0,
            stop_tol: 1e-6,
            max_outer: 400,
            ..Default::default()
        };
        let out = optimize(&problem, &config, None).unwrap();
        let cost_at_zero = {
            let u0 = ControlField::zeros(grid, steps);
            let t = solve_forward(&phi0, &u0, &params, quartic(), &tg).unwrap();
            cost_j(&t.phi, u0.values(), &spec, &tg).unwrap().total
        };
        assert!(out.report.converged, "residual {}", out.report.final_stationarity);
        let final_cost = out.report.iterates.last().unwrap().cost.total;
        assert!(final_cost <= cost_at_zero);
        // monotone descent along the whole path
        for w in out.report.iterates.windows(2) {
            assert!(w[1].cost.total <= w[0].cost.total + 1e-15);
        }
        // feasibility is exact
        for n in 0..steps {
            for i in 0..2 {
                for &x in out.u.get(n).comp(i).data() {
                    assert!((-1.0..=1.0).contains(&x));
                }
            }
        }
    }

    #[test]
    fn large_kappa_yields_fully_sparse_control() {
        let grid = Grid::periodic(2, &[6, 6]).unwrap();
        let steps = 2;
        let tg = TimeGrid::new(2e-3, steps).unwrap();
        let params = small_problem_params();
        let mut rng = SeedRng::new(11);
        let phi0 = rng.smooth_scalar(grid, 0.4, 1);
        let mut spec = CostSpec::static_target(
            (1.0, 1.0, 1.0),
            ScalarField::constant(grid, 0.25),
            ScalarField::constant(grid, 0.25),
            vec![0.0, 0.0],
            steps,
        );
        let bounds = BoxBounds::symmetric(2, -1.0, 1.0).unwrap();
        let sup = {
            let problem = ControlProblem {
                phi0: &phi0,
                spec: &spec,
                bounds: &bounds,
                params: &params,
                potential: quartic(),
                tg: &tg,
            };
            omega_sup_at_zero_control(&problem).unwrap()
        };
        assert!(sup > 0.0);
        spec.kappa = vec![2.0 * sup, 2.0 * sup];
        let problem = ControlProblem {
            phi0: &phi0,
            spec: &spec,
            bounds: &bounds,
            params: &params,
            potential: quartic(),
            tg: &tg,
        };
        let out = optimize(&problem, &OptimizerConfig::default(), None).unwrap();
        assert!(out.report.converged);
        assert_eq!(out.u.max_abs(), 0.0);
        let omega_inf: f64 = out.adjoint.omega.iter().fold(0.0, |m, o| m.max(o.max_abs()));
        assert!(omega_inf <= 2.0 * sup);
        assert_eq!(out.report.sparsity_fraction, vec![1.0, 1.0]);
    }

    #[test]
    fn scaling_coherence_of_iterates() {
        let grid = Grid::periodic(2, &[6, 6]).unwrap();
        let steps = 2;
        let tg = TimeGrid::new(2e-3, steps).unwrap();
        let params = small_problem_params();
        let mut rng = SeedRng::new(12);
        let phi0 = rng.smooth_scalar(grid, 0.4, 1);
        let spec = CostSpec::static_target(
            (1.0, 0.5, 0.2),
            ScalarField::constant(grid, 0.2),
            ScalarField::constant(grid, 0.2),
            vec![0.05, 0.05],
            steps,
        );
        let s = 3.0;
        let spec_scaled = CostSpec::static_target(
            (s * 1.0, s * 0.5, s * 0.2),
            ScalarField::constant(grid, 0.2),
            ScalarField::constant(grid, 0.2),
            vec![s * 0.05, s * 0.05],
            steps,
        );
        let bounds = BoxBounds::symmetric(2, -1.0, 1.0).unwrap();
        let base = ControlProblem {
            phi0: &phi0,
            spec: &spec,
            bounds: &bounds,
            params: &params,
            potential: quartic(),
            tg: &tg,
        };
        let scaled = ControlProblem {
            spec: &spec_scaled,
            ..base
        };
        let config = OptimizerConfig {
            step_tau: 2.0,
            max_outer: 15,
            stop_tol: 1e-14,
            ..Default::default()
        };
        let config_scaled = OptimizerConfig {
            step_tau: 2.0 / s,
            ..config
        };
        let out1 = optimize(&base, &config, None).unwrap();
        let out2 = optimize(&scaled, &config_scaled, None).unwrap();
        for n in 0..steps {
            let diff = out1.u.get(n).sub(out2.u.get(n));
            assert!(
                diff.max_abs() <= 1e-10 * out1.u.max_abs().max(1e-10),
                "step {n}: {}",
                diff.max_abs()
            );
        }
        let c1 = out1.report.iterates.last().unwrap().cost.total;
        let c2 = out2.report.iterates.last().unwrap().cost.total;
        assert_relative_eq!(s * c1, c2, max_relative = 1e-10);
    }

    #[test]
    fn backtracking_exhaustion_returns_best_iterate() {
        let grid = Grid::periodic(2, &[6, 6]).unwrap();
        let steps = 2;
        let tg = TimeGrid::new(2e-3, steps).unwrap();
        let params = small_problem_params();
        let mut rng = SeedRng::new(13);
        let phi0 = rng.smooth_scalar(grid, 0.4, 1);
        let spec = CostSpec::static_target(
            (1.0, 0.0, 1.0),
            ScalarField::constant(grid, 0.3),
            ScalarField::zeros(grid),
            vec![0.0, 0.0],
            steps,
        );
        let bounds = BoxBounds::symmetric(2, -1.0, 1.0).unwrap();
        let problem = ControlProblem {
            phi0: &phi0,
            spec: &spec,
            bounds: &bounds,
            params: &params,
            potential: quartic(),
            tg: &tg,
        };
        // absurd step with a single backtrack try cannot satisfy Armijo
        let config = OptimizerConfig {
            step_tau: 1e12,
            backtrack_max: 1,
            stop_tol: 1e-14,
            max_outer: 5,
            ..Default::default()
        };
        let out = optimize(&problem, &config, None).unwrap();
        assert!(out.report.backtracking_exhausted);
        assert!(!out.report.converged);
        assert_eq!(out.u.max_abs(), 0.0); // best iterate is the start point
    }

    #[test]
    fn kkt_audit_trivial_cases() {
        let grid = Grid::periodic(1, &[8]).unwrap();
        let steps = 2;
        let bounds = BoxBounds::symmetric(1, -1.0, 1.0).unwrap();
        let tol = 1e-5;

        // u = 0 everywhere with |omega| <= kappa - tol: fraction 1
        let u = ControlField::zeros(grid, steps);
        let mut rng = SeedRng::new(14);
        let omega: Vec<VectorField> = (0..steps)
            .map(|_| {
                let mut v = VectorField::zeros(grid);
                *v.comp_mut(0) = rng.random_scalar(grid, 0.2 - 2.0 * tol);
                v
            })
            .collect();
        let audit = kkt_audit(&u, &omega, &bounds, &[0.2], 1.0, tol).unwrap();
        assert_eq!(audit.equivalence_fraction, 1.0);
        assert!(audit.max_defect <= 1e-14);

        // interior unconstrained cell: defect reduces to |u + omega/b3|
        let b3 = 2.0;
        let mut u2 = ControlField::zeros(grid, 1);
        let om = rng.random_scalar(grid, 0.3);
        *u2.get_mut(0).comp_mut(0) = om.map(|x| -x / b3);
        let omega2 = vec![{
            let mut v = VectorField::zeros(grid);
            *v.comp_mut(0) = om;
            v
        }];
        let audit2 = kkt_audit(&u2, &omega2, &bounds, &[0.0], b3, tol).unwrap();
        assert!(audit2.max_defect <= 1e-14);
    }

    #[test]
    fn sweep_reaches_full_sparsity_at_calibrated_kappa() {
        let grid = Grid::periodic(2, &[6, 6]).unwrap();
        let steps = 2;
        let tg = TimeGrid::new(2e-3, steps).unwrap();
        let params = small_problem_params();
        let mut rng = SeedRng::new(15);
        let phi0 = rng.smooth_scalar(grid, 0.4, 1);
        let spec = CostSpec::static_target(
            (1.0, 1.0, 0.5),
            ScalarField::constant(grid, 0.25),
            ScalarField::constant(grid, 0.25),
            vec![0.0, 0.0],
            steps,
        );
        let bounds = BoxBounds::symmetric(2, -1.0, 1.0).unwrap();
        let problem = ControlProblem {
            phi0: &phi0,
            spec: &spec,
            bounds: &bounds,
            params: &params,
            potential: quartic(),
            tg: &tg,
        };
        let sup = omega_sup_at_zero_control(&problem).unwrap();
        let grid_k = [0.0, 0.25 * sup, 0.5 * sup, sup, 2.0 * sup];
        let config = OptimizerConfig {
            step_tau: 2.0,
            stop_tol: 1e-7,
            max_outer: 300,
            ..Default::default()
        };
        let table = sparsity_sweep(&problem, &config, &grid_k).unwrap();
        assert!(table.rows[0].fraction < 1.0, "kappa = 0 should not be fully sparse");
        // full sparsity must be reached no later than the calibrated bound
        let k_full = table.full_sparsity_kappa.expect("sweep reaches full sparsity");
        assert!(k_full <= 2.0 * sup);
        assert_eq!(table.rows.last().unwrap().fraction, 1.0);
        assert!(table.omega_bound_verified);
        assert!(table.monotone, "{:?}", table.rows);
    }
}
