//! Mode dispatch: each run owns its output directory (lock file), writes its
//! artifacts and plot-data CSVs, and finishes with a manifest of content
//! hashes. Numeric outputs are bit-identical across reruns with the same
//! seed; only the manifest's wall time differs.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use bch_core::adjoint::{
    adjoint_sweep_discrete, frechet_remainder_test, remainder_slope, tangent_sweep,
};
use bch_core::field::{inner, inner_vec, BcMode, Grid, ScalarField};
use bch_core::forward::{solve_forward, ControlField, StateSolver};
use bch_core::model::{BoxBounds, CostSpec, LambdaProfile, ModelParams, Potential};
use bch_core::optim::{
    kkt_audit, omega_sup_at_zero_control, optimize, ControlProblem, SweepRow,
};
use bch_core::rng::SeedRng;
use bch_core::field::TimeGrid;

use crate::bchf;
use crate::config::{KappaGrid, Mode, RunConfig};
use crate::error::CliError;
use crate::manifest;
use crate::profiles::{realize_field, realize_target_trajectory};
use crate::traj;

struct LockGuard(PathBuf);

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

fn acquire_lock(dir: &Path) -> Result<LockGuard, CliError> {
    let path = dir.join(".bch.lock");
    match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
        Ok(_) => Ok(LockGuard(path)),
        Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
            Err(CliError::OutputLocked(path))
        }
        Err(e) => Err(e.into()),
    }
}

fn write_text(path: &Path, text: &str) -> Result<PathBuf, CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, text)?;
    Ok(path.to_path_buf())
}

fn seeded_control(grid: Grid, steps: usize, seed: u64, amp: f64) -> ControlField {
    let mut rng = SeedRng::new(seed);
    let mut u = ControlField::zeros(grid, steps);
    for n in 0..steps {
        *u.get_mut(n) = rng.smooth_vector(grid, amp, 2);
    }
    u
}

fn build_cost_spec(cfg: &RunConfig, base: &Path) -> Result<CostSpec, CliError> {
    Ok(CostSpec {
        b1: cfg.cost.b1,
        b2: cfg.cost.b2,
        b3: cfg.cost.b3,
        phi_q: realize_target_trajectory(&cfg.cost.phi_q, cfg.grid, cfg.time.steps, base)?,
        phi_omega: realize_field(&cfg.cost.phi_omega, cfg.grid, base)?,
        kappa: cfg.cost.kappa.clone(),
    })
}

/// Dispatch a validated configuration. `base` resolves relative file targets.
pub fn run(cfg: &RunConfig, base: &Path) -> Result<(), CliError> {
    let out = cfg.run.out.clone();
    fs::create_dir_all(&out)?;
    let _lock = acquire_lock(&out)?;
    let t0 = Instant::now();

    let mut files = Vec::new();
    files.push(write_text(
        &out.join("config.echo.ini"),
        &crate::config::serialize_config(cfg),
    )?);

    let result = match cfg.run.mode {
        Mode::Forward => mode_forward(cfg, base, &out, &mut files),
        Mode::Optimize => mode_optimize(cfg, base, &out, &mut files),
        Mode::GradCheck => mode_grad_check(cfg, base, &out, &mut files),
        Mode::TaylorTest => mode_taylor(cfg, base, &out, &mut files),
        Mode::SparsitySweep => mode_sweep(cfg, base, &out, &mut files),
        Mode::VerifyAll => mode_verify_all(cfg, &out, &mut files),
    };

    // the manifest is written even for verification failures so the partial
    // artifacts stay auditable
    manifest::write_manifest(
        &out,
        cfg.run.mode.name(),
        t0.elapsed().as_secs_f64(),
        &files,
    )?;
    result
}

fn mode_forward(
    cfg: &RunConfig,
    base: &Path,
    out: &Path,
    files: &mut Vec<PathBuf>,
) -> Result<(), CliError> {
    let phi0 = realize_field(&cfg.run.phi0, cfg.grid, base)?;
    let u = ControlField::zeros(cfg.grid, cfg.time.steps);
    let traj = solve_forward(&phi0, &u, &cfg.params, cfg.potential, &cfg.time)?;
    files.extend(traj::write_trajectory(&out.join("traj"), &traj)?);
    log::info!(
        "forward run: {} steps, final energy {}",
        cfg.time.steps,
        traj.diagnostics.last().unwrap().energy.total
    );
    Ok(())
}

fn mode_optimize(
    cfg: &RunConfig,
    base: &Path,
    out: &Path,
    files: &mut Vec<PathBuf>,
) -> Result<(), CliError> {
    let phi0 = realize_field(&cfg.run.phi0, cfg.grid, base)?;
    let spec = build_cost_spec(cfg, base)?;
    let problem = ControlProblem {
        phi0: &phi0,
        spec: &spec,
        bounds: &cfg.bounds,
        params: &cfg.params,
        potential: cfg.potential,
        tg: &cfg.time,
    };
    let outcome = optimize(&problem, &cfg.optimizer, None)?;
    if outcome.report.backtracking_exhausted {
        log::warn!("backtracking exhausted; returning the best iterate");
    }

    let d = cfg.grid.dim();
    files.push(write_text(
        &out.join("optimize.csv"),
        &crate::plotdata::optimize_csv(&outcome.report.iterates, d),
    )?);

    for n in 0..outcome.u.steps() {
        let dir = out.join("control").join(format!("step_{n:06}"));
        fs::create_dir_all(&dir)?;
        bchf::write_vector(&dir, "u", outcome.u.get(n))?;
        for c in 0..d {
            files.push(dir.join(format!("u_c{c}.bchf")));
        }
    }
    files.extend(traj::write_trajectory(&out.join("traj"), &outcome.state)?);

    let audit = kkt_audit(
        &outcome.u,
        &outcome.adjoint.omega,
        &cfg.bounds,
        &spec.kappa,
        spec.b3,
        10.0 * cfg.optimizer.stop_tol,
    )?;
    let kkt_csv = format!(
        "max_defect,equivalence_fraction,checked_cells,converged,final_stationarity\n{},{},{},{},{}\n",
        audit.max_defect,
        audit.equivalence_fraction,
        audit.checked_cells,
        outcome.report.converged,
        outcome.report.final_stationarity,
    );
    files.push(write_text(&out.join("kkt.csv"), &kkt_csv)?);
    Ok(())
}

fn mode_grad_check(
    cfg: &RunConfig,
    base: &Path,
    out: &Path,
    files: &mut Vec<PathBuf>,
) -> Result<(), CliError> {
    let phi0 = realize_field(&cfg.run.phi0, cfg.grid, base)?;
    let spec = build_cost_spec(cfg, base)?;
    let problem = ControlProblem {
        phi0: &phi0,
        spec: &spec,
        bounds: &cfg.bounds,
        params: &cfg.params,
        potential: cfg.potential,
        tg: &cfg.time,
    };
    let amp = 0.2 * (0..cfg.grid.dim())
        .map(|i| cfg.bounds.lo(i).abs().min(cfg.bounds.hi(i).abs()).min(1.0))
        .fold(f64::INFINITY, f64::min);
    let u = seeded_control(cfg.grid, cfg.time.steps, cfg.run.seed, amp);
    let dirs: Vec<ControlField> = (0..cfg.run.directions)
        .map(|k| seeded_control(cfg.grid, cfg.time.steps, cfg.run.seed ^ (0x9E3779B9 + k as u64), 1.0))
        .collect();

    let rows = bch_verify::gradient_check(&problem, &u, &dirs, cfg.run.fd_step)?;
    let mut csv = String::from("direction,adjoint_dd,fd_dd,rel_err\n");
    for (k, row) in rows.iter().enumerate() {
        csv.push_str(&format!("{k},{},{},{}\n", row.adjoint_dd, row.fd_dd, row.rel_err));
    }
    files.push(write_text(&out.join("grad_check.csv"), &csv)?);

    // gradient dump at the probe control
    let traj = solve_forward(&phi0, &u, &cfg.params, cfg.potential, &cfg.time)?;
    let (_, grad) = adjoint_sweep_discrete(&traj, &u, &spec, &cfg.params, cfg.potential)?;
    for n in 0..cfg.time.steps {
        let dir = out.join("grad").join(format!("step_{n:06}"));
        fs::create_dir_all(&dir)?;
        bchf::write_vector(&dir, "grad", &grad.smooth[n])?;
        for c in 0..cfg.grid.dim() {
            files.push(dir.join(format!("grad_c{c}.bchf")));
        }
    }

    let worst = rows.iter().map(|r| r.rel_err).fold(0.0f64, f64::max);
    if worst > 1e-5 {
        return Err(CliError::Verification(format!(
            "adjoint/fd gradient mismatch: worst relative error {worst:e} > 1e-5"
        )));
    }
    Ok(())
}

fn mode_taylor(
    cfg: &RunConfig,
    base: &Path,
    out: &Path,
    files: &mut Vec<PathBuf>,
) -> Result<(), CliError> {
    let phi0 = realize_field(&cfg.run.phi0, cfg.grid, base)?;
    let u = seeded_control(cfg.grid, cfg.time.steps, cfg.run.seed, 0.2);
    let h = seeded_control(cfg.grid, cfg.time.steps, cfg.run.seed ^ 0xA5A5_A5A5, 1.0);
    let rows = frechet_remainder_test(
        &phi0,
        &u,
        &h,
        &cfg.run.taylor_scales,
        &cfg.params,
        cfg.potential,
        &cfg.time,
    )?;
    let slope = remainder_slope(&rows);
    files.push(write_text(
        &out.join("taylor.csv"),
        &crate::plotdata::taylor_csv(&rows, slope),
    )?);
    if (slope - 2.0).abs() > 0.1 {
        return Err(CliError::Verification(format!(
            "remainder slope {slope} is not 2.0 +/- 0.1"
        )));
    }
    Ok(())
}

fn mode_sweep(
    cfg: &RunConfig,
    base: &Path,
    out: &Path,
    files: &mut Vec<PathBuf>,
) -> Result<(), CliError> {
    let phi0 = realize_field(&cfg.run.phi0, cfg.grid, base)?;
    let spec = build_cost_spec(cfg, base)?;
    let problem = ControlProblem {
        phi0: &phi0,
        spec: &spec,
        bounds: &cfg.bounds,
        params: &cfg.params,
        potential: cfg.potential,
        tg: &cfg.time,
    };
    let grid_values: Vec<f64> = match &cfg.run.kappa_grid {
        KappaGrid::Explicit(v) => v.clone(),
        KappaGrid::Auto(count) => {
            let sup = omega_sup_at_zero_control(&problem)?;
            (0..*count)
                .map(|i| 2.0 * sup * i as f64 / (*count as f64 - 1.0))
                .collect()
        }
    };

    // distinct sweep entries own their trajectories and run in parallel
    let d = cfg.grid.dim();
    let run_one = |kappa: f64| -> Result<SweepRow, CliError> {
        let mut spec_k = spec.clone();
        spec_k.kappa = vec![kappa; d];
        let sub = ControlProblem {
            spec: &spec_k,
            ..problem
        };
        let outcome = optimize(&sub, &cfg.optimizer, None)?;
        let mut zeros = 0usize;
        let mut total = 0usize;
        for n in 0..outcome.u.steps() {
            for i in 0..d {
                for &x in outcome.u.get(n).comp(i).data() {
                    total += 1;
                    if x == 0.0 {
                        zeros += 1;
                    }
                }
            }
        }
        let omega_inf = outcome
            .adjoint
            .omega
            .iter()
            .fold(0.0f64, |m, o| m.max(o.max_abs()));
        Ok(SweepRow {
            kappa,
            fraction: zeros as f64 / total as f64,
            omega_inf,
        })
    };
    let rows: Vec<SweepRow> = if cfg.run.threads > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.run.threads)
            .build()
            .map_err(|e| CliError::Verification(format!("thread pool: {e}")))?;
        pool.install(|| {
            grid_values
                .par_iter()
                .map(|&k| run_one(k))
                .collect::<Result<Vec<_>, _>>()
        })?
    } else {
        grid_values
            .iter()
            .map(|&k| run_one(k))
            .collect::<Result<Vec<_>, _>>()?
    };

    let mut prev = 0.0f64;
    for (i, r) in rows.iter().enumerate() {
        if i > 0 && r.fraction < prev {
            log::warn!(
                "sparsity fraction decreased at kappa = {}: {} -> {}",
                r.kappa,
                prev,
                r.fraction
            );
        }
        prev = r.fraction;
    }
    files.push(write_text(
        &out.join("sparsity.csv"),
        &crate::plotdata::sweep_csv(&rows),
    )?);

    if let Some(full) = rows.iter().find(|r| r.fraction == 1.0) {
        if full.omega_inf > full.kappa {
            return Err(CliError::Verification(format!(
                "fully sparse at kappa = {} but |omega|_inf = {} exceeds it",
                full.kappa, full.omega_inf
            )));
        }
    }
    Ok(())
}

/// Built-in tiny instance: periodic 6x6 grid on a length-4 box with varying
/// drag, three steps. Small enough for exhaustive probes, rich enough to
/// exercise every coupling term.
fn bundled_case() -> (Grid, TimeGrid, ModelParams, ScalarField, ControlField) {
    let grid = Grid::new(2, &[6, 6], &[4.0, 4.0], BcMode::Periodic).unwrap();
    let tg = TimeGrid::new(0.06, 3).unwrap();
    let params = ModelParams {
        nu: -0.3,
        sigma: 0.1,
        lambda_lo: 0.6,
        lambda_hi: 1.4,
        lambda_profile: LambdaProfile::SmoothBounded,
        h_source: bch_core::model::SourceProfile::Tanh { amplitude: 0.4 },
        ..Default::default()
    };
    let mut rng = SeedRng::new(0xB0CA);
    let phi0 = rng.smooth_scalar(grid, 0.5, 2);
    let mut u = ControlField::zeros(grid, 3);
    for n in 0..3 {
        *u.get_mut(n) = rng.smooth_vector(grid, 0.3, 2);
    }
    (grid, tg, params, phi0, u)
}

fn mode_verify_all(cfg: &RunConfig, out: &Path, files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let mut failures: Vec<String> = Vec::new();
    let vdir = out.join("verify");
    fs::create_dir_all(&vdir)?;
    let seed = cfg.run.seed;

    // sharp-constant inequality
    let report = bch_verify::appendix_inequality_check(1_000_000, seed);
    files.push(write_text(
        &vdir.join("appendix.csv"),
        &format!(
            "max_ratio,samples\n{},{}\n",
            report.max_ratio, report.samples_evaluated
        ),
    )?);
    if !(1.49..=1.5 + 1e-12).contains(&report.max_ratio) {
        failures.push(format!("appendix ratio {} outside [1.49, 1.5]", report.max_ratio));
    }

    // dense Jacobian / transpose probes
    let mut bf_csv = String::from("cells,steps,bc,jacobian_err,transpose_err,control_zero\n");
    for (n, steps, bc, name) in [
        (4usize, 2usize, BcMode::Periodic, "periodic"),
        (6, 3, BcMode::BoxNeumann, "box-neumann"),
    ] {
        let r = bch_verify::small_instance_bruteforce(n, steps, bc, seed)?;
        bf_csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.cells, r.steps, name, r.max_jacobian_error, r.max_transpose_error, r.control_columns_zero
        ));
        if r.max_jacobian_error > 1e-10 || r.max_transpose_error > 1e-12 || !r.control_columns_zero
        {
            failures.push(format!("bruteforce probe failed on {name}: {r:?}"));
        }
    }
    files.push(write_text(&vdir.join("bruteforce.csv"), &bf_csv)?);

    // production Brinkman vs independent spectral oracle
    {
        let grid = Grid::periodic(2, &[8, 8]).unwrap();
        let mut rng = SeedRng::new(seed ^ 0x51EC);
        let force = rng.smooth_vector(grid, 1.0, 2);
        let lam = ScalarField::constant(grid, 0.8);
        let sol = bch_core::brinkman::solve_brinkman(&bch_core::brinkman::BrinkmanProblem::new(
            lam,
            force.clone(),
            1.0,
        ))?;
        let oracle = bch_verify::spectral_brinkman_oracle(&force, 0.8, 1.0)?;
        let diff = sol.v.sub(&oracle);
        let rel = bch_core::field::norm_l2_vec(&diff)
            / bch_core::field::norm_l2_vec(&oracle).max(1e-300);
        files.push(write_text(
            &vdir.join("spectral.csv"),
            &format!("rel_err\n{rel}\n"),
        )?);
        if rel > 1e-9 {
            failures.push(format!("brinkman vs spectral oracle: rel {rel}"));
        }
    }

    // gradient, duality, and remainder checks on the bundled case
    let (grid, tg, params, phi0, u) = bundled_case();
    let spec = CostSpec::static_target(
        (1.0, 1.0, 0.5),
        ScalarField::constant(grid, 0.2),
        ScalarField::constant(grid, 0.2),
        vec![0.0, 0.0],
        tg.steps,
    );
    let bounds = BoxBounds::symmetric(2, -1.0, 1.0).unwrap();
    let problem = ControlProblem {
        phi0: &phi0,
        spec: &spec,
        bounds: &bounds,
        params: &params,
        potential: Potential::Quartic,
        tg: &tg,
    };
    {
        let dirs: Vec<ControlField> = (0..3)
            .map(|k| seeded_control(grid, tg.steps, seed ^ (77 + k as u64), 1.0))
            .collect();
        let rows = bch_verify::gradient_check(&problem, &u, &dirs, 1e-5)?;
        let mut csv = String::from("direction,adjoint_dd,fd_dd,rel_err\n");
        for (k, row) in rows.iter().enumerate() {
            csv.push_str(&format!("{k},{},{},{}\n", row.adjoint_dd, row.fd_dd, row.rel_err));
        }
        files.push(write_text(&vdir.join("grad_check.csv"), &csv)?);
        let worst = rows.iter().map(|r| r.rel_err).fold(0.0f64, f64::max);
        if worst > 1e-5 {
            failures.push(format!("gradient check worst rel err {worst}"));
        }
    }
    {
        let traj = solve_forward(&phi0, &u, &params, Potential::Quartic, &tg)?;
        let solver = StateSolver::new(grid, params, Potential::Quartic, tg.tau)?;
        let mut rng = SeedRng::new(seed ^ 0xD0A1);
        let mut csv = String::from("pair,lhs,rhs,bound\n");
        let mut worst_ok = true;
        for pair in 0..5 {
            let h = seeded_control(grid, tg.steps, seed ^ (1000 + pair as u64), 1.0);
            let lambdas: Vec<ScalarField> = (0..=tg.steps)
                .map(|_| rng.random_scalar(grid, 1.0))
                .collect();
            let tan = tangent_sweep(&solver, &traj, &h, &ScalarField::zeros(grid))?;
            let mut lhs = 0.0;
            for n in 1..=tg.steps {
                lhs += tg.tau * inner(&tan.dphi[n], &lambdas[n])?;
            }
            let mut inject: Vec<ScalarField> = lambdas
                .iter()
                .map(|l| {
                    let mut i = l.clone();
                    i.scale(tg.tau);
                    i
                })
                .collect();
            inject[0] = ScalarField::zeros(grid);
            let adj = bch_core::adjoint::adjoint_sweep(&solver, &traj, &inject)?;
            let mut rhs = 0.0;
            for n in 0..tg.steps {
                rhs += tg.tau * inner_vec(h.get(n), &adj.omega[n])?;
            }
            let mut hnorm = 0.0;
            let mut lnorm = 0.0;
            for n in 0..tg.steps {
                hnorm += tg.tau * inner_vec(h.get(n), h.get(n))?;
            }
            for l in &lambdas[1..] {
                lnorm += tg.tau * inner(l, l)?;
            }
            let bound = 1e-11 * hnorm.sqrt() * lnorm.sqrt();
            csv.push_str(&format!("{pair},{lhs},{rhs},{bound}\n"));
            if (lhs - rhs).abs() > bound {
                worst_ok = false;
            }
        }
        files.push(write_text(&vdir.join("duality.csv"), &csv)?);
        if !worst_ok {
            failures.push("tangent/adjoint duality exceeded 1e-11".into());
        }
    }
    {
        let h = seeded_control(grid, tg.steps, seed ^ 0xF00D, 1.0);
        let rows = frechet_remainder_test(
            &phi0,
            &u,
            &h,
            &[1e-1, 1e-2, 1e-3],
            &params,
            Potential::Quartic,
            &tg,
        )?;
        let slope = remainder_slope(&rows);
        let mut csv = String::from("t_scale,remainder,slope\n");
        for r in &rows {
            csv.push_str(&format!("{},{},{}\n", r.t, r.remainder, slope));
        }
        files.push(write_text(&vdir.join("taylor.csv"), &csv)?);
        if (slope - 2.0).abs() > 0.1 {
            failures.push(format!("remainder slope {slope}"));
        }
    }

    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(failures.join("; ")))
    }
}
