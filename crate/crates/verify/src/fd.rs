//! Central-difference oracle for the reduced gradient.

use bch_core::adjoint::adjoint_sweep_discrete;
use bch_core::forward::{solve_forward, ControlField};
use bch_core::model::cost_j;
use bch_core::optim::ControlProblem;
use bch_core::Result;

/// One direction of a gradient check.
#[derive(Debug, Clone, Copy)]
pub struct FdRow {
    pub adjoint_dd: f64,
    pub fd_dd: f64,
    pub rel_err: f64,
}

fn smooth_cost(problem: &ControlProblem<'_>, u: &ControlField) -> Result<f64> {
    let traj = solve_forward(problem.phi0, u, problem.params, problem.potential, problem.tg)?;
    Ok(cost_j(&traj.phi, u.values(), problem.spec, problem.tg)?.smooth())
}

/// Central differences `(J(u + t h) - J(u - t h)) / 2t` of the smooth
/// reduced cost, one value per direction.
pub fn fd_gradient(
    problem: &ControlProblem<'_>,
    u: &ControlField,
    directions: &[ControlField],
    t: f64,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(directions.len());
    for h in directions {
        let mut up = u.clone();
        up.axpy(t, h);
        let mut um = u.clone();
        um.axpy(-t, h);
        out.push((smooth_cost(problem, &up)? - smooth_cost(problem, &um)?) / (2.0 * t));
    }
    Ok(out)
}

/// Adjoint directional derivatives against the FD oracle.
pub fn gradient_check(
    problem: &ControlProblem<'_>,
    u: &ControlField,
    directions: &[ControlField],
    t: f64,
) -> Result<Vec<FdRow>> {
    let traj = solve_forward(problem.phi0, u, problem.params, problem.potential, problem.tg)?;
    let (_, grad) =
        adjoint_sweep_discrete(&traj, u, problem.spec, problem.params, problem.potential)?;
    let fd = fd_gradient(problem, u, directions, t)?;
    let tau = problem.tg.tau;
    let mut rows = Vec::with_capacity(directions.len());
    for (h, fd_dd) in directions.iter().zip(fd) {
        let mut dd = 0.0;
        for n in 0..u.steps() {
            dd += tau * bch_core::field::inner_vec(&grad.smooth[n], h.get(n))?;
        }
        rows.push(FdRow {
            adjoint_dd: dd,
            fd_dd,
            rel_err: (dd - fd_dd).abs() / fd_dd.abs().max(1e-300),
        });
    }
    Ok(rows)
}
