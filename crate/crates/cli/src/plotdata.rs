//! Plot-data emission: line-plot CSVs for trajectories and reports. No
//! rendering; every file is a plain CSV a plotting tool can ingest.

use bch_core::adjoint::RemainderRow;
use bch_core::forward::StateTrajectory;
use bch_core::optim::{IterRecord, SweepRow};

/// `step,t,energy,F_part,G_part,mass,brinkman_iters,ch_iters,residual`.
pub fn diagnostics_csv(traj: &StateTrajectory) -> String {
    let mut csv =
        String::from("step,t,energy,F_part,G_part,mass,brinkman_iters,ch_iters,residual\n");
    for (level, d) in traj.diagnostics.iter().enumerate() {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            level,
            traj.time_grid.time(level),
            d.energy.total,
            d.energy.f_part,
            d.energy.g_part,
            d.mass,
            d.brinkman_iters,
            d.ch_iters,
            d.residual
        ));
    }
    csv
}

/// Cost and stationarity per outer iteration, with per-component sparsity.
pub fn optimize_csv(iterates: &[IterRecord], dim: usize) -> String {
    let mut csv = String::from(
        "iter,cost_total,tracking_Q,tracking_T,tikhonov,l1,stationarity,step,backtracks,sparsity_frac_c0,sparsity_frac_c1\n",
    );
    for r in iterates {
        let c0 = r.sparsity.first().map(|v| v.to_string()).unwrap_or_default();
        let c1 = if dim > 1 {
            r.sparsity.get(1).map(|v| v.to_string()).unwrap_or_default()
        } else {
            String::new()
        };
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.iter,
            r.cost.total,
            r.cost.tracking_q,
            r.cost.tracking_t,
            r.cost.tikhonov,
            r.cost.l1,
            r.stationarity,
            r.step,
            r.backtracks,
            c0,
            c1,
        ));
    }
    csv
}

/// `t_scale,remainder,slope` with the fitted slope repeated per row.
pub fn taylor_csv(rows: &[RemainderRow], slope: f64) -> String {
    let mut csv = String::from("t_scale,remainder,slope\n");
    for r in rows {
        csv.push_str(&format!("{},{},{}\n", r.t, r.remainder, slope));
    }
    csv
}

/// `kappa,sparsity_fraction,omega_inf,monotone` with a per-row monotone flag.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut csv = String::from("kappa,sparsity_fraction,omega_inf,monotone\n");
    let mut prev = 0.0f64;
    for (i, r) in rows.iter().enumerate() {
        let monotone = i == 0 || r.fraction >= prev;
        csv.push_str(&format!(
            "{},{},{},{}\n",
            r.kappa,
            r.fraction,
            r.omega_inf,
            if monotone { 1 } else { 0 }
        ));
        prev = r.fraction;
    }
    csv
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taylor_csv_carries_the_slope_column() {
        let rows = vec![
            RemainderRow {
                t: 0.1,
                remainder: 1e-2,
                ratio: 1.0,
            },
            RemainderRow {
                t: 0.01,
                remainder: 1e-4,
                ratio: 1.0,
            },
        ];
        let csv = taylor_csv(&rows, 2.0);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t_scale,remainder,slope"));
        assert!(lines.all(|l| l.ends_with(",2")));
    }

    #[test]
    fn sweep_csv_flags_monotonicity_violations() {
        let rows = vec![
            SweepRow {
                kappa: 0.0,
                fraction: 0.5,
                omega_inf: 1.0,
            },
            SweepRow {
                kappa: 1.0,
                fraction: 0.4,
                omega_inf: 1.0,
            },
            SweepRow {
                kappa: 2.0,
                fraction: 1.0,
                omega_inf: 0.5,
            },
        ];
        let csv = sweep_csv(&rows);
        let flags: Vec<&str> = csv
            .lines()
            .skip(1)
            .map(|l| l.rsplit(',').next().unwrap())
            .collect();
        assert_eq!(flags, vec!["1", "0", "1"]);
    }
}
