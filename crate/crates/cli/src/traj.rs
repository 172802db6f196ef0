//! On-disk trajectory layout:
//!
//! ```text
//! traj/step_000000/phi.bchf                  (initial datum)
//! traj/step_00000k/{phi,mu,w}.bchf           (levels k >= 1)
//! traj/step_00000k/{v_c0,v_c1}.bchf          (velocity used by step k, k < steps; 2D only)
//! traj/diagnostics.csv
//! ```
//!
//! `diagnostics.csv` columns:
//! `step,t,energy,F_part,G_part,mass,brinkman_iters,ch_iters,residual`.

use std::fs;
use std::path::{Path, PathBuf};

use bch_core::field::Grid;
use bch_core::forward::StateTrajectory;

use crate::bchf;
use crate::error::CliError;

pub fn step_dir(root: &Path, level: usize) -> PathBuf {
    root.join(format!("step_{level:06}"))
}

pub fn phi_path(root: &Path, level: usize) -> PathBuf {
    step_dir(root, level).join("phi.bchf")
}

/// Number of `step_*` level directories present.
pub fn count_levels(root: &Path) -> Result<usize, CliError> {
    let mut n = 0;
    while step_dir(root, n).is_dir() {
        n += 1;
    }
    if n == 0 {
        return Err(CliError::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("no step directories under {}", root.display()),
        )));
    }
    Ok(n)
}

/// Write the full trajectory plus diagnostics. Returns the relative paths of
/// every file written (for the manifest).
pub fn write_trajectory(root: &Path, traj: &StateTrajectory) -> Result<Vec<PathBuf>, CliError> {
    let steps = traj.steps();
    let mut written = Vec::new();
    for level in 0..=steps {
        let dir = step_dir(root, level);
        fs::create_dir_all(&dir)?;
        bchf::write_field(&dir.join("phi.bchf"), &traj.phi[level])?;
        written.push(dir.join("phi.bchf"));
        if level >= 1 {
            bchf::write_field(&dir.join("mu.bchf"), &traj.mu[level - 1])?;
            bchf::write_field(&dir.join("w.bchf"), &traj.w[level - 1])?;
            written.push(dir.join("mu.bchf"));
            written.push(dir.join("w.bchf"));
        }
        if level < steps && traj.grid().dim() >= 2 {
            bchf::write_vector(&dir, "v", &traj.v[level])?;
            for c in 0..traj.grid().dim() {
                written.push(dir.join(format!("v_c{c}.bchf")));
            }
        }
    }

    let csv_path = root.join("diagnostics.csv");
    fs::write(&csv_path, crate::plotdata::diagnostics_csv(traj))?;
    written.push(csv_path);
    Ok(written)
}

/// Reload the persisted fields of a trajectory (diagnostics stay on disk).
pub struct StoredTrajectory {
    pub phi: Vec<bch_core::field::ScalarField>,
    pub mu: Vec<bch_core::field::ScalarField>,
    pub w: Vec<bch_core::field::ScalarField>,
    pub v: Vec<bch_core::field::VectorField>,
}

pub fn read_trajectory(root: &Path, grid: Grid) -> Result<StoredTrajectory, CliError> {
    let levels = count_levels(root)?;
    let steps = levels - 1;
    let mut phi = Vec::with_capacity(levels);
    let mut mu = Vec::with_capacity(steps);
    let mut w = Vec::with_capacity(steps);
    let mut v = Vec::with_capacity(steps);
    for level in 0..levels {
        let dir = step_dir(root, level);
        phi.push(bchf::read_field(&dir.join("phi.bchf"), grid)?);
        if level >= 1 {
            mu.push(bchf::read_field(&dir.join("mu.bchf"), grid)?);
            w.push(bchf::read_field(&dir.join("w.bchf"), grid)?);
        }
        if level < steps && grid.dim() >= 2 {
            v.push(bchf::read_vector(&dir, "v", grid)?);
        }
    }
    Ok(StoredTrajectory { phi, mu, w, v })
}
