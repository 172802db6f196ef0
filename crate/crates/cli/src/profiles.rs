//! Realize analytic target profiles and file references as fields.

use std::path::Path;

use bch_core::field::{Grid, ScalarField};

use crate::bchf;
use crate::config::TargetSpec;
use crate::error::CliError;
use crate::traj;

fn resolve(base: &Path, p: &Path) -> std::path::PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Build a single field from a target spec.
pub fn realize_field(spec: &TargetSpec, grid: Grid, base: &Path) -> Result<ScalarField, CliError> {
    match spec {
        TargetSpec::Constant(c) => Ok(ScalarField::constant(grid, *c)),
        TargetSpec::Cosine { amp, k } => Ok(ScalarField::from_fn(grid, |x| {
            let mut v = *amp;
            for a in 0..grid.dim() {
                v *= (2.0 * std::f64::consts::PI * k * x[a] / grid.length(a)).cos();
            }
            v
        })),
        TargetSpec::TwoBump { amp, width } => Ok(ScalarField::from_fn(grid, |x| {
            let mut r1 = 0.0;
            let mut r2 = 0.0;
            for a in 0..grid.dim() {
                let c1 = 0.25 * grid.length(a);
                let c2 = 0.75 * grid.length(a);
                r1 += (x[a] - c1) * (x[a] - c1);
                r2 += (x[a] - c2) * (x[a] - c2);
            }
            let w2 = width * width;
            amp * ((-r1 / w2).exp() - (-r2 / w2).exp())
        })),
        TargetSpec::File(p) => {
            let path = resolve(base, p);
            if path.is_dir() {
                // trajectory directory: take the final phase field
                let steps = traj::count_levels(&path)?;
                bchf::read_field(&traj::phi_path(&path, steps - 1), grid)
            } else {
                bchf::read_field(&path, grid)
            }
        }
    }
}

/// Build the time-indexed distributed target (`steps + 1` fields). A
/// trajectory directory supplies per-level fields; anything else is
/// replicated in time.
pub fn realize_target_trajectory(
    spec: &TargetSpec,
    grid: Grid,
    steps: usize,
    base: &Path,
) -> Result<Vec<ScalarField>, CliError> {
    if let TargetSpec::File(p) = spec {
        let path = resolve(base, p);
        if path.is_dir() {
            let levels = traj::count_levels(&path)?;
            if levels != steps + 1 {
                return Err(CliError::Io(std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!(
                        "target trajectory {} has {levels} levels, expected {}",
                        path.display(),
                        steps + 1
                    ),
                )));
            }
            return (0..=steps)
                .map(|n| bchf::read_field(&traj::phi_path(&path, n), grid))
                .collect();
        }
    }
    let field = realize_field(spec, grid, base)?;
    Ok((0..=steps).map(|_| field.clone()).collect())
}
