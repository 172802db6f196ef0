use crate::{Error, Result};

/// Boundary closure applied by every stencil on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcMode {
    Periodic,
    BoxNeumann,
}

/// Rectangular cell-centered mesh in one or two dimensions.
///
/// Cells along axis `a` are centered at `(j + 1/2) * h[a]` for
/// `j = 0..n[a]`. Data is stored row-major by axis order (axis 0 major).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    n: [usize; 2],
    length: [f64; 2],
    h: [f64; 2],
    cell_volume: f64,
    bc: BcMode,
}

impl Grid {
    pub fn new(dim: usize, n: &[usize], length: &[f64], bc: BcMode) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidArgument("grid dim must be 1 or 2".into()));
        }
        if n.len() != dim || length.len() != dim {
            return Err(Error::InvalidArgument(
                "n and length must have one entry per axis".into(),
            ));
        }
        let mut nn = [1usize; 2];
        let mut ll = [1.0f64; 2];
        let mut hh = [1.0f64; 2];
        let mut vol = 1.0;
        for a in 0..dim {
            if n[a] < 4 {
                return Err(Error::InvalidArgument("each axis needs at least 4 cells".into()));
            }
            if !(length[a] > 0.0) {
                return Err(Error::InvalidArgument("domain extents must be positive".into()));
            }
            nn[a] = n[a];
            ll[a] = length[a];
            hh[a] = length[a] / n[a] as f64;
            vol *= hh[a];
        }
        Ok(Grid {
            dim,
            n: nn,
            length: ll,
            h: hh,
            cell_volume: vol,
            bc,
        })
    }

    /// Unit-length periodic grid, the common verification configuration.
    pub fn periodic(dim: usize, n: &[usize]) -> Result<Self> {
        let length = [1.0; 2];
        Grid::new(dim, n, &length[..dim], BcMode::Periodic)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bc(&self) -> BcMode {
        self.bc
    }

    /// Cell count along `axis` (1 for the unused axis in 1D).
    pub fn n(&self, axis: usize) -> usize {
        self.n[axis]
    }

    pub fn length(&self, axis: usize) -> f64 {
        self.length[axis]
    }

    pub fn h(&self, axis: usize) -> f64 {
        self.h[axis]
    }

    pub fn min_h(&self) -> f64 {
        let mut m = self.h[0];
        for a in 1..self.dim {
            m = m.min(self.h[a]);
        }
        m
    }

    pub fn cells(&self) -> usize {
        self.n[0] * self.n[1]
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_volume
    }

    /// Row-major linear index of the cell `(i0, i1)`.
    #[inline]
    pub fn index(&self, i0: usize, i1: usize) -> usize {
        i0 * self.n[1] + i1
    }

    /// Physical center of cell `idx` (second coordinate is 0.5 in 1D).
    pub fn center(&self, idx: usize) -> [f64; 2] {
        let i0 = idx / self.n[1];
        let i1 = idx % self.n[1];
        [
            (i0 as f64 + 0.5) * self.h[0],
            (i1 as f64 + 0.5) * self.h[1],
        ]
    }
}

/// Uniform partition of `[0, t_final]` into `steps` intervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t_final: f64,
    pub steps: usize,
    pub tau: f64,
}

impl TimeGrid {
    pub fn new(t_final: f64, steps: usize) -> Result<Self> {
        if !(t_final > 0.0) {
            return Err(Error::InvalidArgument("t_final must be positive".into()));
        }
        if steps == 0 {
            return Err(Error::InvalidArgument("steps must be at least 1".into()));
        }
        let tau = t_final / steps as f64;
        Ok(TimeGrid {
            t_final,
            steps,
            tau,
        })
    }

    pub fn time(&self, level: usize) -> f64 {
        level as f64 * self.tau
    }
}
