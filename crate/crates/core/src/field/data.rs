use alloc::vec;
use alloc::vec::Vec;

use super::grid::Grid;
use crate::{Error, Result};

/// Real-valued samples on the cells of a [`Grid`], row-major by axis order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        ScalarField {
            grid,
            data: vec![0.0; grid.cells()],
        }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        ScalarField {
            grid,
            data: vec![c; grid.cells()],
        }
    }

    /// Sample `f` at every cell center.
    pub fn from_fn(grid: Grid, mut f: impl FnMut([f64; 2]) -> f64) -> Self {
        let data = (0..grid.cells()).map(|i| f(grid.center(i))).collect();
        ScalarField { grid, data }
    }

    pub fn from_data(grid: Grid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.cells() {
            return Err(Error::ShapeMismatch(
                "data length does not match cell count".into(),
            ));
        }
        Ok(ScalarField { grid, data })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        let mut m = 0.0f64;
        for &x in &self.data {
            m = m.max(x.abs());
        }
        m
    }

    /// `self += s * other`, elementwise.
    pub fn axpy(&mut self, s: f64, other: &ScalarField) {
        debug_assert_eq!(self.grid, other.grid);
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += s * b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for a in self.data.iter_mut() {
            *a *= s;
        }
    }

    /// Elementwise product, out of place.
    pub fn mul(&self, other: &ScalarField) -> ScalarField {
        debug_assert_eq!(self.grid, other.grid);
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a * b)
            .collect();
        ScalarField {
            grid: self.grid,
            data,
        }
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> ScalarField {
        ScalarField {
            grid: self.grid,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        debug_assert_eq!(self.grid, other.grid);
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a - b)
            .collect();
        ScalarField {
            grid: self.grid,
            data,
        }
    }

    pub fn add(&self, other: &ScalarField) -> ScalarField {
        debug_assert_eq!(self.grid, other.grid);
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a + b)
            .collect();
        ScalarField {
            grid: self.grid,
            data,
        }
    }
}

/// `dim`-component vector field; every component lives on the same grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: Grid,
    comps: Vec<ScalarField>,
}

impl VectorField {
    pub fn zeros(grid: Grid) -> Self {
        let comps = (0..grid.dim()).map(|_| ScalarField::zeros(grid)).collect();
        VectorField { grid, comps }
    }

    pub fn from_components(comps: Vec<ScalarField>) -> Result<Self> {
        if comps.is_empty() {
            return Err(Error::ShapeMismatch("empty component list".into()));
        }
        let grid = *comps[0].grid();
        if comps.len() != grid.dim() {
            return Err(Error::ShapeMismatch(
                "component count does not match grid dimension".into(),
            ));
        }
        if comps.iter().any(|c| *c.grid() != grid) {
            return Err(Error::IncompatibleGrids);
        }
        Ok(VectorField { grid, comps })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn comp(&self, i: usize) -> &ScalarField {
        &self.comps[i]
    }

    pub fn comp_mut(&mut self, i: usize) -> &mut ScalarField {
        &mut self.comps[i]
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.comps
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(|c| c.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        let mut m = 0.0f64;
        for c in &self.comps {
            m = m.max(c.max_abs());
        }
        m
    }

    pub fn axpy(&mut self, s: f64, other: &VectorField) {
        debug_assert_eq!(self.grid, other.grid);
        for (a, b) in self.comps.iter_mut().zip(other.comps.iter()) {
            a.axpy(s, b);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for c in self.comps.iter_mut() {
            c.scale(s);
        }
    }

    pub fn sub(&self, other: &VectorField) -> VectorField {
        VectorField {
            grid: self.grid,
            comps: self
                .comps
                .iter()
                .zip(other.comps.iter())
                .map(|(a, b)| a.sub(b))
                .collect(),
        }
    }

    pub fn add(&self, other: &VectorField) -> VectorField {
        VectorField {
            grid: self.grid,
            comps: self
                .comps
                .iter()
                .zip(other.comps.iter())
                .map(|(a, b)| a.add(b))
                .collect(),
        }
    }

    /// Pointwise scaling by a scalar field, out of place.
    pub fn mul_scalar(&self, s: &ScalarField) -> VectorField {
        VectorField {
            grid: self.grid,
            comps: self.comps.iter().map(|c| c.mul(s)).collect(),
        }
    }

    /// Pointwise dot product with another vector field.
    pub fn dot(&self, other: &VectorField) -> ScalarField {
        debug_assert_eq!(self.grid, other.grid);
        let mut out = self.comps[0].mul(&other.comps[0]);
        for i in 1..self.comps.len() {
            let prod = self.comps[i].mul(&other.comps[i]);
            out.axpy(1.0, &prod);
        }
        out
    }
}

/// Per-cell symmetric `d x d` matrices, stored as the upper triangle
/// (`[xx]` in 1D, `[xx, xy, yy]` in 2D).
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensorField {
    grid: Grid,
    entries: Vec<ScalarField>,
}

impl SymTensorField {
    pub fn new(grid: Grid, entries: Vec<ScalarField>) -> Self {
        debug_assert_eq!(entries.len(), grid.dim() * (grid.dim() + 1) / 2);
        SymTensorField { grid, entries }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        match (i, j) {
            (0, 0) => 0,
            (0, 1) => 1,
            (1, 1) => 2,
            _ => unreachable!(),
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> &ScalarField {
        &self.entries[self.slot(i, j)]
    }

    /// Frobenius pairing `A : B` per cell.
    pub fn frobenius_dot(&self, other: &SymTensorField) -> ScalarField {
        debug_assert_eq!(self.grid, other.grid);
        let d = self.grid.dim();
        let mut out = ScalarField::zeros(self.grid);
        for i in 0..d {
            for j in 0..d {
                let prod = self.entry(i, j).mul(other.entry(i, j));
                out.axpy(1.0, &prod);
            }
        }
        out
    }
}
