//! Fourier diagonalization of the periodic operators.
//!
//! All periodic stencils in this crate are circulant, so they share the DFT
//! eigenbasis. The centered difference along axis `a` has the purely
//! imaginary symbol `i sin(2 pi k / n_a) / h_a`, and the composed Laplacian
//! the real symbol `-(sum_a sin^2(2 pi k_a / n_a) / h_a^2)`. The transforms
//! here are plain `O(n^2)`-per-axis DFTs: grids are desk-sized, and keeping
//! them dependency-free lets the whole solver core stay `no_std`.

use alloc::vec;
use alloc::vec::Vec;

use super::data::ScalarField;
use super::grid::{BcMode, Grid};
use crate::{Error, Result};

/// Complex samples as parallel real/imaginary arrays.
pub struct Spectrum {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

/// Precomputed twiddle tables for one periodic grid.
pub struct SpectralGrid {
    grid: Grid,
    // cos/sin(2 pi j k / n) tables per axis, indexed j * n + k
    cos: [Vec<f64>; 2],
    sin: [Vec<f64>; 2],
}

impl SpectralGrid {
    pub fn new(grid: Grid) -> Result<Self> {
        if grid.bc() != BcMode::Periodic {
            return Err(Error::InvalidArgument(
                "spectral solves require periodic boundaries".into(),
            ));
        }
        let mut cos = [Vec::new(), Vec::new()];
        let mut sin = [Vec::new(), Vec::new()];
        for a in 0..grid.dim() {
            let n = grid.n(a);
            let mut c = vec![0.0; n * n];
            let mut s = vec![0.0; n * n];
            for j in 0..n {
                for k in 0..n {
                    let ang = 2.0 * core::f64::consts::PI * ((j * k) % n) as f64 / n as f64;
                    c[j * n + k] = libm::cos(ang);
                    s[j * n + k] = libm::sin(ang);
                }
            }
            cos[a] = c;
            sin[a] = s;
        }
        Ok(SpectralGrid { grid, cos, sin })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn transform_axis(&self, re: &mut [f64], im: &mut [f64], axis: usize, inverse: bool) {
        let (n0, n1) = (self.grid.n(0), self.grid.n(1));
        let na = self.grid.n(axis);
        let stride = if axis == 0 { n1 } else { 1 };
        let lines = if axis == 0 { n1 } else { n0 };
        let cos = &self.cos[axis];
        let sin = &self.sin[axis];
        let norm = if inverse { 1.0 / na as f64 } else { 1.0 };
        let mut buf_re = vec![0.0; na];
        let mut buf_im = vec![0.0; na];
        for line in 0..lines {
            let base = if axis == 0 { line } else { line * n1 };
            for k in 0..na {
                let mut acc_re = 0.0;
                let mut acc_im = 0.0;
                for j in 0..na {
                    let c = cos[j * na + k];
                    let s = if inverse { sin[j * na + k] } else { -sin[j * na + k] };
                    let xr = re[base + j * stride];
                    let xi = im[base + j * stride];
                    acc_re += xr * c - xi * s;
                    acc_im += xr * s + xi * c;
                }
                buf_re[k] = acc_re * norm;
                buf_im[k] = acc_im * norm;
            }
            for k in 0..na {
                re[base + k * stride] = buf_re[k];
                im[base + k * stride] = buf_im[k];
            }
        }
    }

    pub fn forward(&self, f: &ScalarField) -> Spectrum {
        let mut re = f.data().to_vec();
        let mut im = vec![0.0; re.len()];
        for a in 0..self.grid.dim() {
            self.transform_axis(&mut re, &mut im, a, false);
        }
        Spectrum { re, im }
    }

    /// Inverse transform; returns the real part (imaginary content is
    /// roundoff for spectra of real data under real symbols).
    pub fn inverse(&self, mut spec: Spectrum) -> ScalarField {
        for a in 0..self.grid.dim() {
            self.transform_axis(&mut spec.re, &mut spec.im, a, true);
        }
        ScalarField::from_data(self.grid, spec.re).expect("matching length")
    }

    /// Centered-difference symbol `sin(2 pi k_a / n_a) / h_a` per cell index.
    /// The sawtooth mode (`2k = n`) is annihilated exactly by the centered
    /// stencil, so its symbol is pinned to zero rather than `sin(pi)`
    /// roundoff, which would poison divisions downstream.
    pub fn grad_symbol(&self, axis: usize) -> Vec<f64> {
        let (n0, n1) = (self.grid.n(0), self.grid.n(1));
        let na = self.grid.n(axis);
        let mut out = vec![0.0; self.grid.cells()];
        for k0 in 0..n0 {
            for k1 in 0..n1 {
                let k = if axis == 0 { k0 } else { k1 };
                out[k0 * n1 + k1] = if 2 * k == na {
                    0.0
                } else {
                    libm::sin(2.0 * core::f64::consts::PI * k as f64 / na as f64)
                        / self.grid.h(axis)
                };
            }
        }
        out
    }

    /// Nonnegative eigenvalues `lambda_k` of `-laplacian`.
    pub fn laplacian_eigenvalues(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.cells()];
        for a in 0..self.grid.dim() {
            let s = self.grad_symbol(a);
            for (o, sa) in out.iter_mut().zip(s.iter()) {
                *o += sa * sa;
            }
        }
        out
    }

    /// Solve `Op f = rhs` where `Op` has the strictly positive real symbol
    /// `symbol` in the DFT basis.
    pub fn solve_diagonal(&self, rhs: &ScalarField, symbol: &[f64]) -> ScalarField {
        let mut spec = self.forward(rhs);
        for (i, s) in symbol.iter().enumerate() {
            spec.re[i] /= s;
            spec.im[i] /= s;
        }
        self.inverse(spec)
    }

    /// Apply an operator with real symbol `symbol`.
    pub fn apply_diagonal(&self, f: &ScalarField, symbol: &[f64]) -> ScalarField {
        let mut spec = self.forward(f);
        for (i, s) in symbol.iter().enumerate() {
            spec.re[i] *= s;
            spec.im[i] *= s;
        }
        self.inverse(spec)
    }
}
