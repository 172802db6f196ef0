//! Seeded, reproducible random data for tests, probes, and oracles.

use alloc::vec::Vec;

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};

use crate::field::{BcMode, Grid, ScalarField, VectorField};

/// Deterministic RNG; the same seed yields the same stream on every platform.
pub struct SeedRng(ChaCha12Rng);

impl SeedRng {
    pub fn new(seed: u64) -> Self {
        SeedRng(ChaCha12Rng::seed_from_u64(seed))
    }

    /// Uniform in `[0, 1)` with 53 significant bits.
    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal via Box-Muller.
    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform().max(1e-300);
        let u2 = self.uniform();
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
    }

    /// Cellwise iid uniform field in `[-amp, amp]`.
    pub fn random_scalar(&mut self, grid: Grid, amp: f64) -> ScalarField {
        let data = (0..grid.cells())
            .map(|_| self.uniform_in(-amp, amp))
            .collect();
        ScalarField::from_data(grid, data).expect("matching length")
    }

    pub fn random_vector(&mut self, grid: Grid, amp: f64) -> VectorField {
        let comps = (0..grid.dim()).map(|_| self.random_scalar(grid, amp)).collect();
        VectorField::from_components(comps).expect("same grid")
    }

    /// Smooth random field built from a few low-frequency modes compatible
    /// with the grid's boundary mode.
    pub fn smooth_scalar(&mut self, grid: Grid, amp: f64, max_mode: usize) -> ScalarField {
        let dim = grid.dim();
        let mut modes: Vec<([usize; 2], f64, f64)> = Vec::new();
        let kmax = max_mode.max(1);
        for k0 in 0..=kmax {
            for k1 in 0..=(if dim == 2 { kmax } else { 0 }) {
                let c = self.uniform_in(-1.0, 1.0);
                let phase = self.uniform_in(0.0, 2.0 * core::f64::consts::PI);
                modes.push(([k0, k1], c, phase));
            }
        }
        let periodic = grid.bc() == BcMode::Periodic;
        let mut f = ScalarField::from_fn(grid, |x| {
            let mut v = 0.0;
            for (k, c, phase) in &modes {
                let mut m = *c;
                for a in 0..dim {
                    let ka = k[a] as f64;
                    let t = if periodic {
                        libm::cos(2.0 * core::f64::consts::PI * ka * x[a] / grid.length(a) + phase)
                    } else {
                        // Neumann-compatible cosine modes
                        libm::cos(core::f64::consts::PI * ka * x[a] / grid.length(a))
                    };
                    m *= t;
                }
                v += m;
            }
            v
        });
        let scale = f.max_abs();
        if scale > 0.0 {
            f.scale(amp / scale);
        }
        f
    }

    pub fn smooth_vector(&mut self, grid: Grid, amp: f64, max_mode: usize) -> VectorField {
        let comps = (0..grid.dim())
            .map(|_| self.smooth_scalar(grid, amp, max_mode))
            .collect();
        VectorField::from_components(comps).expect("same grid")
    }
}
