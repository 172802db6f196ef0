//! Structural data of the control problem: coefficients, the double-well
//! potential, energies, the tracking cost, and the box+L1 proximal map.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::field::{
    gradient, inner, inner_vec, integral, laplacian, Grid, ScalarField, TimeGrid, VectorField,
};
use crate::{Error, Result};

/// Shape of the drag coefficient `lambda(s)`.
///
/// `Constant` pins `lambda` to `lambda_lo`. `SmoothBounded` is
/// `lambda_lo + (lambda_hi - lambda_lo) / (1 + s^2)`, a smooth profile with
/// bounded derivative that keeps the drag inside `[lambda_lo, lambda_hi]`
/// while making the linearization term `lambda'(phi) phi v` nontrivial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaProfile {
    Constant,
    SmoothBounded,
}

/// Shape of the bounded Lipschitz part `h(s)` of the source `S(s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SourceProfile {
    Zero,
    Tanh { amplitude: f64 },
}

/// Coefficients of the state system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Interface thickness; the dimensionless normalization is 1.
    pub eps: f64,
    /// Mobility of the phase equation.
    pub mobility: f64,
    /// Viscosity in front of the symmetric stress.
    pub eta0: f64,
    /// Curvature coefficient; may be negative.
    pub nu: f64,
    /// Linear source coefficient in `S(s) = -sigma s + h(s)`.
    pub sigma: f64,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub lambda_profile: LambdaProfile,
    pub h_source: SourceProfile,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            eps: 1.0,
            mobility: 1.0,
            eta0: 1.0,
            nu: 0.0,
            sigma: 0.0,
            lambda_lo: 1.0,
            lambda_hi: 1.0,
            lambda_profile: LambdaProfile::Constant,
            h_source: SourceProfile::Zero,
        }
    }
}

impl ModelParams {
    /// Positivity of the coefficients plus sampled bounds on `lambda` and the
    /// Lipschitz/boundedness of `h` over `s` in `[-10, 10]`.
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(Error::InvalidArgument("eps must be positive".into()));
        }
        if !(self.mobility > 0.0) {
            return Err(Error::InvalidArgument("mobility must be positive".into()));
        }
        if !(self.eta0 > 0.0) {
            return Err(Error::InvalidArgument("eta0 must be positive".into()));
        }
        if !(self.lambda_lo > 0.0 && self.lambda_lo <= self.lambda_hi) {
            return Err(Error::InvalidArgument(
                "need 0 < lambda_lo <= lambda_hi".into(),
            ));
        }
        let samples = 2001;
        let mut prev_h: Option<(f64, f64)> = None;
        for i in 0..samples {
            let s = -10.0 + 20.0 * i as f64 / (samples - 1) as f64;
            let lam = self.lambda(s);
            if lam < self.lambda_lo - 1e-12 || lam > self.lambda_hi + 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "lambda({s}) = {lam} escapes [lambda_lo, lambda_hi]"
                )));
            }
            let h = self.h(s);
            if h.abs() > self.h_bound() + 1e-12 {
                return Err(Error::InvalidArgument("h(s) exceeds its bound".into()));
            }
            if let Some((sp, hp)) = prev_h {
                let lip = self.h_lipschitz();
                if (h - hp).abs() > lip * (s - sp).abs() + 1e-12 {
                    return Err(Error::InvalidArgument(
                        "h(s) violates its Lipschitz bound".into(),
                    ));
                }
            }
            prev_h = Some((s, h));
        }
        Ok(())
    }

    pub fn lambda(&self, s: f64) -> f64 {
        match self.lambda_profile {
            LambdaProfile::Constant => self.lambda_lo,
            LambdaProfile::SmoothBounded => {
                self.lambda_lo + (self.lambda_hi - self.lambda_lo) / (1.0 + s * s)
            }
        }
    }

    pub fn lambda_prime(&self, s: f64) -> f64 {
        match self.lambda_profile {
            LambdaProfile::Constant => 0.0,
            LambdaProfile::SmoothBounded => {
                let d = 1.0 + s * s;
                -2.0 * s * (self.lambda_hi - self.lambda_lo) / (d * d)
            }
        }
    }

    pub fn h(&self, s: f64) -> f64 {
        match self.h_source {
            SourceProfile::Zero => 0.0,
            SourceProfile::Tanh { amplitude } => amplitude * libm::tanh(s),
        }
    }

    pub fn h_prime(&self, s: f64) -> f64 {
        match self.h_source {
            SourceProfile::Zero => 0.0,
            SourceProfile::Tanh { amplitude } => {
                let t = libm::tanh(s);
                amplitude * (1.0 - t * t)
            }
        }
    }

    fn h_bound(&self) -> f64 {
        match self.h_source {
            SourceProfile::Zero => 0.0,
            SourceProfile::Tanh { amplitude } => amplitude.abs(),
        }
    }

    fn h_lipschitz(&self) -> f64 {
        match self.h_source {
            SourceProfile::Zero => 0.0,
            SourceProfile::Tanh { amplitude } => amplitude.abs(),
        }
    }

    /// `S(s) = -sigma s + h(s)`.
    pub fn source_s(&self, s: f64) -> f64 {
        -self.sigma * s + self.h(s)
    }

    pub fn source_s_prime(&self, s: f64) -> f64 {
        -self.sigma + self.h_prime(s)
    }
}

/// Double-well potential. Only the classical quartic is provided; the
/// smoothness assumptions rule out singular potentials.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Potential {
    Quartic,
}

impl Potential {
    /// `F^(order)(s)` for `order` in `0..=4`:
    /// `F, f = F', f', f'', f'''` of `F(s) = (s^2 - 1)^2 / 4`.
    pub fn eval(&self, s: f64, order: usize) -> Result<f64> {
        match order {
            0 => Ok(0.25 * (s * s - 1.0) * (s * s - 1.0)),
            1 => Ok(s * s * s - s),
            2 => Ok(3.0 * s * s - 1.0),
            3 => Ok(6.0 * s),
            4 => Ok(6.0),
            _ => Err(Error::InvalidArgument(
                "potential derivative order must be in 0..=4".into(),
            )),
        }
    }

    /// `f = F'`.
    pub fn f(&self, s: f64) -> f64 {
        s * s * s - s
    }

    /// `f' = F''`.
    pub fn f_prime(&self, s: f64) -> f64 {
        3.0 * s * s - 1.0
    }

    /// `f'' = F'''`.
    pub fn f_second(&self, s: f64) -> f64 {
        6.0 * s
    }

    pub fn big_f(&self, s: f64) -> f64 {
        0.25 * (s * s - 1.0) * (s * s - 1.0)
    }
}

/// Box constraints on the control, per component. Constant by default, with
/// optional per-cell arrays when varying bounds are supplied explicitly.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxBounds {
    lo: Vec<f64>,
    hi: Vec<f64>,
    per_cell: Option<Vec<(ScalarField, ScalarField)>>,
}

impl BoxBounds {
    pub fn constant(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::ShapeMismatch("bounds component mismatch".into()));
        }
        for (l, h) in lo.iter().zip(hi.iter()) {
            if l > h {
                return Err(Error::InvalidArgument("need lo <= hi".into()));
            }
        }
        Ok(BoxBounds {
            lo,
            hi,
            per_cell: None,
        })
    }

    /// Same constant bounds `[lo, hi]` for every component.
    pub fn symmetric(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        BoxBounds::constant(alloc::vec![lo; dim], alloc::vec![hi; dim])
    }

    pub fn per_cell(fields: Vec<(ScalarField, ScalarField)>) -> Result<Self> {
        if fields.is_empty() {
            return Err(Error::ShapeMismatch("empty bounds".into()));
        }
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        for (l, h) in &fields {
            if l.grid() != h.grid() {
                return Err(Error::IncompatibleGrids);
            }
            for (a, b) in l.data().iter().zip(h.data().iter()) {
                if a > b {
                    return Err(Error::InvalidArgument("need lo <= hi everywhere".into()));
                }
            }
            lo.push(l.data().iter().fold(f64::INFINITY, |m, &x| m.min(x)));
            hi.push(h.data().iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x)));
        }
        Ok(BoxBounds {
            lo,
            hi,
            per_cell: Some(fields),
        })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    #[inline]
    pub fn at(&self, comp: usize, cell: usize) -> (f64, f64) {
        match &self.per_cell {
            Some(fields) => (fields[comp].0.data()[cell], fields[comp].1.data()[cell]),
            None => (self.lo[comp], self.hi[comp]),
        }
    }

    pub fn lo(&self, comp: usize) -> f64 {
        self.lo[comp]
    }

    pub fn hi(&self, comp: usize) -> f64 {
        self.hi[comp]
    }

    /// The sparsity theory needs constant bounds that straddle zero.
    pub fn straddles_zero(&self) -> bool {
        self.per_cell.is_none()
            && self
                .lo
                .iter()
                .zip(self.hi.iter())
                .all(|(l, h)| *l < 0.0 && *h > 0.0)
    }
}

/// Weights and targets of the tracking cost.
#[derive(Debug, Clone)]
pub struct CostSpec {
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    /// Distributed target, one field per time level (`steps + 1` of them).
    pub phi_q: Vec<ScalarField>,
    /// Terminal target.
    pub phi_omega: ScalarField,
    /// Sparsity weights, one per control component.
    pub kappa: Vec<f64>,
}

impl CostSpec {
    pub fn validate(&self, grid: &Grid, steps: usize) -> Result<()> {
        if !(self.b3 > 0.0) {
            return Err(Error::InvalidArgument(
                "b3 must be strictly positive (b3 in (0, +inf))".into(),
            ));
        }
        if self.b1 < 0.0 || self.b2 < 0.0 {
            return Err(Error::InvalidArgument("b1, b2 must be nonnegative".into()));
        }
        if self.kappa.iter().any(|k| *k < 0.0) {
            return Err(Error::InvalidArgument("kappa must be nonnegative".into()));
        }
        if self.kappa.len() != grid.dim() {
            return Err(Error::ShapeMismatch("kappa needs one entry per component".into()));
        }
        if self.phi_q.len() != steps + 1 {
            return Err(Error::ShapeMismatch(format!(
                "phi_q needs steps+1 = {} levels, got {}",
                steps + 1,
                self.phi_q.len()
            )));
        }
        if self.phi_q.iter().any(|f| f.grid() != grid) || self.phi_omega.grid() != grid {
            return Err(Error::IncompatibleGrids);
        }
        Ok(())
    }

    /// Replicate a static distributed target over all time levels.
    pub fn static_target(
        b: (f64, f64, f64),
        phi_q: ScalarField,
        phi_omega: ScalarField,
        kappa: Vec<f64>,
        steps: usize,
    ) -> Self {
        CostSpec {
            b1: b.0,
            b2: b.1,
            b3: b.2,
            phi_q: (0..=steps).map(|_| phi_q.clone()).collect(),
            phi_omega,
            kappa,
        }
    }
}

/// Value of the energy functional split into its two parts:
/// `total = f_part + nu * g_part`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    pub total: f64,
    pub f_part: f64,
    pub g_part: f64,
}

/// Discrete total free energy.
///
/// `f_part` is the squared-residual (Willmore) part
/// `1/2 int (-eps lap phi + f(phi)/eps)^2`, evaluated through the same
/// operator composition the solvers use; `g_part` is the Ginzburg-Landau
/// energy `int (eps/2 |grad phi|^2 + F(phi)/eps)`.
pub fn energy_total(
    phi: &ScalarField,
    params: &ModelParams,
    potential: &Potential,
) -> EnergyBreakdown {
    let eps = params.eps;
    let mut w = laplacian(phi);
    w.scale(-eps);
    let fphi = phi.map(|s| potential.f(s));
    w.axpy(1.0 / eps, &fphi);
    let f_part = 0.5 * inner(&w, &w).expect("same grid");

    let g = gradient(phi);
    let big_f = phi.map(|s| potential.big_f(s));
    let g_part =
        0.5 * eps * inner_vec(&g, &g).expect("same grid") + integral(&big_f) / eps;

    EnergyBreakdown {
        total: f_part + params.nu * g_part,
        f_part,
        g_part,
    }
}

/// Cost value split by term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostBreakdown {
    pub tracking_q: f64,
    pub tracking_t: f64,
    pub tikhonov: f64,
    pub l1: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub fn smooth(&self) -> f64 {
        self.tracking_q + self.tracking_t + self.tikhonov
    }
}

/// Discrete cost functional.
///
/// The distributed tracking term uses the trapezoid rule in time (the level-0
/// contribution is control-independent); the control terms are exact per-step
/// rectangle sums, matching the piecewise-constant-in-time control. The
/// discrete adjoint transposes exactly these quadrature weights.
pub fn cost_j(
    phi: &[ScalarField],
    u: &[VectorField],
    spec: &CostSpec,
    tg: &TimeGrid,
) -> Result<CostBreakdown> {
    let steps = tg.steps;
    if phi.len() != steps + 1 {
        return Err(Error::ShapeMismatch("phi trajectory length".into()));
    }
    if u.len() != steps {
        return Err(Error::ShapeMismatch("control trajectory length".into()));
    }
    if spec.phi_q.len() != steps + 1 {
        return Err(Error::ShapeMismatch("phi_q trajectory length".into()));
    }
    let tau = tg.tau;

    let mut tracking_q = 0.0;
    if spec.b1 != 0.0 {
        for n in 0..=steps {
            let wn = if n == 0 || n == steps { 0.5 } else { 1.0 };
            let d = phi[n].sub(&spec.phi_q[n]);
            tracking_q += wn * tau * inner(&d, &d)?;
        }
        tracking_q *= 0.5 * spec.b1;
    }

    let mut tracking_t = 0.0;
    if spec.b2 != 0.0 {
        let d = phi[steps].sub(&spec.phi_omega);
        tracking_t = 0.5 * spec.b2 * inner(&d, &d)?;
    }

    let mut tikhonov = 0.0;
    for un in u {
        tikhonov += tau * inner_vec(un, un)?;
    }
    tikhonov *= 0.5 * spec.b3;

    let mut l1 = 0.0;
    for un in u {
        for (i, k) in spec.kappa.iter().enumerate() {
            if *k != 0.0 {
                let absint = integral(&un.comp(i).map(|x| x.abs()));
                l1 += k * tau * absint;
            }
        }
    }

    Ok(CostBreakdown {
        tracking_q,
        tracking_t,
        tikhonov,
        l1,
        total: tracking_q + tracking_t + tikhonov + l1,
    })
}

/// Proximal map of `step_kappa |.| + indicator([lo, hi])`: soft threshold,
/// then clip. With `step_kappa = 0` this is the plain box projection.
/// The threshold produces exact zeros inside the dead zone.
pub fn prox_box_l1(v: f64, step_kappa: f64, lo: f64, hi: f64) -> Result<f64> {
    if lo > hi {
        return Err(Error::InvalidArgument("need lo <= hi".into()));
    }
    if step_kappa < 0.0 {
        return Err(Error::InvalidArgument("step_kappa must be >= 0".into()));
    }
    let soft = if v > step_kappa {
        v - step_kappa
    } else if v < -step_kappa {
        v + step_kappa
    } else {
        0.0
    };
    Ok(soft.max(lo).min(hi))
}

/// Subdifferential of `|.|` at `u`, as the interval `[lo, hi]`.
pub fn subgradient_j(u: f64) -> (f64, f64) {
    if u > 0.0 {
        (1.0, 1.0)
    } else if u < 0.0 {
        (-1.0, -1.0)
    } else {
        (-1.0, 1.0)
    }
}

/// Helper shared by config validation: human-readable parameter errors keep
/// the offending key visible.
pub fn describe_invalid(key: &str, err: &Error) -> String {
    format!("{key}: {err}")
}
