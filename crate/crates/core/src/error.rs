//! Error type shared by all solver layers.

use alloc::string::String;

/// Failure modes of the numerical kernels.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two fields on different grids were combined.
    IncompatibleGrids,
    /// Shapes (time levels, component counts) do not match.
    ShapeMismatch(String),
    /// An argument violated a documented precondition.
    InvalidArgument(String),
    /// An iterative solver did not reach its tolerance.
    SolverDiverged {
        what: &'static str,
        residual: f64,
        iterations: usize,
    },
    /// The drag coefficient lost positivity somewhere.
    CoercivityViolated,
    /// A field became non-finite during time stepping.
    Blowup {
        step: usize,
        advective_cfl: f64,
    },
    /// Division by a vanishing denominator in a diagnostic ratio.
    ZeroDenominator,
}

impl core::fmt::Display for Error {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Error::IncompatibleGrids => write!(f, "incompatible grids"),
            Error::ShapeMismatch(msg) => write!(f, "shape mismatch: {msg}"),
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::SolverDiverged {
                what,
                residual,
                iterations,
            } => write!(
                f,
                "{what} did not converge: residual {residual:.3e} after {iterations} iterations"
            ),
            Error::CoercivityViolated => write!(f, "coercivity violated: lambda <= 0 somewhere"),
            Error::Blowup {
                step,
                advective_cfl,
            } => write!(
                f,
                "non-finite field at step {step} (advective CFL {advective_cfl:.3e})"
            ),
            Error::ZeroDenominator => write!(f, "zero denominator"),
        }
    }
}

impl core::error::Error for Error {}
