use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument is outside the domain of the function.
    Domain(&'static str),
    /// Adaptive quadrature ran out of panels before meeting its tolerance.
    NonConvergent { achieved: f64, panels: usize },
    /// An iteration cap was hit before the stopping rule fired.
    MaxItersExceeded { iterations: usize },
    /// Gradient-step backtracking shrank the step below its floor.
    StepCollapse { mu: f64 },
    /// The PMF violates one of its invariants.
    InvalidPmf(&'static str),
    /// A configuration value is out of range.
    InvalidConfig(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(what) => write!(f, "domain error: {what}"),
            Error::NonConvergent { achieved, panels } => write!(
                f,
                "quadrature did not converge: error estimate {achieved:e} after {panels} panels"
            ),
            Error::MaxItersExceeded { iterations } => {
                write!(f, "no convergence after {iterations} iterations")
            }
            Error::StepCollapse { mu } => write!(f, "gradient step collapsed (mu = {mu:e})"),
            Error::InvalidPmf(what) => write!(f, "invalid pmf: {what}"),
            Error::InvalidConfig(what) => write!(f, "invalid configuration: {what}"),
        }
    }
}

impl core::error::Error for Error {}
