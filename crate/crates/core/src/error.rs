use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    Invalid { field: &'static str, reason: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("eigen-solver did not converge after {iterations} iterations")]
    EigenNoConvergence { iterations: usize },

    #[error("time grid is not uniform")]
    NonUniformGrid,

    #[error("filter peak lies on the edge of the frequency grid; widen the grid")]
    PeakAtGridEdge,

    #[error("half maximum is not bracketed within the frequency grid")]
    HalfMaximumNotBracketed,

    #[error("frequency {omega} rad/s is outside the curve grid [{min}, {max}]")]
    OutsideGrid { omega: f64, min: f64, max: f64 },

    #[error("filter response is zero")]
    ZeroResponse,

    #[error("NNLS iteration cap of {iterations} exceeded (residual norm {residual})")]
    SolverIterationCap {
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
    },

    #[error("cross-validation needs at least 4 measurements, got {0}")]
    TooFewMeasurements(usize),

    #[error("fit did not converge from any start (best weighted residual {best_chi2})")]
    FitNoConvergence { best_chi2: f64 },
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field,
            reason: reason.into(),
        }
    }

    /// True for failures of a numerical procedure, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::EigenNoConvergence { .. }
                | Error::SolverIterationCap { .. }
                | Error::FitNoConvergence { .. }
                | Error::ZeroResponse
        )
    }
}
