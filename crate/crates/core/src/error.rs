use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Best point an LP run reached before it gave up.
#[derive(Debug, Clone, PartialEq)]
pub struct BestPoint {
    pub coeffs: Vec<f64>,
    pub delta: f64,
}

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid specification or grid configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// The order estimator was queried outside the region its parameters were fitted on,
    /// or the formulas produced a non-physical value.
    #[error("estimator domain error: {0}")]
    EstimatorDomain(String),

    #[error("LP solver failure: {reason}")]
    Solver {
        reason: String,
        best: Option<BestPoint>,
    },

    #[error(
        "no order up to {n_max} meets the specification \
         (best ripples: passband {best_ripple_p:.3e}, stopband {best_ripple_s:.3e} at N = {best_order})"
    )]
    SearchExhausted {
        n_max: usize,
        best_order: usize,
        best_ripple_p: f64,
        best_ripple_s: f64,
    },

    #[error("curve fit did not converge (best epsilon {epsilon:.4})")]
    FitNotConverged {
        params: Box<crate::order_estimation::RegionParams>,
        epsilon: f64,
    },
}
