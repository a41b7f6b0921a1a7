use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A chart point lies outside the declared domain of its chart.
    #[error("point outside chart domain: {0}")]
    Domain(String),

    /// A trajectory left the model's chart atlas (numerical guard; the
    /// shipped models are single-chart complete).
    #[error("trajectory exited chart atlas: {0}")]
    ChartTransition(String),

    /// Base points handed to the first-order Sasaki formula are too far apart.
    #[error("phase points too far apart for Sasaki distance: {0}")]
    Range(String),

    /// Invalid model or run configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Generator set failed the Schottky disjointness test.
    #[error("Schottky validation failed: {0}")]
    SchottkyValidation(String),

    /// A word's matrix is not hyperbolic (|trace| <= 2).
    #[error("non-hyperbolic element: |trace| = {trace_abs}")]
    NonHyperbolic { trace_abs: f64 },

    /// The requested homotopy class carries no closed geodesic.
    #[error("contractible class: {0}")]
    ContractibleClass(String),

    /// Newton refinement did not converge.
    #[error("orbit search did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    /// One or more orbit searches failed in a pipeline run.
    #[error("orbit search failed for: {0}")]
    OrbitFailures(String),

    /// Monodromy eigenvalue on (or within tolerance of) the unit circle.
    #[error("degenerate orbit: monodromy eigenvalue within {margin:.1e} of the unit circle")]
    DegenerateOrbit { margin: f64 },

    /// A query reached past the spectrum's completeness horizon.
    #[error("incomplete horizon: requested {requested}, spectrum complete below {horizon}")]
    IncompleteHorizon { requested: f64, horizon: f64 },

    /// Spectrum file could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Too few orbits/steps for a regression estimate.
    #[error("degenerate estimate: {0}")]
    DegenerateEstimate(String),

    /// Pressure binning produced too few populated bins.
    #[error("binning error: {message} (suggested bin width {suggested_epsilon})")]
    Binning {
        message: String,
        suggested_epsilon: f64,
    },

    /// Spectrum entry data missing or invalid for the requested evaluation.
    #[error("data error: {0}")]
    Data(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 1 configuration, 2 non-convergence,
    /// 3 incomplete horizon.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonConvergence { .. }
            | Error::OrbitFailures(_)
            | Error::DegenerateOrbit { .. } => 2,
            Error::IncompleteHorizon { .. } => 3,
            _ => 1,
        }
    }
}
