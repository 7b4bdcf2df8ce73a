use thiserror::Error;

/// Everything that can stop a computation.
#[derive(Debug, Error)]
pub enum WireError {
    #[error("point {coords:?} lies outside the chart domain of {manifold}")]
    Domain { manifold: String, coords: Vec<f64> },

    #[error("curve left the chart domain at grid point {index} ({coords:?})")]
    ChartExit { index: usize, coords: Vec<f64> },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("near-geodesic state: bentness {bentness:.3e} is below the threshold {threshold:.3e}")]
    NearGeodesic { bentness: f64, threshold: f64 },

    #[error("linear solver breakdown: {message} (condition estimate {condition:.3e})")]
    Numerical { message: String, condition: f64 },

    #[error("fixed-point iteration is not contracting (ratios {ratios:?}); use a smaller window")]
    WindowTooLarge { ratios: Vec<f64> },

    #[error("time step {dt:.3e} violates the unit-speed CFL bound dt <= dx = {dx:.3e}")]
    Cfl { dt: f64, dx: f64 },

    #[error("constraint drift {drift:.3e} exceeds the tolerance {tolerance:.3e}")]
    ConstraintViolation { drift: f64, tolerance: f64 },

    #[error("degenerate curve: discrete tangent vanishes at grid point {index}")]
    DegenerateCurve { index: usize },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("expression error: {0}")]
    Expression(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl WireError {
    /// Short machine-readable name used in failure records.
    pub fn kind(&self) -> &'static str {
        match self {
            WireError::Domain { .. } => "domain",
            WireError::ChartExit { .. } => "chart_exit",
            WireError::Shape(_) => "shape",
            WireError::NearGeodesic { .. } => "near_geodesic",
            WireError::Numerical { .. } => "numerical",
            WireError::WindowTooLarge { .. } => "window_too_large",
            WireError::Cfl { .. } => "cfl",
            WireError::ConstraintViolation { .. } => "constraint_violation",
            WireError::DegenerateCurve { .. } => "degenerate_curve",
            WireError::Usage(_) => "usage",
            WireError::Expression(_) => "expression",
            WireError::NonFinite(_) => "non_finite",
            WireError::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, WireError>;
