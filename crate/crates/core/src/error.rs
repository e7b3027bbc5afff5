use thiserror::Error;

/// Every fallible operation in the crate reports through this type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite {what} at {at}")]
    NonFinite { what: &'static str, at: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("evaluation too close to the light cone: |v·x - t| = {denominator:e}")]
    NearCone { denominator: f64 },

    #[error("singular jacobian (det = {det:e}) at {at}")]
    SingularJacobian { det: f64, at: String },

    #[error("integrand support reaches |xi| = {probe} outside the quadrature radius {radius}")]
    SupportExceedsQuadrature { radius: f64, probe: f64 },

    #[error("integration aborted at t = {time}: {reason}")]
    Integration { time: f64, reason: String },

    #[error("config: {0}")]
    Config(String),

    #[error("unknown experiment `{0}` (use --list)")]
    UnknownExperiment(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn fmt_point(p: &nalgebra::Vector3<f64>) -> String {
    format!("({:.6e}, {:.6e}, {:.6e})", p.x, p.y, p.z)
}
