use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {field}: {reason}")]
    Config { field: String, reason: String },
    #[error("point lies outside the provider domain")]
    OutsideDomain,
    #[error("region is empty: {0}")]
    EmptyRegion(String),
    #[error("geometry: {0}")]
    Geometry(String),
    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("direction search collapsed at level {level}: spread {spread:e} below floor {floor:e}")]
    DimensionCollapse { level: usize, spread: f64, floor: f64 },
    #[error("{0}")]
    Failed(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config { field: field.into(), reason: reason.into() }
    }
}
