use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error(
        "derivative check failed for {field} at q = {at:?}: supplied {supplied:e}, finite difference {numeric:e}"
    )]
    DerivativeMismatch {
        field: &'static str,
        at: Vec<f64>,
        supplied: f64,
        numeric: f64,
    },

    #[error("ellipticity bounds violated at q = {at:?}: eigenvalues [{min:e}, {max:e}] not within [{a0:e}, {a_max:e}]")]
    Ellipticity {
        at: Vec<f64>,
        min: f64,
        max: f64,
        a0: f64,
        a_max: f64,
    },

    #[error("diffusion matrix is not symmetric at q = {at:?} (asymmetry {asym:e})")]
    Asymmetric { at: Vec<f64>, asym: f64 },

    #[error("diffusion matrix is numerically singular at q = {at:?} (condition number {cond:e})")]
    Singular { at: Vec<f64>, cond: f64 },

    #[error("grid: {0}")]
    Grid(String),

    #[error("numerical guard: L1 norm {norm:e} exceeds {bound:e} after step {step}")]
    NumericalGuard { norm: f64, bound: f64, step: usize },

    #[error("cost guard: {0}")]
    CostGuard(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
