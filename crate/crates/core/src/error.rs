use thiserror::Error;

/// Errors raised by the analysis engine.
///
/// Numeric payloads are carried as `f64` whatever scalar the caller works in.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error(
        "field-of-view invariant violated: edge incidence angle atan(D/L) = {incidence_deg:.4} deg exceeds receiver FoV {fov_deg:.4} deg"
    )]
    FieldOfView { incidence_deg: f64, fov_deg: f64 },

    #[error("domain error in {op}: {reason}")]
    Domain { op: &'static str, reason: String },

    #[error("radial distance {r} outside coverage disk [0, {radius}]")]
    Range { r: f64, radius: f64 },

    #[error(
        "inversion grid too coarse for U_a = {u_a}: renormalisation factor {factor} (|factor - 1| > 1e-2)"
    )]
    Resolution { u_a: usize, factor: f64 },

    #[error("could not bracket SINR threshold for target error {target}: {reason}")]
    Bracket { target: f64, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { field, reason: reason.into() }
    }
}
