use crate::design::Arm;
use crate::numerics::NumericsError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure modes surfaced by the design engine.
///
/// Every variant that concerns a user-supplied value names the offending
/// field so that front ends can point at it.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid value for `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error(
        "infeasible association in {arm} arm: rho = {rho} lies outside the feasible interval [{rho_min:.6}, {rho_max:.6}]"
    )]
    InfeasibleAssociation {
        field: String,
        arm: Arm,
        rho: f64,
        rho_min: f64,
        rho_max: f64,
    },

    #[error(
        "infeasible conditional probability {value} for `{field}`: feasible range is [{min:.6}, {max:.6}]"
    )]
    InfeasibleConditional {
        field: String,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("Gumbel copula supports nonnegative association only (got rho = {rho}); use rho = 0 for independence")]
    NegativeAssociation { field: String, rho: f64 },

    #[error("undetectable effect: {message}")]
    UndetectableEffect { field: String, message: String },

    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

impl Error {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Field path the error refers to, if any.
    pub fn field(&self) -> Option<&str> {
        match self {
            Error::Validation { field, .. }
            | Error::InfeasibleAssociation { field, .. }
            | Error::InfeasibleConditional { field, .. }
            | Error::NegativeAssociation { field, .. }
            | Error::UndetectableEffect { field, .. } => Some(field),
            Error::Numerics(_) => None,
        }
    }

    /// Feasible interval for the offending value, when one is known.
    pub fn feasible_range(&self) -> Option<(f64, f64)> {
        match self {
            Error::InfeasibleAssociation {
                rho_min, rho_max, ..
            } => Some((*rho_min, *rho_max)),
            Error::InfeasibleConditional { min, max, .. } => Some((*min, *max)),
            Error::NegativeAssociation { .. } => Some((0.0, 1.0)),
            _ => None,
        }
    }

    /// Rewrites the field path, e.g. when a nested type is validated on
    /// behalf of a flat document.
    pub fn with_field(mut self, new: impl Into<String>) -> Self {
        match &mut self {
            Error::Validation { field, .. }
            | Error::InfeasibleAssociation { field, .. }
            | Error::InfeasibleConditional { field, .. }
            | Error::NegativeAssociation { field, .. }
            | Error::UndetectableEffect { field, .. } => *field = new.into(),
            Error::Numerics(_) => {}
        }
        self
    }
}
