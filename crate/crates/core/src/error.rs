use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors raised by the solver core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    Domain(String),
    /// Inputs are individually valid but inconsistent with each other.
    Config(String),
    /// Initial data with `a + 2σ ≥ 1` is not integrable against `μ^{-2σ}`.
    InitialDataNotInY { a: f64, sigma: f64 },
    /// The step-size controller ran out of halvings.
    Stiffness {
        time: f64,
        dt: f64,
        rejections: u32,
        min_value: f64,
    },
    /// A gauge or table could not be built from the given data.
    Construction(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::InitialDataNotInY { a, sigma } => write!(
                f,
                "initial data not in 𝒴: a + 2σ = {} ≥ 1 (a = {a}, σ = {sigma})",
                a + 2.0 * sigma
            ),
            Error::Stiffness {
                time,
                dt,
                rejections,
                min_value,
            } => write!(
                f,
                "stiffness: step at t = {time} rejected {rejections} times (last dt = {dt:e}, most negative cell {min_value:e})"
            ),
            Error::Construction(msg) => write!(f, "construction error: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
