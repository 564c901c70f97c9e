//! Numerical toolkit for chains on dyadic grids: flat and fractional norms,
//! fractional Sobolev seminorms, Whitney decompositions, Hölder pushforwards
//! with Brouwer-degree checks, and Young–Züst geometric integration.
//!
//! The crate is organized by subsystem:
//!
//! - [`grid`] — dyadic cubical and simplicial chains with boundary, mass,
//!   refinement and cone operators;
//! - [`flatnorm`] — the flat norm as a linear program, fractional decomposition
//!   costs, deformation onto coarser grids, and the two-sided geometric-series
//!   constant used for multiscale tail control;
//! - [`sobolev`] — Gagliardo seminorm, fractional perimeter, total variation,
//!   and the dyadic-averaging decomposition;
//! - [`fractal`] — box counting, summability, Whitney decompositions and
//!   fractal test-set generators;
//! - [`holder`] — Hölder test functions, the fixed mollifier, and smoothed
//!   approximating sequences with measured certificates;
//! - [`pushforward`] — Lipschitz and Hölder pushforwards of chains, the
//!   top-dimensional cone extension, and planar degree fields;
//! - [`young`] — evaluation of sampled differential forms on chains, Young and
//!   Züst integration, and the multiscale wedge product;
//! - [`cli`] — configuration and dispatch for the `fraccur` binary.

pub mod cli;
pub mod flatnorm;
pub mod fractal;
pub mod grid;
pub mod holder;
pub mod pushforward;
pub mod sobolev;
pub(crate) mod util;
pub mod young;

/// Crate-wide error type. Variants are grouped by how the CLI reports them:
/// configuration problems, violated mathematical preconditions, and numerical
/// failures.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json(_) | Error::Io(_) => 2,
            Error::Precondition(_) => 3,
            Error::Numeric(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn precondition(msg: impl Into<String>) -> Error {
    Error::Precondition(msg.into())
}

pub(crate) fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
