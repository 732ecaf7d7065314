use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: key `{key}` = {value}: {constraint}")]
    Config {
        key: String,
        value: String,
        constraint: String,
    },

    #[error("degenerate element {element} at t = {time}: area {area:e} below 1e-14 x reference area {reference_area:e}")]
    DegenerateElement {
        element: usize,
        time: f64,
        area: f64,
        reference_area: f64,
    },

    #[error("invalid mesh: {0}")]
    Topology(String),

    #[error("potential domain error: r = {value} lies outside {domain}")]
    Domain { value: f64, domain: &'static str },

    #[error(
        "inadmissible initial datum: |mean(u0)| = {mean_abs:.6} times S_R = {shrinkage_ratio:.6} gives {product:.6}, \
         but |(u_0)_{{Gamma_0}}| S_R < 1 is required"
    )]
    Inadmissible {
        mean_abs: f64,
        shrinkage_ratio: f64,
        product: f64,
    },

    #[error("Newton failed to converge after {iterations} iterations at t = {time}; residual history {history:?}")]
    NewtonDivergence {
        iterations: usize,
        time: f64,
        history: Vec<f64>,
    },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("failed to parse config {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn config(key: &str, value: impl std::fmt::Display, constraint: &str) -> Self {
        Error::Config {
            key: key.to_string(),
            value: value.to_string(),
            constraint: constraint.to_string(),
        }
    }
}
