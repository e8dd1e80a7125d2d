use num_complex::Complex64;
use thiserror::Error;

/// Errors raised by the simulation, stability and optimization routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular evaluation of {what} at s = {s}")]
    Singular { what: &'static str, s: Complex64 },

    #[error("quadrature did not converge: achieved relative error {achieved:.3e} (requested {requested:.1e})")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("ill-posed least-squares fit at iteration {iteration}")]
    IllPosedFit { iteration: usize },

    #[error("indeterminate Nyquist verdict: unresolved phase step of {step_deg:.1} deg near omega = {omega:.6e} rad/s")]
    Indeterminate { omega: f64, step_deg: f64 },

    #[error("gain model {0} has no rational pole description")]
    NotRational(&'static str),

    #[error("infeasible seed: {0}")]
    InfeasibleSeed(String),

    #[error("cost evaluation failed at parameters {params:?}: {source}")]
    Cost {
        params: Vec<f64>,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
