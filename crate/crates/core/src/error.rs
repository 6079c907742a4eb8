use thiserror::Error;

/// Errors produced by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A function evaluated at a quadrature or parameter node was not finite.
    #[error("non-finite value {value} at node {node:?}")]
    Evaluation { node: Vec<f64>, value: f64 },

    /// An iterative solver exhausted its budget.
    #[error("no convergence after {iterations} iterations (final residual {residual:.3e})")]
    Convergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    /// A dense linear-algebra step failed.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A computed topological degree was not close enough to an integer.
    #[error("degree {value} is {distance:.3e} from the nearest integer; increase resolution")]
    Resolution { value: f64, distance: f64 },

    /// Two independent degree computations disagreed.
    #[error("degree methods disagree: integral {integral}, preimage count {count}")]
    DegreeMismatch { integral: i64, count: i64 },

    /// A degree problem whose map vanishes on the region boundary.
    #[error("ill-posed degree problem: {0}")]
    IllPosed(String),
}

pub type Result<T> = std::result::Result<T, Error>;
