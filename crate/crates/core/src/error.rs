use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("kernel violates (H2): {0}")]
    KernelHypothesis(String),

    #[error("nonlinearity `{0}` has no closed-form kink; numerical heteroclinics are not supported")]
    MissingExactKink(String),

    #[error("symmetric mode requires an odd-symmetric nonlinearity, `{0}` is not")]
    NotOddSymmetric(String),

    #[error("singular factorization (pivot ratio {pivot_ratio:.3e}) at row {row}")]
    SolveFailure { row: usize, pivot_ratio: f64 },

    #[error("no convergence after {iterations} iterations (last step {last_step:.3e})")]
    NoConvergence {
        iterations: usize,
        last_step: f64,
        step_history: Vec<f64>,
    },

    #[error("iterate left the ball: ||phi||_H2 = {norm:.3e} > {radius:.3e} at iteration {iteration}")]
    BallEscape {
        iteration: usize,
        norm: f64,
        radius: f64,
        step_history: Vec<f64>,
    },

    #[error("empty epsilon sweep")]
    EmptySweep,

    #[error("no 1/2-crossing front found")]
    NoFront,

    #[error("lattice state became non-finite at t = {time:.4}")]
    Diverged { time: f64 },

    #[error("site range too narrow: front must stay {required} sites from each end, margin is {available}")]
    InsufficientMargin { required: i64, available: i64 },

    #[error("config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
