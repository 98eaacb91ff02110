use thiserror::Error;

/// Errors shared by graph construction and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("graph is disconnected{0}")]
    Disconnected(String),

    #[error("could not sample a connected graph after {retries} attempts (n={n}, radius={radius}); likely disconnected regime")]
    SamplingExhausted { n: usize, radius: f64, retries: usize },

    #[error("invalid leader selection: {0}")]
    InvalidSelection(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is numerically singular: {0}")]
    Singular(String),

    #[error("combinatorial budget exceeded: C({n},{k}) > {budget}")]
    BudgetExceeded { n: usize, k: usize, budget: u64 },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("step-size guard violated: dt*lambda_max = {0:.3e} >= 0.5")]
    StepSizeGuard(f64),
}
