//! Experiment harness around the leader-selection core: config parsing,
//! method sweeps, and plot-ready report emission.

pub mod config;
pub mod output;
pub mod run;

/// Errors surfaced by the harness, each mapped to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("solver did not converge: {0}")]
    Solver(String),
}

impl CliError {
    /// 2 = config error, 3 = solver non-convergence, 4 = I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io { .. } => 4,
        }
    }
}
