//! Benchmark harness for the saddle solvers: instance generation, solver
//! runs with per-iteration CSV logs, summary JSON, and log-log rate fitting.

pub mod config;
pub mod fit;
pub mod gen;
pub mod instance;
pub mod run;
pub mod runlog;

pub use config::{EpsCfg, InstanceSource, RunConfig, SolverKind};
pub use fit::{fit_rate, FitField};
pub use gen::generate_instance;
pub use instance::{build_instance, BuiltProblem, InstanceFile};
pub use run::{run, run_built, RunOutput};
pub use runlog::{RunLog, RunRecord, Summary};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("solver error: {0}")]
    Solver(#[from] fw_saddle::Error),
    #[error("config error: {0}")]
    Config(String),
    #[error("instance error: {0}")]
    Instance(String),
    #[error("fit error: {0}")]
    Fit(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("toml parse error: {0}")]
    TomlDe(#[from] toml::de::Error),
    #[error("toml write error: {0}")]
    TomlSer(#[from] toml::ser::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, BenchError>;
