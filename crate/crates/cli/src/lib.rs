//! Operator front end: scene generation, training, evaluation, analysis
//! and heatmap rendering, driven by a flat run config.

use std::path::PathBuf;

use thiserror::Error;

pub mod commands;
pub mod config;
pub mod run;

pub use commands::{
    analyze, eval, eval_jobs, gen_scenes, load_scenes, render, train, write_atomic, ScenePools, MANIFEST,
};
pub use config::{AgentKind, RunConfig};
pub use run::run;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {msg}")]
    Data { path: PathBuf, msg: String },
    #[error(transparent)]
    Scene(#[from] asknav_core::gridworld::SceneError),
    #[error(transparent)]
    Env(#[from] asknav_core::env::EnvError),
    #[error(transparent)]
    Agent(#[from] asknav_core::agents::AgentError),
    #[error(transparent)]
    Metrics(#[from] asknav_core::metrics::MetricsError),
    #[error(transparent)]
    Uncertainty(#[from] asknav_core::uncertainty::UncertaintyError),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn data(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        CliError::Data { path: path.into(), msg: msg.into() }
    }

    /// Usage errors are reported by the argument parser with code 1; every
    /// error that reaches here is a data or validation problem.
    pub fn exit_code(&self) -> i32 {
        2
    }
}
