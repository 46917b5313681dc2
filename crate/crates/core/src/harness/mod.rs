//! Experiment orchestration: configuration, Monte-Carlo runs, NMSD curves,
//! closed-form predictions and their CSV/SVG export.

mod config;
mod export;
pub mod metrics;
mod predict;
mod run;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{
    AlgorithmSpec, BankConfig, ChangePoint, EchoPathConfig, ExperimentConfig, InputKind,
    NamedChange,
};
pub use export::{csv_string, emit_plot, export_csv, svg_string};
pub use predict::{experiment_stats, predict};
pub use run::{
    nmsd, run_monte_carlo, run_single, to_db, CurveSet, Experiment, MonteCarloResult, RunResult,
    RunSignals, StepEvent, DEVIATION_FLOOR,
};

use crate::adaptive::AdaptError;
use crate::filterbank::FilterBankError;
use crate::signal::{SignalError, WavError};
use crate::theory::TheoryError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed configuration: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    FilterBank(#[from] FilterBankError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Wav(#[from] WavError),
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error(transparent)]
    AdaptSetup(#[from] AdaptError),
    #[error("algorithm {algorithm}: {source}")]
    Adapt { algorithm: usize, source: AdaptError },
    #[error("run with seed {seed} failed: {source}")]
    Run { seed: u64, source: Box<HarnessError> },
    #[error("weight vector has {got} taps, reference has {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("reference echo path has zero energy")]
    ZeroReference,
    #[error("nothing to plot")]
    EmptyResult,
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}
