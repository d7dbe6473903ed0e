//! Training, evaluation and the random-versus-lexicon comparison.

mod config;
mod experiment;
mod models;
mod report;

pub use config::{ConfigFile, KNOWN_KEYS};
pub use experiment::{evaluate, run_gap_experiment, run_synthetic_benchmark, Cell, EvalMetrics, ExperimentConfig, ExperimentOutcome};
pub use models::{fit_model, training_corpus, ModelArtifact, ModelKind, ModelSettings, TrainedModel};
pub use report::{settings_notes, ExperimentReport, ReportRow};
