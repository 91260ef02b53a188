//! Corpus generation, training runs, and evaluation reports.

pub mod config;
pub mod corpus;
pub mod runner;

pub use config::{CorpusConfig, EvalSettings, ExperimentConfig, SimSettings, Split, TrainSettings};
pub use corpus::{corpus_hash, Corpus, CorpusIndex, ScaleMethod, TraceEntry, VideoEntry};
pub use runner::{
    compare, evaluate, improvement_percent, legal_actions, run_training, truncate_video, Comparison,
    EvalReport, PolicySpec, TrainingRun, TrainingSampler,
};
