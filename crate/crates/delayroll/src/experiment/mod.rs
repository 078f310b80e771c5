//! Experiment orchestration: configuration files, the run pipeline, grid
//! sweeps, and CSV ingestion.

mod config;
mod ingest;
mod runner;
mod sweep;

pub use config::{
    load_config, EvaluationSection, ExperimentConfig, ExperimentKind, ExternalCsvSection,
    GeneratorSection, LorenzSection, ModelsSection, PreprocessingSection,
    ReactionDiffusionSection, SinusoidSection, TddmdSection, TdtfSection,
};
pub use ingest::ingest_csv;
pub use runner::{
    evaluate, fit_models, generate_data, load_or_fit_models, prepare, preprocess,
    reconstruct_field, run, thread_pool, write_data, write_eval_artifacts, write_models,
    EvaluationOutput, FittedModels, FittedTdtf, GeneratedData, PreparedData, RdContext,
    RunOptions, RunSummary,
};
pub use sweep::{sweep, write_sweep_csv, SweepRow, SweepSpec};
