//! Orchestration for exclusion-process experiments: configs, ensembles,
//! diffusion tables, PDE references, comparisons and report files.

pub mod config;
mod error;
pub mod exact;
pub mod experiment;
pub mod output;

pub use config::{ExactConfig, ExperimentConfig, FieldFormat, KernelSpec};
pub use error::HarnessError;
pub use exact::{exact_small_experiment, ExactDiagnostics};
pub use experiment::{
    compare_fields, convergence_study, diffusion_for, run_ensemble, run_experiment, run_experiment_with,
    ComparisonReport, FieldDistances, StudyTable,
};
