//! Experiment runner: configuration files, dataset ingestion, algorithm
//! dispatch, and metrics persistence.

pub mod config;
pub mod dataset;
pub mod runner;

pub use config::{
    parse_config, AlgorithmConfig, AlgorithmName, NetworkConfig, ProblemConfig, ProblemKind,
    RunConfig, RunSection,
};
pub use dataset::{load_csv_dataset, Dataset, Standardization};
pub use runner::{run_experiment, ExperimentRecord, OUTPUT_DIR_ENV};
