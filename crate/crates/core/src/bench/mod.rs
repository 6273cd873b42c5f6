//! Benchmark problems, data generation and experiment orchestration.

mod data;
mod experiment;
mod report;

pub use data::{generate_dataset, merge, vertical_split, Benchmark, BenchmarkSpec, ClientDataset, SplitError, SAMPLE_COUNT};
pub use experiment::{run_experiment, run_once, ExperimentConfig, ExperimentError, ExperimentResult, Mode, RunRecord};
pub use report::{config_hash, read_csv, summarize, write_csv, write_results, Stats, Summary};
