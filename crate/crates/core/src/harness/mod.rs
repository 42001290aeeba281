//! Experiment plumbing: bundled instances, configuration files, trace output
//! and method comparisons.

pub mod config;
pub mod experiment;
pub mod instances;

pub use config::{ExperimentConfig, OutputSpec, ProblemSource};
pub use experiment::{
    compare_methods, run_experiment, write_atomic, ComparisonReport, ComparisonRow,
    ExperimentReport, Summary,
};
pub use instances::{
    bundled_instances, instance_descriptor, instance_names, load_instance, InstanceLibraryEntry,
    ProblemDescriptor,
};
