//! Experiment harness for the group secret-key pipeline: configuration,
//! grid execution, and deterministic metric emission.

pub mod config;
pub mod experiment;
pub mod output;
pub mod tracefile;

pub use config::{ConstellationMode, DesignPair, ExperimentConfig};
pub use experiment::{run_constellation_study, run_design_pair_study, run_experiment, MetricsRow, MetricsTable};
