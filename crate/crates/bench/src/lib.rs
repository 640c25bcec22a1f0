//! Experiment harness for data-driven robust MDPs: simulated datasets from a
//! known truth, the single-state Bellman-update benchmarks, the invasive
//! species MDP, and regret and violation statistics.

pub mod config;
pub mod experiment;
pub mod io;
pub mod problems;

pub use config::{ExperimentConfig, Method, ProblemConfig};
pub use experiment::{run_experiment, run_experiment_detailed, summarize, ExperimentOutput, ExperimentRecord, SummaryRow};
pub use problems::{build_species_mdp, generate_dataset, Problem};
