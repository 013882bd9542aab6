//! Experiment configuration, perturbations and the command pipelines behind
//! the command-line front end.

mod commands;
mod config;
mod perturb;
mod verify;

pub use commands::{
    cmd_flow, cmd_ks_report, cmd_potential, cmd_torus, cmd_verify, RunArtifacts, Status, POTENTIAL_TOL,
};
pub use config::{ExperimentConfig, FlowPath};
pub use perturb::{BlockDelta, Perturbation};
pub use verify::{dichotomy_run, reference_bands, run_all, CriterionResult};
