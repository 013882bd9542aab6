//! Finite systems of intervals and their rational potentials.

mod intervals;
mod potential;

pub use intervals::{validate_interval_system, IntervalSystem};
pub use potential::{
    eval_potential, potential_preimage, solve_potential, verify_potential, PotentialReport,
    PotentialV,
};
