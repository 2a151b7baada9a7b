//! JSON scenarios and the solve → simulate → verify pipeline behind the CLI.

mod config;
mod runner;

pub use config::{
    parse_config, parse_unvalidated, BandwidthSpec, CoefficientsConfig, DriftConfig, ExperimentConfig, Exponent,
    InitialConfig, MeshConfig, ModeName, ParticlesConfig, RateConfig, ScenarioConfig, SolverSection, TransportName,
};
pub use runner::{
    run_scenario, run_scenario_with, write_atomic, CheckOutcome, RunOptions, RunSummary, Status, MASS_DRIFT_TOL,
    MIN_VALUE_TOL,
};

use crate::error::{Error, Result};

/// Read, parse and validate a scenario file.
pub fn load_config(path: &std::path::Path) -> Result<ScenarioConfig> {
    parse_config(&read_text(path)?)
}

/// Read and parse a scenario file without constraint checks, so that a
/// run can report violations in its summary.
pub fn load_unvalidated(path: &std::path::Path) -> Result<ScenarioConfig> {
    parse_unvalidated(&read_text(path)?)
}

fn read_text(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}
