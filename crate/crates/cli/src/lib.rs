//! Scenario-file front end for `nuclear-waveguide`: parses a sectioned
//! key-value description of a cavity and a request, runs it, and returns
//! CSV and plot-data artifacts with a JSON manifest.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod run;
pub mod scenario;

pub use run::{run, Artifact, Command, RunError, RunOutput, Tolerances};
pub use scenario::{parse_scenario, Scenario, ScenarioError};
