//! Scenario runner: reads a TOML scenario, runs the named experiment and
//! writes `report.csv`, `trace.csv` and `summary.txt`.

mod run;
mod scenario;

use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

pub use run::{run_scenario, validate_scenario, RunOptions, RunSummary};
pub use scenario::{
    AttackSection, FeeAnalysisSection, FeeSeriesSection, LoadedInputs, MatrixSection,
    ProfileOverrides, ScenarioFile, ScenarioKind, SweepSection, SyntheticBlocks, SyntheticSeries,
};

/// Exit status for a configuration problem.
pub const EXIT_CONFIG: u8 = 2;
/// Exit status for a failure while simulating or writing artifacts.
pub const EXIT_RUNTIME: u8 = 3;

/// Where in a run a failure happened.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Parse,
    Validate,
    LoadInputs,
    Simulate,
    WriteArtifacts,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Parse => "parse",
            Stage::Validate => "validate",
            Stage::LoadInputs => "load-inputs",
            Stage::Simulate => "simulate",
            Stage::WriteArtifacts => "write-artifacts",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {message}")]
    Read { path: PathBuf, message: String },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("missing input file {0}")]
    MissingInput(PathBuf),
    #[error("{stage}: {message}")]
    Input { stage: Stage, message: String },
    #[error("{scenario} scenario failed: {message}")]
    Simulation {
        scenario: &'static str,
        message: String,
    },
    #[error("cannot write {path}: {message}")]
    Write { path: PathBuf, message: String },
}

impl ScenarioError {
    pub fn stage(&self) -> Stage {
        match self {
            ScenarioError::Read { .. } | ScenarioError::Parse(_) => Stage::Parse,
            ScenarioError::Invalid(_) => Stage::Validate,
            ScenarioError::MissingInput(_) => Stage::LoadInputs,
            ScenarioError::Input { stage, .. } => *stage,
            ScenarioError::Simulation { .. } => Stage::Simulate,
            ScenarioError::Write { .. } => Stage::WriteArtifacts,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self.stage() {
            Stage::Parse | Stage::Validate | Stage::LoadInputs => EXIT_CONFIG,
            Stage::Simulate | Stage::WriteArtifacts => EXIT_RUNTIME,
        }
    }
}
