//! Scenarios: seeded random generation, the scenario file schema, run
//! pipelines, and trajectory/report serialization.

mod export;
mod file;
mod generate;
mod run;

use std::path::PathBuf;

use thiserror::Error;

use crate::analysis::{AnalysisError, Record};
use crate::integrator::{IntegrationError, IntegrationSettings};
use crate::model::{ModelError, ModelParams, State, ValidationReport};
use crate::spectral::SpectralError;

pub use export::{
    export_run, export_trajectory, import_trajectory, trajectory_columns, trajectory_from_csv,
    trajectory_from_json, trajectory_to_csv, trajectory_to_json, RunArtifacts, TrajectoryFormat,
    TRAJECTORY_CSV, TRAJECTORY_JSON,
};
pub use file::{load_scenario, parse_scenario, scenario_to_json, ScenarioFile};
pub use generate::{generate_scenario, GeneratorSpec, Interval, Intervals, MAX_ATTEMPTS};
pub use run::{check_seeds, run_scenario, run_scenario_with, RunOutput, TrialSummary};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("field `{field}`: {message}")]
    Field { field: String, message: String },
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("parameters violate model assumptions: {0}")]
    Invalid(ValidationReport),
    #[error("no valid scenario after {attempts} attempts (last: {last})")]
    GenerationExhausted {
        attempts: usize,
        last: ValidationReport,
    },
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

impl ScenarioError {
    pub(crate) fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        ScenarioError::Field {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ScenarioError::Io {
            path: path.into(),
            source,
        }
    }
}

/// A complete experiment: model, initial condition, integration settings,
/// and which derived traces to record.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub params: ModelParams,
    pub initial: State,
    pub settings: IntegrationSettings,
    pub record: Vec<Record>,
    /// Anchor time for the weighted-average trace; `None` uses the `R = 1`
    /// crossing (or `t = 0` when there is none).
    pub wavg_anchor: Option<f64>,
    /// Present when the parameters came from the generator.
    pub seed: Option<u64>,
    pub generator: Option<GeneratorSpec>,
}

impl Scenario {
    pub fn new(params: ModelParams, initial: State) -> Self {
        Self {
            params,
            initial,
            settings: IntegrationSettings::default(),
            record: Record::ALL.to_vec(),
            wavg_anchor: None,
            seed: None,
            generator: None,
        }
    }
}
