//! Multilayer networked SIR model: a population contact network coupled to
//! an infrastructure network that carries the pathogen.
//!
//! The crate integrates the coupled ODE system, computes global, pairwise
//! (distributed), and local effective reproduction numbers along a
//! trajectory, and checks the threshold relations between them
//! numerically.
//!
//! ```
//! use sirnet_core::{generate_scenario, run_scenario, GeneratorSpec, Verdict};
//!
//! let mut scenario = generate_scenario(&GeneratorSpec::default(), 7).unwrap();
//! scenario.settings.dt = 1e-2;
//! let run = run_scenario(&scenario).unwrap();
//! assert!(run.theorems.iter().all(|r| r.verdict != Verdict::Violated));
//! ```

pub mod analysis;
pub mod integrator;
pub mod model;
pub mod reproduction;
pub mod scenario_io;
pub mod spectral;

pub use analysis::{
    annotate, classify_equilibrium, find_global_peak, run_theorem_suite, run_theorem_suite_with,
    run_theorem_suite_with_metrics, sample_metrics, weighted_average_trace, AnalysisError,
    Equilibrium, PeakReport, Record, SampleMetrics, SuiteTolerances, TheoremReport, Verdict,
    Witness,
};
pub use integrator::{
    detect_crossings, simulate, CrossingEvent, Direction, IntegrationError, IntegrationSettings,
    Trajectory,
};
pub use model::{
    assemble_blocks, derivative, derivative_compact, ModelError, ModelParams, State,
    StateDerivative, ValidationReport, Violation,
};
pub use reproduction::{
    drn_infrastructure, drn_population, global_r, lern, lerns, next_generation_matrix,
    pairwise_infection_derivative, reproduction_matrix, ReproductionReport, DEFINEDNESS_EPS,
};
pub use scenario_io::{
    export_run, export_trajectory, generate_scenario, import_trajectory, run_scenario,
    GeneratorSpec, Interval, RunArtifacts, RunOutput, Scenario, ScenarioError, TrajectoryFormat,
};
pub use spectral::{
    dominant_metzler, is_strongly_connected, spectral_radius, DominantPair, SpectralError,
};

pub use nalgebra::{DMatrix, DVector};
