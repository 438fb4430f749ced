//! Simulate, annotate, and check a scenario; batch runs over seeds.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::export::{export_run, TrajectoryFormat};
use super::generate::{generate_scenario, GeneratorSpec};
use super::{Scenario, ScenarioError};
use crate::analysis::{
    annotate, find_global_peak, run_theorem_suite_with_metrics, sample_metrics, PeakReport,
    SampleMetrics, SuiteTolerances, TheoremReport, Verdict,
};
use crate::integrator::{simulate, Trajectory};

/// Everything produced by one scenario run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub scenario: Scenario,
    /// Annotated with the scenario's recorded traces.
    pub trajectory: Trajectory,
    pub metrics: Vec<SampleMetrics>,
    pub peak: Option<PeakReport>,
    /// Why `peak` is missing.
    pub peak_error: Option<String>,
    pub theorems: Vec<TheoremReport>,
}

impl RunOutput {
    pub fn violated(&self) -> impl Iterator<Item = &TheoremReport> {
        self.theorems
            .iter()
            .filter(|r| r.verdict == Verdict::Violated)
    }

    pub fn all_hold(&self) -> bool {
        self.violated().next().is_none()
    }
}

pub fn run_scenario(scenario: &Scenario) -> Result<RunOutput, ScenarioError> {
    run_scenario_with(scenario, &SuiteTolerances::default())
}

pub fn run_scenario_with(
    scenario: &Scenario,
    tolerances: &SuiteTolerances,
) -> Result<RunOutput, ScenarioError> {
    let params = &scenario.params;
    let mut trajectory = simulate(params, &scenario.initial, &scenario.settings)?;
    let metrics = sample_metrics(&trajectory, params)?;
    annotate(
        &mut trajectory,
        params,
        &metrics,
        &scenario.record,
        scenario.wavg_anchor,
    )?;
    let (peak, peak_error) = match find_global_peak(&trajectory, params) {
        Ok(p) => (Some(p), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let theorems = run_theorem_suite_with_metrics(&trajectory, params, &metrics, tolerances);
    Ok(RunOutput {
        scenario: scenario.clone(),
        trajectory,
        metrics,
        peak,
        peak_error,
        theorems,
    })
}

/// One line of a batch check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub r_initial: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tau_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub t_end: Option<f64>,
    pub verdicts: BTreeMap<String, Verdict>,
    /// Claims that failed.
    pub violations: Vec<String>,
    /// Generation or integration failure; the trial did not run.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

impl TrialSummary {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.violations.is_empty()
    }

    fn from_run(seed: u64, run: &RunOutput) -> Self {
        Self {
            seed,
            r_initial: run.metrics.first().map(|m| m.global_r),
            tau_p: run.peak.as_ref().and_then(|p| p.tau_p),
            t_end: run.trajectory.times.last().copied(),
            verdicts: run
                .theorems
                .iter()
                .map(|r| (r.claim.clone(), r.verdict))
                .collect(),
            violations: run.violated().map(|r| r.claim.clone()).collect(),
            error: None,
        }
    }

    fn failed(seed: u64, error: &ScenarioError) -> Self {
        Self {
            seed,
            r_initial: None,
            tau_p: None,
            t_end: None,
            verdicts: BTreeMap::new(),
            violations: Vec::new(),
            error: Some(error.to_string()),
        }
    }
}

fn trial(
    spec: &GeneratorSpec,
    seed: u64,
    configure: &(dyn Fn(&mut Scenario) + Sync),
    out: Option<(&Path, TrajectoryFormat)>,
) -> Result<TrialSummary, ScenarioError> {
    let mut scenario = match generate_scenario(spec, seed) {
        Ok(s) => s,
        Err(e) => return Ok(TrialSummary::failed(seed, &e)),
    };
    configure(&mut scenario);
    let run = match run_scenario(&scenario) {
        Ok(r) => r,
        Err(e) => return Ok(TrialSummary::failed(seed, &e)),
    };
    if let Some((dir, format)) = out {
        export_run(&run, &dir.join(format!("seed-{seed}")), format)?;
    }
    Ok(TrialSummary::from_run(seed, &run))
}

/// Generates and checks one scenario per seed, `jobs` at a time (0 uses
/// every core). `configure` adjusts each scenario before it runs. With
/// `out`, each run is exported to `out/seed-<k>/` and the summaries to
/// `out/summary.json`. Results come back in seed order.
pub fn check_seeds(
    spec: &GeneratorSpec,
    seeds: &[u64],
    configure: &(dyn Fn(&mut Scenario) + Sync),
    out: Option<(&Path, TrajectoryFormat)>,
    jobs: usize,
) -> Result<Vec<TrialSummary>, ScenarioError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("thread pool");
    let summaries = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| trial(spec, seed, configure, out))
            .collect::<Result<Vec<_>, _>>()
    })?;
    if let Some((dir, _)) = out {
        std::fs::create_dir_all(dir).map_err(|e| ScenarioError::io(dir, e))?;
        let path = dir.join("summary.json");
        let mut text = serde_json::to_string_pretty(&summaries).expect("summary serializes");
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| ScenarioError::io(&path, e))?;
    }
    Ok(summaries)
}
