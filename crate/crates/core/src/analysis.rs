//! Trajectory-level analysis: derived traces, peak detection, equilibrium
//! classification, and the numerical threshold-claim suite.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrator::{crossings_of, Direction, Trajectory};
use crate::model::{derivative, derivative_compact, ModelParams, State};
use crate::reproduction::{
    drn_population, lerns, next_generation_matrix, pairwise_infection_derivative,
    reproduction_matrix, DEFINEDNESS_EPS,
};
use crate::spectral::{
    dominant_metzler, dominant_metzler_with, spectral_radius, spectral_radius_with, PowerSettings,
    SpectralError,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("trajectory is empty")]
    Empty,
    #[error("R(t) crosses 1 {count} times (at {times:?}); it must be non-increasing")]
    MultipleCrossings { count: usize, times: Vec<f64> },
}

/// Derived scalar traces that can be attached to a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Record {
    /// Global effective reproduction number.
    R,
    LambdaMax,
    /// One trace per node, `lern_1..lern_{n+m}`.
    Lern,
    /// Weighted average `v(τ)ᵀ z(t)`.
    Wavg,
}

impl Record {
    pub const ALL: [Record; 4] = [Record::R, Record::LambdaMax, Record::Lern, Record::Wavg];

    pub fn name(self) -> &'static str {
        match self {
            Record::R => "R",
            Record::LambdaMax => "lambda_max",
            Record::Lern => "lern",
            Record::Wavg => "wavg",
        }
    }
}

impl fmt::Display for Record {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Record {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Record::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| {
                format!("unknown record quantity `{s}` (expected R, lambda_max, lern, wavg)")
            })
    }
}

/// Spectral quantities at one recorded sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMetrics {
    pub t: f64,
    pub global_r: f64,
    pub lambda_max: f64,
    /// Normalized left eigenvector of `H(s) B_f − D_f`.
    pub left_vector: DVector<f64>,
    pub lern: Vec<Option<f64>>,
}

/// Computes [`SampleMetrics`] for every sample, warm-starting each power
/// iteration from the previous sample's vector.
pub fn sample_metrics(
    trajectory: &Trajectory,
    params: &ModelParams,
) -> Result<Vec<SampleMetrics>, SpectralError> {
    let settings = PowerSettings::default();
    let mut right: Option<DVector<f64>> = None;
    let mut left: Option<DVector<f64>> = None;
    let mut out = Vec::with_capacity(trajectory.len());
    for state in &trajectory.states {
        let ngm = next_generation_matrix(params, &state.s);
        let radius = spectral_radius_with(&ngm, &settings, right.as_ref())?;
        let dominant =
            dominant_metzler_with(&params.metzler_matrix(&state.s), &settings, left.as_ref())?;
        right = Some(radius.vector);
        left = Some(dominant.vector.clone());
        out.push(SampleMetrics {
            t: state.t,
            global_r: radius.value,
            lambda_max: dominant.value,
            left_vector: dominant.vector,
            lern: lerns(params, state),
        });
    }
    Ok(out)
}

/// Left eigenvector of `H(s(τ)) B_f − D_f`, with `s` interpolated between
/// samples.
pub fn left_vector_at(
    trajectory: &Trajectory,
    params: &ModelParams,
    tau: f64,
) -> Result<DVector<f64>, SpectralError> {
    let s = trajectory.susceptible_at(tau);
    Ok(dominant_metzler(&params.metzler_matrix(&s))?.vector)
}

/// `v(τ)ᵀ z(t)` at every sample.
pub fn weighted_average_trace(
    trajectory: &Trajectory,
    params: &ModelParams,
    tau: f64,
) -> Result<Vec<f64>, SpectralError> {
    let v = left_vector_at(trajectory, params, tau)?;
    Ok(trace_with(&trajectory.states, &v))
}

fn trace_with(states: &[State], v: &DVector<f64>) -> Vec<f64> {
    states.iter().map(|st| v.dot(&st.z())).collect()
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = k;
        }
    }
    best
}

/// Where the first downward crossing of `R = 1` lies, if any.
fn r_crossing(times: &[f64], r: &[f64]) -> Result<Option<f64>, AnalysisError> {
    let events = crossings_of(times, r, "R", 1.0);
    match events.as_slice() {
        [] => Ok(None),
        [only] if only.direction == Direction::Downward => Ok(Some(only.time)),
        _ => Err(AnalysisError::MultipleCrossings {
            count: events.len(),
            times: events.iter().map(|e| e.time).collect(),
        }),
    }
}

/// Anchor `τ` for the weighted average: the `R = 1` crossing when there is
/// one, otherwise the start of the trajectory.
pub fn default_anchor(times: &[f64], r: &[f64]) -> f64 {
    match r_crossing(times, r) {
        Ok(Some(t)) => t,
        _ => times.first().copied().unwrap_or(0.0),
    }
}

/// Attaches the requested derived traces as named scalars.
pub fn annotate(
    trajectory: &mut Trajectory,
    params: &ModelParams,
    metrics: &[SampleMetrics],
    record: &[Record],
    wavg_anchor: Option<f64>,
) -> Result<(), SpectralError> {
    let r: Vec<f64> = metrics.iter().map(|m| m.global_r).collect();
    for &what in record {
        match what {
            Record::R => {
                trajectory.scalars.insert("R".into(), r.clone());
            }
            Record::LambdaMax => {
                let lam = metrics.iter().map(|m| m.lambda_max).collect();
                trajectory.scalars.insert("lambda_max".into(), lam);
            }
            Record::Lern => {
                for node in 0..params.size() {
                    let trace = metrics
                        .iter()
                        .map(|m| m.lern[node].unwrap_or(f64::NAN))
                        .collect();
                    trajectory
                        .scalars
                        .insert(format!("lern_{}", node + 1), trace);
                }
            }
            Record::Wavg => {
                let tau = wavg_anchor.unwrap_or_else(|| default_anchor(&trajectory.times, &r));
                let trace = weighted_average_trace(trajectory, params, tau)?;
                trajectory.scalars.insert("wavg".into(), trace);
            }
        }
    }
    Ok(())
}

fn global_r_trace(
    trajectory: &Trajectory,
    params: &ModelParams,
) -> Result<Vec<f64>, SpectralError> {
    if let Ok(r) = trajectory.scalar("R") {
        return Ok(r.to_vec());
    }
    trajectory
        .states
        .iter()
        .map(|st| spectral_radius(&next_generation_matrix(params, &st.s)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakReport {
    pub r_initial: f64,
    /// Interpolated time where `R(t)` crosses 1 downward.
    pub tau_p: Option<f64>,
    /// `R(0) ≤ 1`: the weighted average only decays.
    pub decay_regime: bool,
    /// `τ` anchoring the weighted average (`tau_p`, or the first sample).
    pub weighted_average_anchor: f64,
    pub weighted_average_peak_time: f64,
    pub agreement_gap: Option<f64>,
    pub record_interval: f64,
    /// Grid argmax of each `x_i` then each `w_j`.
    pub per_node_peak_times: Vec<f64>,
    pub per_node_lern_crossings: Vec<Vec<f64>>,
    /// `|R_i(τ_{p_i}) − 1|` for population nodes at their own peak; a
    /// measured statistic, not a checked claim.
    pub population_peak_lern_gap: Vec<Option<f64>>,
}

/// Locates the global peak and per-node peaks on a trajectory.
pub fn find_global_peak(
    trajectory: &Trajectory,
    params: &ModelParams,
) -> Result<PeakReport, AnalysisError> {
    if trajectory.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let times = &trajectory.times;
    let r = global_r_trace(trajectory, params)?;
    let tau_p = r_crossing(times, &r)?;
    let anchor = tau_p.unwrap_or(times[0]);
    let wavg = weighted_average_trace(trajectory, params, anchor)?;
    let peak_time = times[argmax(&wavg)];

    let (n, size) = (params.n(), params.size());
    let lern_traces: Vec<Vec<f64>> = {
        let per_sample: Vec<_> = trajectory
            .states
            .iter()
            .map(|st| lerns(params, st))
            .collect();
        (0..size)
            .map(|i| {
                per_sample
                    .iter()
                    .map(|l| l[i].unwrap_or(f64::NAN))
                    .collect()
            })
            .collect()
    };
    let mut per_node_peak_times = Vec::with_capacity(size);
    let mut gaps = Vec::with_capacity(n);
    for (node, lern_trace) in lern_traces.iter().enumerate() {
        let values: Vec<f64> = trajectory
            .states
            .iter()
            .map(|st| if node < n { st.x[node] } else { st.w[node - n] })
            .collect();
        let k = argmax(&values);
        per_node_peak_times.push(times[k]);
        if node < n {
            let at_peak = lern_trace[k];
            gaps.push((!at_peak.is_nan()).then(|| (at_peak - 1.0).abs()));
        }
    }
    let per_node_lern_crossings = lern_traces
        .iter()
        .map(|trace| {
            crossings_of(times, trace, "lern", 1.0)
                .into_iter()
                .map(|e| e.time)
                .collect()
        })
        .collect();

    Ok(PeakReport {
        r_initial: r[0],
        tau_p,
        decay_regime: r[0] <= 1.0,
        weighted_average_anchor: anchor,
        weighted_average_peak_time: peak_time,
        agreement_gap: tau_p.map(|t| (t - peak_time).abs()),
        record_interval: trajectory.max_interval(),
        per_node_peak_times,
        per_node_lern_crossings,
        population_peak_lern_gap: gaps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Equilibrium {
    Healthy,
    NotAtEquilibrium,
}

/// Healthy iff every infection and contamination level is below `tol`.
/// There is no endemic class: the only equilibria are `(s*, 0, 0)`.
pub fn classify_equilibrium(_params: &ModelParams, state: &State, tol: f64) -> Equilibrium {
    let x_max = state.x.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let w_max = state.w.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if x_max < tol && w_max < tol {
        Equilibrium::Healthy
    } else {
        Equilibrium::NotAtEquilibrium
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Holds,
    Violated,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub time: f64,
    pub subject: String,
    pub observed: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub claim: String,
    pub verdict: Verdict,
    /// Number of individual comparisons made.
    pub checks: usize,
    pub violations: usize,
    /// First few violations (capped at [`MAX_WITNESSES`]).
    pub witnesses: Vec<Witness>,
    pub tolerances: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

pub const MAX_WITNESSES: usize = 16;

/// Thresholds used by [`run_theorem_suite`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteTolerances {
    pub box_slack: f64,
    pub susceptible_slack: f64,
    pub r_slack: f64,
    pub derivative_threshold: f64,
    pub peak_intervals: f64,
    /// `v(τ)ᵀ z` must end below this; `None` skips the terminal check.
    pub decay_target: Option<f64>,
    pub healthy_tol: f64,
    pub stationary_tol: f64,
}

impl Default for SuiteTolerances {
    fn default() -> Self {
        Self {
            box_slack: 1e-9,
            susceptible_slack: 1e-9,
            r_slack: 1e-7,
            derivative_threshold: 1e-8,
            peak_intervals: 2.0,
            decay_target: Some(1e-3),
            healthy_tol: 1e-3,
            stationary_tol: 1e-10,
        }
    }
}

struct Claim {
    report: TheoremReport,
}

impl Claim {
    fn new(id: &str, tolerances: &[(&str, f64)]) -> Self {
        Self {
            report: TheoremReport {
                claim: id.to_string(),
                verdict: Verdict::NotApplicable,
                checks: 0,
                violations: 0,
                witnesses: Vec::new(),
                tolerances: tolerances
                    .iter()
                    .map(|(k, v)| (k.to_string(), *v))
                    .collect(),
                note: None,
            },
        }
    }

    fn check(&mut self, ok: bool, witness: impl FnOnce() -> Witness) {
        self.report.checks += 1;
        if !ok {
            self.report.violations += 1;
            if self.report.witnesses.len() < MAX_WITNESSES {
                self.report.witnesses.push(witness());
            }
        }
    }

    fn note(mut self, text: impl Into<String>) -> Self {
        self.report.note = Some(text.into());
        self
    }

    fn finish(mut self) -> TheoremReport {
        self.report.verdict = if self.report.violations > 0 {
            Verdict::Violated
        } else if self.report.checks > 0 {
            Verdict::Holds
        } else {
            Verdict::NotApplicable
        };
        self.report
    }
}

fn witness(time: f64, subject: impl Into<String>, observed: Vec<f64>) -> Witness {
    Witness {
        time,
        subject: subject.into(),
        observed,
    }
}

fn node_name(n: usize, node: usize) -> String {
    if node < n {
        format!("x_{}", node + 1)
    } else {
        format!("w_{}", node - n + 1)
    }
}

/// Runs every claim with default tolerances.
pub fn run_theorem_suite(trajectory: &Trajectory, params: &ModelParams) -> Vec<TheoremReport> {
    run_theorem_suite_with(trajectory, params, &SuiteTolerances::default())
}

/// Runs every claim; spectral failures show up as violations of the claim
/// that needed them.
pub fn run_theorem_suite_with(
    trajectory: &Trajectory,
    params: &ModelParams,
    tol: &SuiteTolerances,
) -> Vec<TheoremReport> {
    let mut reports = vec![
        invariant_box(trajectory, tol),
        susceptible_decreasing(trajectory, tol),
    ];
    if trajectory.is_empty() {
        return reports;
    }
    match sample_metrics(trajectory, params) {
        Ok(metrics) => run_theorem_suite_with_metrics(trajectory, params, &metrics, tol),
        Err(e) => {
            reports.push(spectral_agreement(trajectory, params, tol));
            let mut claim = Claim::new("T1.i", &[]);
            claim.check(false, || witness(f64::NAN, "spectral", vec![]));
            reports.push(
                claim
                    .note(format!("spectral computation failed: {e}"))
                    .finish(),
            );
            reports
        }
    }
}

/// Same as [`run_theorem_suite_with`], reusing precomputed sample metrics
/// (one entry per trajectory sample).
pub fn run_theorem_suite_with_metrics(
    trajectory: &Trajectory,
    params: &ModelParams,
    metrics: &[SampleMetrics],
    tol: &SuiteTolerances,
) -> Vec<TheoremReport> {
    assert_eq!(
        metrics.len(),
        trajectory.len(),
        "one metrics entry per sample"
    );
    let mut reports = vec![
        invariant_box(trajectory, tol),
        susceptible_decreasing(trajectory, tol),
    ];
    if trajectory.is_empty() {
        return reports;
    }
    reports.push(spectral_agreement(trajectory, params, tol));
    reports.push(r_nonincreasing(trajectory, metrics, tol));
    reports.extend(lern_derivative_signs(trajectory, params, metrics, tol));
    reports.push(peak_at_threshold(trajectory, params, metrics, tol));
    reports.push(terminal_decay(trajectory, metrics, tol));
    reports.push(node_growth_signs(trajectory, params, metrics, tol));
    reports.push(pairwise_drn_signs(trajectory, params, tol));
    reports.push(weighted_average_bound(trajectory, params, metrics));
    reports
}

fn invariant_box(trajectory: &Trajectory, tol: &SuiteTolerances) -> TheoremReport {
    let mut claim = Claim::new("L1", &[("box_slack", tol.box_slack)]);
    for st in &trajectory.states {
        let result = st.check(tol.box_slack);
        claim.check(result.is_ok(), || {
            witness(st.t, result.unwrap_err(), vec![])
        });
    }
    claim.finish()
}

fn susceptible_decreasing(trajectory: &Trajectory, tol: &SuiteTolerances) -> TheoremReport {
    let mut claim = Claim::new("L2", &[("susceptible_slack", tol.susceptible_slack)]);
    for pair in trajectory.states.windows(2) {
        for i in 0..pair[0].n() {
            let (a, b) = (pair[0].s[i], pair[1].s[i]);
            claim.check(b <= a + tol.susceptible_slack, || {
                witness(pair[1].t, format!("s_{}", i + 1), vec![a, b])
            });
        }
    }
    claim.finish()
}

fn spectral_agreement(
    trajectory: &Trajectory,
    params: &ModelParams,
    tol: &SuiteTolerances,
) -> TheoremReport {
    let mut claim = Claim::new(
        "P1",
        &[
            ("healthy_tol", tol.healthy_tol),
            ("stationary_tol", tol.stationary_tol),
        ],
    );
    let last = trajectory.last().expect("nonempty");
    let z_max = last.z().amax();
    let dz_max = derivative(params, last).dz().amax();
    match classify_equilibrium(params, last, tol.healthy_tol) {
        Equilibrium::Healthy => claim.check(true, || unreachable!()),
        Equilibrium::NotAtEquilibrium if dz_max < tol.stationary_tol => {
            claim.check(false, || witness(last.t, "terminal state", vec![z_max, dz_max]))
        }
        Equilibrium::NotAtEquilibrium => {
            return claim
                .note(format!(
                    "terminal state still evolving (‖z‖∞={z_max:e}, ‖ż‖∞={dz_max:e}); horizon too short"
                ))
                .finish()
        }
    }
    claim.finish()
}

fn r_nonincreasing(
    trajectory: &Trajectory,
    metrics: &[SampleMetrics],
    tol: &SuiteTolerances,
) -> TheoremReport {
    let mut claim = Claim::new("T1.i", &[("r_slack", tol.r_slack)]);
    for pair in metrics.windows(2) {
        let (a, b) = (pair[0].global_r, pair[1].global_r);
        claim.check(b <= a + tol.r_slack, || witness(pair[1].t, "R", vec![a, b]));
    }
    let r: Vec<f64> = metrics.iter().map(|m| m.global_r).collect();
    let events = crossings_of(&trajectory.times, &r, "R", 1.0);
    let single = events.len() <= 1 && events.iter().all(|e| e.direction == Direction::Downward);
    claim.check(single, || {
        witness(
            events.first().map_or(f64::NAN, |e| e.time),
            "R crossings of 1",
            events.iter().map(|e| e.time).collect(),
        )
    });
    claim.finish()
}

/// Per-sample discretization of the "increasing ⇒ R > 1" and
/// "decreasing ⇒ R < 1" claims: the slope of `v(t_k)ᵀ z` at `t_k`.
fn lern_derivative_signs(
    trajectory: &Trajectory,
    params: &ModelParams,
    metrics: &[SampleMetrics],
    tol: &SuiteTolerances,
) -> [TheoremReport; 2] {
    let thr = tol.derivative_threshold;
    let mut up = Claim::new("T1.ii", &[("derivative_threshold", thr)]);
    let mut down = Claim::new("T1.iv", &[("derivative_threshold", thr)]);
    for (st, m) in trajectory.states.iter().zip(metrics) {
        let slope = m.left_vector.dot(&derivative_compact(params, st));
        if slope > thr {
            up.check(m.global_r > 1.0, || {
                witness(st.t, "v(t)ᵀż vs R", vec![slope, m.global_r])
            });
        } else if slope < -thr {
            down.check(m.global_r < 1.0, || {
                witness(st.t, "v(t)ᵀż vs R", vec![slope, m.global_r])
            });
        }
    }
    [up.finish(), down.finish()]
}

fn peak_at_threshold(
    trajectory: &Trajectory,
    params: &ModelParams,
    metrics: &[SampleMetrics],
    tol: &SuiteTolerances,
) -> TheoremReport {
    let mut claim = Claim::new("T1.iii", &[("peak_intervals", tol.peak_intervals)]);
    let r: Vec<f64> = metrics.iter().map(|m| m.global_r).collect();
    if r[0] <= 1.0 {
        return claim.note("R(0) <= 1: no interior peak").finish();
    }
    let tau_p = match r_crossing(&trajectory.times, &r) {
        Ok(Some(t)) => t,
        Ok(None) => return claim.note("R stays above 1 over the horizon").finish(),
        Err(e) => {
            claim.check(false, || witness(f64::NAN, e.to_string(), vec![]));
            return claim.finish();
        }
    };
    let trace = match weighted_average_trace(trajectory, params, tau_p) {
        Ok(t) => t,
        Err(e) => {
            claim.check(false, || witness(tau_p, e.to_string(), vec![]));
            return claim.finish();
        }
    };
    let peak = trajectory.times[argmax(&trace)];
    let window = tol.peak_intervals * trajectory.max_interval();
    claim.check((peak - tau_p).abs() <= window, || {
        witness(tau_p, "argmax v(τp)ᵀz vs τp", vec![peak, tau_p, window])
    });
    claim.finish()
}

fn terminal_decay(
    trajectory: &Trajectory,
    metrics: &[SampleMetrics],
    tol: &SuiteTolerances,
) -> TheoremReport {
    let mut tols = vec![];
    if let Some(target) = tol.decay_target {
        tols.push(("decay_target", target));
    }
    let mut claim = Claim::new("C1", &tols);
    let Some(start) = metrics.iter().position(|m| m.global_r < 1.0) else {
        return claim.note("R(t) never below 1").finish();
    };
    let trace = trace_with(&trajectory.states[start..], &metrics[start].left_vector);
    for (k, pair) in trace.windows(2).enumerate() {
        claim.check(pair[1] < pair[0], || {
            witness(trajectory.times[start + k + 1], "v(τ)ᵀz", pair.to_vec())
        });
    }
    if let Some(target) = tol.decay_target {
        let last = *trace.last().expect("nonempty");
        claim.check(last < target, || {
            witness(
                *trajectory.times.last().unwrap(),
                "final v(τ)ᵀz",
                vec![last, target],
            )
        });
    }
    claim
        .note(format!(
            "anchored at first sample with R < 1, t = {}",
            metrics[start].t
        ))
        .finish()
}

fn node_growth_signs(
    trajectory: &Trajectory,
    params: &ModelParams,
    metrics: &[SampleMetrics],
    tol: &SuiteTolerances,
) -> TheoremReport {
    let thr = tol.derivative_threshold;
    let mut claim = Claim::new(
        "T2",
        &[
            ("derivative_threshold", thr),
            ("definedness", DEFINEDNESS_EPS),
        ],
    );
    let n = params.n();
    for (st, m) in trajectory.states.iter().zip(metrics) {
        let dz = derivative(params, st).dz();
        for (node, lern) in m.lern.iter().enumerate() {
            let Some(lern) = *lern else { continue };
            let slope = dz[node];
            if slope.abs() <= thr {
                continue;
            }
            let ok = (slope > 0.0) == (lern > 1.0) && lern != 1.0;
            claim.check(ok, || witness(st.t, node_name(n, node), vec![slope, lern]));
        }
    }
    claim.finish()
}

fn pairwise_drn_signs(
    trajectory: &Trajectory,
    params: &ModelParams,
    tol: &SuiteTolerances,
) -> TheoremReport {
    let thr = tol.derivative_threshold;
    let mut claim = Claim::new("L3", &[("derivative_threshold", thr)]);
    let (n, m) = (params.n(), params.m());
    for st in &trajectory.states {
        for i in 0..n {
            if st.x[i].is_nan() || st.x[i] <= DEFINEDNESS_EPS {
                continue;
            }
            for j in 0..n {
                let r_ij = drn_population(params, st, i, j).expect("x_i defined");
                for k in 0..m {
                    let r_ik = drn_population(params, st, i, n + k).expect("x_i defined");
                    let d = pairwise_infection_derivative(params, st, i, j, k);
                    let q = r_ij + r_ik - 1.0;
                    if d.abs() <= thr || q.abs() <= thr {
                        continue;
                    }
                    claim.check((d > 0.0) == (q > 0.0), || {
                        witness(
                            st.t,
                            format!("x_{}^({},{})", i + 1, j + 1, k + 1),
                            vec![d, q],
                        )
                    });
                }
            }
        }
    }
    claim.finish()
}

fn weighted_average_bound(
    trajectory: &Trajectory,
    params: &ModelParams,
    metrics: &[SampleMetrics],
) -> TheoremReport {
    let mut claim = Claim::new("T3", &[]);
    for (st, m) in trajectory.states.iter().zip(metrics) {
        let Some(values) = m.lern.iter().copied().collect::<Option<Vec<f64>>>() else {
            continue;
        };
        let all_above = values.iter().all(|&v| v > 1.0);
        let all_below = values.iter().all(|&v| v < 1.0);
        if !(all_above || all_below) {
            continue;
        }
        let rho = spectral_radius(&reproduction_matrix(params, &st.s));
        let ok = match rho {
            Ok(rho) if all_above => rho > 1.0,
            Ok(rho) => rho < 1.0,
            Err(_) => false,
        };
        claim.check(ok, || {
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            witness(
                st.t,
                "ρ(𝓡) vs LERN range",
                vec![rho.unwrap_or(f64::NAN), lo, hi],
            )
        });
    }
    claim.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::{simulate, IntegrationSettings};
    use nalgebra::DMatrix;

    fn golden() -> ModelParams {
        ModelParams::new(
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::zeros(1, 1),
            DVector::from_element(1, 1.0),
            DVector::from_element(1, 1.0),
        )
        .unwrap()
    }

    fn run(s0: f64, x0: f64, w0: f64) -> Trajectory {
        let init = State::initial(
            DVector::from_element(1, s0),
            DVector::from_element(1, x0),
            DVector::from_element(1, w0),
        )
        .unwrap();
        let settings = IntegrationSettings {
            dt: 1e-2,
            t_end: 40.0,
            record_every: 5,
            ..Default::default()
        };
        simulate(&golden(), &init, &settings).unwrap()
    }

    fn verdicts(reports: &[TheoremReport]) -> BTreeMap<String, Verdict> {
        reports
            .iter()
            .map(|r| (r.claim.clone(), r.verdict))
            .collect()
    }

    #[test]
    fn record_names_round_trip() {
        for r in Record::ALL {
            assert_eq!(r.name().parse::<Record>().unwrap(), r);
        }
        assert!("lern_3".parse::<Record>().is_err());
    }

    #[test]
    fn zero_trajectory_trace() {
        let traj = run(0.9, 0.0, 0.0);
        let trace = weighted_average_trace(&traj, &golden(), 0.0).unwrap();
        assert!(trace.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn healthy_trajectory_suite() {
        let traj = run(0.9, 0.0, 0.0);
        for report in run_theorem_suite(&traj, &golden()) {
            assert_ne!(report.verdict, Verdict::Violated, "{report:?}");
        }
    }

    #[test]
    fn golden_outbreak_suite_and_peak() {
        let p = golden();
        let traj = run(0.95, 0.05, 0.1);
        let reports = run_theorem_suite(&traj, &p);
        for report in &reports {
            assert_ne!(report.verdict, Verdict::Violated, "{report:?}");
        }
        let v = verdicts(&reports);
        for claim in ["L1", "L2", "T1.i", "T1.iii", "T2", "C1", "P1"] {
            assert_eq!(v[claim], Verdict::Holds, "{claim}");
        }
        let peak = find_global_peak(&traj, &p).unwrap();
        let tau = peak.tau_p.expect("R(0) ≈ 1.56 > 1");
        assert!(peak.r_initial > 1.0);
        assert!(
            peak.agreement_gap.unwrap() <= 2.0 * peak.record_interval,
            "{peak:?}"
        );
        assert!(tau > 0.0);
    }

    #[test]
    fn subcritical_start_has_no_peak() {
        // R(0) = (s + √(s² + 4s))/2 < 1 iff s(0) < 1/2
        let p = golden();
        let traj = run(0.45, 0.05, 0.1);
        let peak = find_global_peak(&traj, &p).unwrap();
        assert!(peak.decay_regime);
        assert_eq!(peak.tau_p, None);
        let trace = weighted_average_trace(&traj, &p, 0.0).unwrap();
        assert!(trace.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn equilibrium_classes() {
        let p = golden();
        let healthy = State::healthy(DVector::from_element(1, 0.3), 1);
        assert_eq!(
            classify_equilibrium(&p, &healthy, 1e-3),
            Equilibrium::Healthy
        );
        let traj = run(0.95, 0.05, 0.1);
        assert_eq!(
            classify_equilibrium(&p, traj.last().unwrap(), 1e-3),
            Equilibrium::Healthy
        );
        let mid = &traj.states[traj.len() / 20];
        assert_eq!(
            classify_equilibrium(&p, mid, 1e-3),
            Equilibrium::NotAtEquilibrium
        );
    }

    #[test]
    fn corrupted_sample_breaks_the_box() {
        let mut traj = run(0.95, 0.05, 0.1);
        let k = traj.len() / 3;
        traj.states[k].x[0] = -traj.states[k].x[0];
        let reports = run_theorem_suite(&traj, &golden());
        let l1 = reports.iter().find(|r| r.claim == "L1").unwrap();
        assert_eq!(l1.verdict, Verdict::Violated);
        assert_eq!(l1.witnesses.len(), 1);
        assert_eq!(l1.witnesses[0].time, traj.times[k]);
    }

    #[test]
    fn annotate_records_requested_traces() {
        let p = golden();
        let mut traj = run(0.95, 0.05, 0.1);
        let metrics = sample_metrics(&traj, &p).unwrap();
        annotate(&mut traj, &p, &metrics, &[Record::R, Record::Lern], None).unwrap();
        let keys: Vec<_> = traj.scalars.keys().cloned().collect();
        assert_eq!(keys, vec!["R", "lern_1", "lern_2"]);
        annotate(
            &mut traj,
            &p,
            &metrics,
            &[Record::LambdaMax, Record::Wavg],
            None,
        )
        .unwrap();
        let r = traj.scalar("R").unwrap();
        let lam = traj.scalar("lambda_max").unwrap();
        for (r, l) in r.iter().zip(lam) {
            if (r - 1.0).abs() > 1e-6 {
                assert_eq!(*r > 1.0, *l > 0.0);
            }
        }
    }

    #[test]
    fn multiple_r_crossings_are_an_integrity_error() {
        let p = golden();
        let mut traj = run(0.95, 0.05, 0.1);
        let mut r = vec![1.5; traj.len()];
        r[10] = 0.5;
        traj.scalars.insert("R".into(), r);
        assert!(matches!(
            find_global_peak(&traj, &p),
            Err(AnalysisError::MultipleCrossings { count: 2, .. })
        ));
    }
}
