//! Scenario file schema (JSON).
//!
//! Either explicit parameters:
//!
//! ```json
//! { "n": 1, "m": 1, "beta": [[1.0]], "beta_w": [[1.0]], "c_w": [[1.0]],
//!   "alpha": [[0.0]], "gamma": [1.0], "gamma_w": [1.0],
//!   "s0": [0.95], "x0": [0.05], "w0": [0.1],
//!   "dt": 0.001, "t_end": 15.0, "record_every": 10, "record": ["R", "wavg"] }
//! ```
//!
//! or a generator block replacing everything from `n` to `w0`:
//!
//! ```json
//! { "generate": { "seed": 7, "intervals": { "alpha": [0.0, 1.0] } }, "t_end": 20.0 }
//! ```
//!
//! Matrices are row-major nested arrays.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::generate::{generate_scenario, GeneratorSpec};
use super::{Scenario, ScenarioError};
use crate::analysis::Record;
use crate::integrator::IntegrationSettings;
use crate::model::{ModelParams, State};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateBlock {
    pub seed: u64,
    #[serde(flatten)]
    pub spec: GeneratorSpec,
}

/// On-disk form of a [`Scenario`]. Every field is optional at parse time so
/// that errors can name the missing one.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generate: Option<GenerateBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_w: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_w: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_w: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s0: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w0: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record_every: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clamp_tolerance: Option<f64>,
    /// Extend the horizon until `‖z‖∞ < 1e-3` (default true).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auto_extend: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wavg_anchor: Option<f64>,
}

fn required<T>(value: Option<T>, field: &str) -> Result<T, ScenarioError> {
    value.ok_or_else(|| ScenarioError::field(field, "missing"))
}

fn matrix(
    rows: Vec<Vec<f64>>,
    field: &str,
    nrows: usize,
    ncols: usize,
) -> Result<DMatrix<f64>, ScenarioError> {
    if rows.len() != nrows {
        return Err(ScenarioError::field(
            field,
            format!("expected {nrows} rows, got {}", rows.len()),
        ));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(ScenarioError::field(
                field,
                format!("row {} has {} entries, expected {ncols}", i + 1, row.len()),
            ));
        }
        if let Some(v) = row.iter().find(|v| !v.is_finite()) {
            return Err(ScenarioError::field(field, format!("non-finite entry {v}")));
        }
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(DMatrix::from_row_slice(nrows, ncols, &flat))
}

fn vector(values: Vec<f64>, field: &str, len: usize) -> Result<DVector<f64>, ScenarioError> {
    if values.len() != len {
        return Err(ScenarioError::field(
            field,
            format!("expected {len} entries, got {}", values.len()),
        ));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(ScenarioError::field(field, format!("non-finite entry {v}")));
    }
    Ok(DVector::from_vec(values))
}

fn rows_of(mat: &DMatrix<f64>) -> Vec<Vec<f64>> {
    mat.row_iter()
        .map(|r| r.iter().copied().collect())
        .collect()
}

impl ScenarioFile {
    /// Resolves into a [`Scenario`], generating parameters when a `generate`
    /// block is present. Parameters must satisfy the model assumptions.
    pub fn into_scenario(self) -> Result<Scenario, ScenarioError> {
        let mut scenario = match self.generate {
            Some(block) => {
                for (present, field) in [
                    (self.n.is_some(), "n"),
                    (self.m.is_some(), "m"),
                    (self.beta.is_some(), "beta"),
                    (self.beta_w.is_some(), "beta_w"),
                    (self.c_w.is_some(), "c_w"),
                    (self.alpha.is_some(), "alpha"),
                    (self.gamma.is_some(), "gamma"),
                    (self.gamma_w.is_some(), "gamma_w"),
                    (self.s0.is_some(), "s0"),
                    (self.x0.is_some(), "x0"),
                    (self.w0.is_some(), "w0"),
                ] {
                    if present {
                        return Err(ScenarioError::field(
                            field,
                            "not allowed together with `generate`",
                        ));
                    }
                }
                generate_scenario(&block.spec, block.seed)?
            }
            None => {
                let beta_rows = required(self.beta, "beta")?;
                let alpha_rows = required(self.alpha, "alpha")?;
                let n = self.n.unwrap_or(beta_rows.len());
                let m = self.m.unwrap_or(alpha_rows.len());
                if n == 0 {
                    return Err(ScenarioError::field("n", "must be at least 1"));
                }
                if m == 0 {
                    return Err(ScenarioError::field("m", "must be at least 1"));
                }
                let beta = matrix(beta_rows, "beta", n, n)?;
                let alpha = matrix(alpha_rows, "alpha", m, m)?;
                let beta_w = matrix(required(self.beta_w, "beta_w")?, "beta_w", n, m)?;
                let c_w = matrix(required(self.c_w, "c_w")?, "c_w", m, n)?;
                let gamma = vector(required(self.gamma, "gamma")?, "gamma", n)?;
                let gamma_w = vector(required(self.gamma_w, "gamma_w")?, "gamma_w", m)?;
                let s0 = vector(required(self.s0, "s0")?, "s0", n)?;
                let x0 = vector(required(self.x0, "x0")?, "x0", n)?;
                let w0 = vector(required(self.w0, "w0")?, "w0", m)?;
                let params = ModelParams::new(beta, beta_w, c_w, alpha, gamma, gamma_w)?;
                let report = params.validate();
                if !report.is_valid() {
                    return Err(ScenarioError::Invalid(report));
                }
                let initial = State::initial(s0, x0, w0)
                    .map_err(|e| ScenarioError::field("s0/x0/w0", e.to_string()))?;
                Scenario::new(params, initial)
            }
        };

        let defaults = IntegrationSettings::default();
        let settings = &mut scenario.settings;
        settings.dt = self.dt.unwrap_or(defaults.dt);
        settings.t_end = self.t_end.unwrap_or(defaults.t_end);
        settings.record_every = self.record_every.unwrap_or(defaults.record_every);
        settings.clamp_tolerance = self.clamp_tolerance.unwrap_or(defaults.clamp_tolerance);
        if self.auto_extend == Some(false) {
            settings.extend_until = None;
        }
        settings
            .validate()
            .map_err(|e| ScenarioError::field("dt/t_end/record_every", e.to_string()))?;
        if let Some(names) = self.record {
            let mut record = Vec::with_capacity(names.len());
            for name in names {
                let r: Record = name
                    .parse()
                    .map_err(|e: String| ScenarioError::field("record", e))?;
                if !record.contains(&r) {
                    record.push(r);
                }
            }
            record.sort();
            scenario.record = record;
        }
        scenario.wavg_anchor = self.wavg_anchor;
        Ok(scenario)
    }

    /// Explicit form of a scenario (generated parameters written out).
    pub fn from_scenario(scenario: &Scenario) -> Self {
        let p = &scenario.params;
        let st = &scenario.initial;
        let s = &scenario.settings;
        Self {
            generate: None,
            n: Some(p.n()),
            m: Some(p.m()),
            beta: Some(rows_of(p.beta())),
            beta_w: Some(rows_of(p.beta_w())),
            c_w: Some(rows_of(p.c_w())),
            alpha: Some(rows_of(p.alpha())),
            gamma: Some(p.gamma().iter().copied().collect()),
            gamma_w: Some(p.gamma_w().iter().copied().collect()),
            s0: Some(st.s.iter().copied().collect()),
            x0: Some(st.x.iter().copied().collect()),
            w0: Some(st.w.iter().copied().collect()),
            dt: Some(s.dt),
            t_end: Some(s.t_end),
            record_every: Some(s.record_every),
            record: Some(
                scenario
                    .record
                    .iter()
                    .map(|r| r.name().to_string())
                    .collect(),
            ),
            clamp_tolerance: Some(s.clamp_tolerance),
            auto_extend: Some(s.extend_until.is_some()),
            wavg_anchor: scenario.wavg_anchor,
        }
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile =
        serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    file.into_scenario()
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::io(path, e))?;
    parse_scenario(&text)
}

/// Pretty JSON of the explicit scenario, newline-terminated.
pub fn scenario_to_json(scenario: &Scenario) -> String {
    let mut text = serde_json::to_string_pretty(&ScenarioFile::from_scenario(scenario))
        .expect("scenario serializes");
    text.push('\n');
    text
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Violation;

    const SCALAR: &str = r#"{
        "n": 1, "m": 1,
        "beta": [[1.0]], "beta_w": [[1.0]], "c_w": [[1.0]], "alpha": [[0.0]],
        "gamma": [1.0], "gamma_w": [1.0],
        "s0": [0.95], "x0": [0.05], "w0": [0.1],
        "dt": 0.01, "t_end": 5.0, "record_every": 10, "record": ["wavg", "R"]
    }"#;

    #[test]
    fn explicit_scenario() {
        let sc = parse_scenario(SCALAR).unwrap();
        assert_eq!(sc.params.n(), 1);
        assert_eq!(sc.settings.dt, 0.01);
        assert_eq!(sc.record, vec![Record::R, Record::Wavg]);
        assert_eq!(sc.seed, None);
    }

    #[test]
    fn explicit_round_trip() {
        let sc = parse_scenario(SCALAR).unwrap();
        let again = parse_scenario(&scenario_to_json(&sc)).unwrap();
        assert_eq!(sc, again);
    }

    #[test]
    fn generated_scenario_block() {
        let sc = parse_scenario(r#"{"generate": {"seed": 9, "m": 3}, "t_end": 20.0}"#).unwrap();
        assert_eq!(sc.seed, Some(9));
        assert_eq!((sc.params.n(), sc.params.m()), (10, 3));
        assert_eq!(sc.settings.t_end, 20.0);
        // Written out explicitly, the generated parameters reproduce exactly.
        let explicit = parse_scenario(&scenario_to_json(&sc)).unwrap();
        assert_eq!(explicit.params, sc.params);
        assert_eq!(explicit.initial, sc.initial);
    }

    #[test]
    fn errors_name_the_field() {
        let missing = SCALAR.replace(r#""gamma": [1.0], "#, "");
        let err = parse_scenario(&missing).unwrap_err().to_string();
        assert!(err.contains("`gamma`"), "{err}");

        let ragged = SCALAR.replace(r#""beta_w": [[1.0]]"#, r#""beta_w": [[1.0, 2.0]]"#);
        let err = parse_scenario(&ragged).unwrap_err().to_string();
        assert!(err.contains("`beta_w`"), "{err}");

        let typo = SCALAR.replace(r#""gamma_w""#, r#""gama_w""#);
        let err = parse_scenario(&typo).unwrap_err().to_string();
        assert!(err.contains("gama_w"), "{err}");

        let record = SCALAR.replace(r#""wavg", "R""#, r#""Rt""#);
        let err = parse_scenario(&record).unwrap_err().to_string();
        assert!(err.contains("`record`"), "{err}");
    }

    #[test]
    fn invalid_parameters_are_listed() {
        let bad = SCALAR.replace(r#""gamma": [1.0]"#, r#""gamma": [0.0]"#);
        match parse_scenario(&bad) {
            Err(ScenarioError::Invalid(report)) => {
                assert!(report.contains(Violation::GammaPositivity))
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
