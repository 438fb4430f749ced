//! Trajectory files and run artifacts.
//!
//! CSV layout: `t,s_1..s_n,x_1..x_n,r_1..r_n,w_1..w_m` followed by whichever
//! derived traces were recorded (`R`, `lambda_max`, `lern_1..`, `wavg`).
//! Numbers carry 12 significant digits; undefined values are empty fields.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::file::scenario_to_json;
use super::run::RunOutput;
use super::ScenarioError;
use crate::integrator::Trajectory;
use crate::model::State;
use crate::reproduction::reproduction_matrix;

pub const TRAJECTORY_CSV: &str = "trajectory.csv";
pub const TRAJECTORY_JSON: &str = "trajectory.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajectoryFormat {
    #[default]
    Csv,
    Json,
}

impl TrajectoryFormat {
    pub fn file_name(self) -> &'static str {
        match self {
            TrajectoryFormat::Csv => TRAJECTORY_CSV,
            TrajectoryFormat::Json => TRAJECTORY_JSON,
        }
    }

    /// `.json` means JSON, anything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => TrajectoryFormat::Json,
            _ => TrajectoryFormat::Csv,
        }
    }
}

impl FromStr for TrajectoryFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(TrajectoryFormat::Csv),
            "json" => Ok(TrajectoryFormat::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

fn scalar_rank(name: &str) -> (u8, usize, &str) {
    match name {
        "R" => (0, 0, name),
        "lambda_max" => (1, 0, name),
        "wavg" => (3, 0, name),
        _ => match name.strip_prefix("lern_").and_then(|k| k.parse().ok()) {
            Some(k) => (2, k, name),
            None => (4, 0, name),
        },
    }
}

fn scalar_columns(traj: &Trajectory) -> Vec<&str> {
    let mut names: Vec<&str> = traj.scalars.keys().map(String::as_str).collect();
    names.sort_by(|a, b| scalar_rank(a).cmp(&scalar_rank(b)));
    names
}

fn dims(traj: &Trajectory) -> (usize, usize) {
    traj.states.first().map_or((0, 0), |st| (st.n(), st.m()))
}

/// Column names in file order.
pub fn trajectory_columns(traj: &Trajectory) -> Vec<String> {
    let (n, m) = dims(traj);
    let mut cols = vec!["t".to_string()];
    for prefix in ["s", "x", "r"] {
        cols.extend((1..=n).map(|i| format!("{prefix}_{i}")));
    }
    cols.extend((1..=m).map(|j| format!("w_{j}")));
    cols.extend(scalar_columns(traj).into_iter().map(String::from));
    cols
}

fn row(traj: &Trajectory, k: usize, scalars: &[&str]) -> Vec<f64> {
    let st = &traj.states[k];
    let mut out = Vec::with_capacity(1 + 3 * st.n() + st.m() + scalars.len());
    out.push(traj.times[k]);
    out.extend(st.s.iter().chain(&st.x).chain(&st.r).chain(&st.w).copied());
    out.extend(scalars.iter().map(|name| traj.scalars[*name][k]));
    out
}

pub fn trajectory_to_csv(traj: &Trajectory) -> String {
    let scalars = scalar_columns(traj);
    let mut out = trajectory_columns(traj).join(",");
    out.push('\n');
    for k in 0..traj.len() {
        for (i, v) in row(traj, k, &scalars).into_iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            if v.is_finite() {
                write!(out, "{v:.11e}").expect("write to string");
            }
        }
        out.push('\n');
    }
    out
}

pub fn trajectory_to_json(traj: &Trajectory) -> String {
    let scalars = scalar_columns(traj);
    let rows: Vec<Vec<Option<f64>>> = (0..traj.len())
        .map(|k| {
            row(traj, k, &scalars)
                .into_iter()
                .map(|v| v.is_finite().then_some(v))
                .collect()
        })
        .collect();
    let mut text = serde_json::to_string(&json!({
        "columns": trajectory_columns(traj),
        "rows": rows,
    }))
    .expect("trajectory serializes");
    text.push('\n');
    text
}

fn from_table(
    path: &Path,
    columns: &[String],
    rows: Vec<(usize, Vec<f64>)>,
) -> Result<Trajectory, ScenarioError> {
    let bad = |line: usize, message: String| ScenarioError::Format {
        path: path.to_path_buf(),
        line,
        message,
    };
    if columns.first().map(String::as_str) != Some("t") {
        return Err(bad(1, "first column must be `t`".into()));
    }
    let count = |prefix: &str| {
        columns
            .iter()
            .filter(|c| {
                c.strip_prefix(prefix)
                    .is_some_and(|k| k.parse::<usize>().is_ok())
            })
            .count()
    };
    let n = count("s_");
    let m = count("w_");
    if n == 0 || count("x_") != n || count("r_") != n {
        return Err(bad(
            1,
            format!("expected matching s_, x_, r_ columns (found {n} s_)"),
        ));
    }
    let expected = trajectory_columns(&Trajectory {
        times: vec![0.0],
        states: vec![State::healthy(DVector::zeros(n), m)],
        ..Default::default()
    });
    if columns[..expected.len().min(columns.len())] != expected[..] {
        return Err(bad(
            1,
            format!("state columns must be {}", expected.join(",")),
        ));
    }
    let scalar_names = &columns[expected.len()..];

    let mut traj = Trajectory::default();
    for name in scalar_names {
        traj.scalars
            .insert(name.clone(), Vec::with_capacity(rows.len()));
    }
    for (line, values) in rows {
        if values.len() != columns.len() {
            return Err(bad(
                line,
                format!("{} fields, expected {}", values.len(), columns.len()),
            ));
        }
        if values[..expected.len()].iter().any(|v| !v.is_finite()) {
            return Err(bad(line, "state fields must be present and finite".into()));
        }
        let slice = |a: usize, len: usize| DVector::from_column_slice(&values[a..a + len]);
        let t = values[0];
        let state = State::new(
            t,
            slice(1, n),
            slice(1 + n, n),
            slice(1 + 2 * n, n),
            slice(1 + 3 * n, m),
        )
        .map_err(|e| bad(line, e.to_string()))?;
        traj.times.push(t);
        traj.states.push(state);
        for (name, v) in scalar_names.iter().zip(&values[expected.len()..]) {
            traj.scalars.get_mut(name).expect("inserted").push(*v);
        }
    }
    Ok(traj)
}

/// `path` only labels errors.
pub fn trajectory_from_csv(text: &str, path: &Path) -> Result<Trajectory, ScenarioError> {
    let mut lines = text.lines().enumerate();
    let columns: Vec<String> = match lines.next() {
        Some((_, header)) => header.split(',').map(|c| c.trim().to_string()).collect(),
        None => {
            return Err(ScenarioError::Format {
                path: path.to_path_buf(),
                line: 1,
                message: "empty file".into(),
            })
        }
    };
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let values = line
            .split(',')
            .map(|f| match f.trim() {
                "" => Ok(f64::NAN),
                v => v.parse::<f64>(),
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ScenarioError::Format {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
        rows.push((i + 1, values));
    }
    from_table(path, &columns, rows)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonTable {
    columns: Vec<String>,
    rows: Vec<Vec<Option<f64>>>,
}

pub fn trajectory_from_json(text: &str, path: &Path) -> Result<Trajectory, ScenarioError> {
    let table: JsonTable = serde_json::from_str(text).map_err(|e| ScenarioError::Format {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })?;
    // "line" is the row number here, with the header as line 1.
    let rows = table
        .rows
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            (
                i + 2,
                r.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect(),
            )
        })
        .collect();
    from_table(path, &table.columns, rows)
}

fn write_file(path: &Path, contents: &str) -> Result<(), ScenarioError> {
    std::fs::write(path, contents).map_err(|e| ScenarioError::io(path, e))
}

pub fn export_trajectory(
    traj: &Trajectory,
    path: &Path,
    format: TrajectoryFormat,
) -> Result<(), ScenarioError> {
    let text = match format {
        TrajectoryFormat::Csv => trajectory_to_csv(traj),
        TrajectoryFormat::Json => trajectory_to_json(traj),
    };
    write_file(path, &text)
}

/// Reads a trajectory; the format follows the file extension.
pub fn import_trajectory(path: &Path) -> Result<Trajectory, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::io(path, e))?;
    match TrajectoryFormat::from_path(path) {
        TrajectoryFormat::Csv => trajectory_from_csv(&text, path),
        TrajectoryFormat::Json => trajectory_from_json(&text, path),
    }
}

/// Files written by [`export_run`], in write order.
#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
}

fn pretty(value: &impl Serialize) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    text
}

fn reproduction_json(run: &RunOutput) -> Value {
    let traj = &run.trajectory;
    let samples: Vec<Value> = run
        .metrics
        .iter()
        .map(|m| {
            json!({
                "t": m.t,
                "global_r": m.global_r,
                "lambda_max": m.lambda_max,
                "lern": m.lern,
                "drn_defined": m.lern.iter().map(Option::is_some).collect::<Vec<_>>(),
            })
        })
        .collect();
    let mut picks = vec![("initial", 0)];
    if let Some(tau) = run.peak.as_ref().and_then(|p| p.tau_p) {
        let k = traj
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1 - tau)
                    .abs()
                    .partial_cmp(&(b.1 - tau).abs())
                    .unwrap_or(Ordering::Equal)
            })
            .map_or(0, |(k, _)| k);
        picks.push(("peak", k));
    }
    if !traj.is_empty() {
        picks.push(("final", traj.len() - 1));
    }
    let matrices: Vec<Value> = picks
        .into_iter()
        .filter(|_| !traj.is_empty())
        .map(|(label, k)| {
            let mat = reproduction_matrix(&run.scenario.params, &traj.states[k].s);
            let rows: Vec<Vec<f64>> = mat
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect();
            json!({ "label": label, "t": traj.times[k], "matrix": rows })
        })
        .collect();
    json!({ "samples": samples, "matrices": matrices })
}

/// Writes every artifact of a run into `dir` (created if needed). Output is
/// byte-identical for identical runs.
pub fn export_run(
    run: &RunOutput,
    dir: &Path,
    format: TrajectoryFormat,
) -> Result<RunArtifacts, ScenarioError> {
    std::fs::create_dir_all(dir).map_err(|e| ScenarioError::io(dir, e))?;
    let scenario_text = scenario_to_json(&run.scenario);
    let traj_text = match format {
        TrajectoryFormat::Csv => trajectory_to_csv(&run.trajectory),
        TrajectoryFormat::Json => trajectory_to_json(&run.trajectory),
    };
    let peak = match (&run.peak, &run.peak_error) {
        (Some(p), _) => serde_json::to_value(p).expect("peak serializes"),
        (None, err) => json!({ "error": err }),
    };
    let contents = [
        ("scenario.json", scenario_text.clone()),
        (format.file_name(), traj_text),
        ("reproduction.json", pretty(&reproduction_json(run))),
        ("theorems.json", pretty(&run.theorems)),
        ("peak.json", pretty(&peak)),
    ];

    let mut files = Vec::new();
    let mut hashes = Vec::new();
    for (name, text) in &contents {
        let path = dir.join(name);
        write_file(&path, text)?;
        hashes.push(json!({ "name": name, "sha256": hex::encode(Sha256::digest(text)) }));
        files.push(path);
    }
    let manifest = json!({
        "tool": "sirnet",
        "version": env!("CARGO_PKG_VERSION"),
        "seed": run.scenario.seed,
        "spec_hash": hex::encode(Sha256::digest(&scenario_text)),
        "files": hashes,
    });
    let path = dir.join("manifest.json");
    write_file(&path, &pretty(&manifest))?;
    files.push(path);
    Ok(RunArtifacts {
        dir: dir.to_path_buf(),
        files,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Trajectory {
        let st = |t: f64, x: f64| {
            State::new(
                t,
                DVector::from_vec(vec![1.0 - x, 0.5]),
                DVector::from_vec(vec![x, 0.25]),
                DVector::from_vec(vec![0.0, 0.25]),
                DVector::from_vec(vec![0.1 / 3.0]),
            )
            .unwrap()
        };
        let mut traj = Trajectory {
            times: vec![0.0, 0.01],
            states: vec![st(0.0, 0.05), st(0.01, 0.049_999_999_999_7)],
            ..Default::default()
        };
        traj.scalars.insert("wavg".into(), vec![0.1, 0.2]);
        traj.scalars.insert("lern_10".into(), vec![1.0, 2.0]);
        traj.scalars.insert("lern_2".into(), vec![f64::NAN, 2.0]);
        traj.scalars.insert("R".into(), vec![1.5, 1.4]);
        traj
    }

    #[test]
    fn column_order() {
        assert_eq!(
            trajectory_columns(&sample()).join(","),
            "t,s_1,s_2,x_1,x_2,r_1,r_2,w_1,R,lern_2,lern_10,wavg"
        );
    }

    #[test]
    fn csv_round_trip() {
        let traj = sample();
        let text = trajectory_to_csv(&traj);
        assert!(text
            .lines()
            .nth(1)
            .unwrap()
            .contains("1.50000000000e0,,1.00000000000e0"));
        let back = trajectory_from_csv(&text, Path::new("x.csv")).unwrap();
        assert_eq!(back.len(), 2);
        assert!(back.scalars["lern_2"][0].is_nan());
        for (a, b) in traj.states.iter().zip(&back.states) {
            for (u, v) in a.z().iter().zip(b.z().iter()) {
                assert!((u - v).abs() <= 5e-12 * u.abs());
            }
        }
        assert_eq!(trajectory_to_csv(&back), text);
    }

    #[test]
    fn json_round_trip() {
        let traj = sample();
        let back = trajectory_from_json(&trajectory_to_json(&traj), Path::new("x.json")).unwrap();
        assert_eq!(back.times, traj.times);
        assert_eq!(back.states, traj.states);
        assert!(back.scalars["lern_2"][0].is_nan());
        assert_eq!(back.scalars["R"], traj.scalars["R"]);
    }

    #[test]
    fn malformed_csv_reports_line() {
        let text = trajectory_to_csv(&sample()).replace("1.40000000000e0", "abc");
        match trajectory_from_csv(&text, Path::new("x.csv")) {
            Err(ScenarioError::Format { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let short = "t,s_1,x_1,r_1\n0,1,0\n";
        assert!(matches!(
            trajectory_from_csv(short, Path::new("x.csv")),
            Err(ScenarioError::Format { line: 2, .. })
        ));
        assert!(trajectory_from_csv("s_1,t\n", Path::new("x.csv")).is_err());
    }
}
