//! Fixed-step RK4 integration with positivity clamping, trajectory
//! recording, and threshold-crossing detection.

use std::collections::BTreeMap;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{derivative, ModelParams, State, ValidationReport};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrationError {
    #[error("invalid integration settings: {0}")]
    Settings(String),
    #[error("parameters violate model assumptions ({0})")]
    InvalidParams(ValidationReport),
    #[error("initial state dimensions do not match the model (n={n}, m={m})")]
    Dimension { n: usize, m: usize },
    #[error("initial state invalid: {0}")]
    InitialState(String),
    #[error(
        "step {step} (t={time}): {component} = {value:e} exceeds clamp tolerance; try a smaller dt"
    )]
    InvariantViolation {
        step: usize,
        time: f64,
        component: String,
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrajectoryError {
    #[error("quantity `{0}` is not recorded on this trajectory")]
    UnknownQuantity(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationSettings {
    pub dt: f64,
    pub t_end: f64,
    pub record_every: usize,
    pub clamp_tolerance: f64,
    /// Keep integrating in blocks of `t_end` until `‖z‖∞` falls below this
    /// level (or `max_t_end` is reached).
    pub extend_until: Option<f64>,
    pub max_t_end: f64,
}

impl Default for IntegrationSettings {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 15.0,
            record_every: 10,
            clamp_tolerance: 1e-9,
            extend_until: Some(1e-3),
            max_t_end: 200.0,
        }
    }
}

impl IntegrationSettings {
    pub fn validate(&self) -> Result<(), IntegrationError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(IntegrationError::Settings(format!(
                "dt must be > 0, got {}",
                self.dt
            )));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(IntegrationError::Settings(format!(
                "t_end must be > 0, got {}",
                self.t_end
            )));
        }
        if self.record_every == 0 {
            return Err(IntegrationError::Settings(
                "record_every must be >= 1".into(),
            ));
        }
        if self.clamp_tolerance.is_nan() || self.clamp_tolerance < 0.0 {
            return Err(IntegrationError::Settings(
                "clamp_tolerance must be >= 0".into(),
            ));
        }
        if self.t_end < self.dt {
            return Err(IntegrationError::Settings(
                "t_end must be at least one step".into(),
            ));
        }
        Ok(())
    }

    /// Time between recorded samples.
    pub fn record_interval(&self) -> f64 {
        self.dt * self.record_every as f64
    }
}

/// Recorded sample path.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    /// Per-sample derived values keyed by name; `NaN` marks undefined.
    pub scalars: BTreeMap<String, Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn scalar(&self, name: &str) -> Result<&[f64], TrajectoryError> {
        self.scalars
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| TrajectoryError::UnknownQuantity(name.to_string()))
    }

    pub fn last(&self) -> Option<&State> {
        self.states.last()
    }

    /// Largest gap between consecutive samples.
    pub fn max_interval(&self) -> f64 {
        self.times
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Index of the last sample with `times[k] <= t` (clamped to the span).
    pub fn sample_at_or_before(&self, t: f64) -> usize {
        match self.times.partition_point(|&ti| ti <= t) {
            0 => 0,
            k => k - 1,
        }
    }

    /// Susceptible vector at `t`, linearly interpolated between samples.
    pub fn susceptible_at(&self, t: f64) -> DVector<f64> {
        let k = self.sample_at_or_before(t);
        if k + 1 >= self.len() || t <= self.times[k] {
            return self.states[k].s.clone();
        }
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let frac = (t - t0) / (t1 - t0);
        self.states[k].s.lerp(&self.states[k + 1].s, frac)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Downward,
    Upward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingEvent {
    pub quantity: String,
    pub time: f64,
    pub direction: Direction,
    pub level: f64,
}

struct Stepper<'a> {
    params: &'a ModelParams,
}

impl Stepper<'_> {
    fn rk4(&self, state: &State, dt: f64) -> State {
        let k1 = derivative(self.params, state);
        let mid1 = advance(state, &k1, 0.5 * dt);
        let k2 = derivative(self.params, &mid1);
        let mid2 = advance(state, &k2, 0.5 * dt);
        let k3 = derivative(self.params, &mid2);
        let end = advance(state, &k3, dt);
        let k4 = derivative(self.params, &end);
        let combine = |a: &DVector<f64>, b: &DVector<f64>, c: &DVector<f64>, d: &DVector<f64>| {
            (a + b * 2.0 + c * 2.0 + d) * (dt / 6.0)
        };
        State {
            t: state.t + dt,
            s: &state.s + combine(&k1.ds, &k2.ds, &k3.ds, &k4.ds),
            x: &state.x + combine(&k1.dx, &k2.dx, &k3.dx, &k4.dx),
            r: &state.r + combine(&k1.dr, &k2.dr, &k3.dr, &k4.dr),
            w: &state.w + combine(&k1.dw, &k2.dw, &k3.dw, &k4.dw),
        }
    }
}

fn advance(state: &State, d: &crate::model::StateDerivative, h: f64) -> State {
    State {
        t: state.t + h,
        s: &state.s + &d.ds * h,
        x: &state.x + &d.dx * h,
        r: &state.r + &d.dr * h,
        w: &state.w + &d.dw * h,
    }
}

/// Clamps noise-level negatives and renormalizes each group onto the simplex.
fn repair(state: &mut State, tol: f64, step: usize) -> Result<(), IntegrationError> {
    let time = state.t;
    let fail = |component: String, value: f64| IntegrationError::InvariantViolation {
        step,
        time,
        component,
        value,
    };
    for i in 0..state.n() {
        for (name, v) in [
            ("s", &mut state.s[i]),
            ("x", &mut state.x[i]),
            ("r", &mut state.r[i]),
        ] {
            if !v.is_finite() || *v < -tol || *v > 1.0 + tol {
                let value = *v;
                return Err(fail(format!("{name}_{}", i + 1), value));
            }
            *v = v.max(0.0);
        }
        let total = state.s[i] + state.x[i] + state.r[i];
        if (total - 1.0).abs() > tol.max(1e-12) * 1e3 {
            return Err(fail(format!("s_{0}+x_{0}+r_{0}", i + 1), total));
        }
        state.s[i] /= total;
        state.x[i] /= total;
        state.r[i] /= total;
    }
    for j in 0..state.m() {
        let v = state.w[j];
        if !v.is_finite() || v < -tol {
            return Err(fail(format!("w_{}", j + 1), v));
        }
        state.w[j] = v.max(0.0);
    }
    Ok(())
}

/// Integrates from `initial` with fixed-step RK4.
///
/// Samples are recorded at step indices that are multiples of
/// `record_every` and at the final step. Times are `k·dt` (not accumulated).
pub fn simulate(
    params: &ModelParams,
    initial: &State,
    settings: &IntegrationSettings,
) -> Result<Trajectory, IntegrationError> {
    settings.validate()?;
    let report = params.validate();
    if !report.is_valid() {
        return Err(IntegrationError::InvalidParams(report));
    }
    if initial.n() != params.n() || initial.m() != params.m() {
        return Err(IntegrationError::Dimension {
            n: params.n(),
            m: params.m(),
        });
    }
    initial
        .check(settings.clamp_tolerance.max(1e-9))
        .map_err(IntegrationError::InitialState)?;

    let stepper = Stepper { params };
    let dt = settings.dt;
    let block_steps = (settings.t_end / dt).round() as usize;
    let max_steps = ((settings.max_t_end.max(settings.t_end)) / dt).round() as usize;

    let mut state = initial.clone();
    state.t = 0.0;
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![state.clone()],
        scalars: BTreeMap::new(),
    };

    let mut target = block_steps;
    let mut step = 0;
    loop {
        while step < target {
            let mut next = stepper.rk4(&state, dt);
            step += 1;
            next.t = step as f64 * dt;
            repair(&mut next, settings.clamp_tolerance, step)?;
            state = next;
            if step % settings.record_every == 0 || step == target {
                traj.times.push(state.t);
                traj.states.push(state.clone());
            }
        }
        let done = match settings.extend_until {
            Some(level) => state.z().amax() < level,
            None => true,
        };
        if done || target >= max_steps {
            break;
        }
        // Drop the off-grid sample so recording stays on the regular grid.
        if !target.is_multiple_of(settings.record_every) {
            traj.times.pop();
            traj.states.pop();
        }
        target = (target + block_steps).min(max_steps);
    }
    Ok(traj)
}

/// One event per sign change of `scalar − level` between consecutive
/// samples, located by linear interpolation. Samples exactly at `level`
/// are bridged; `NaN` samples break the trace.
pub fn detect_crossings(
    trajectory: &Trajectory,
    quantity: &str,
    level: f64,
) -> Result<Vec<CrossingEvent>, TrajectoryError> {
    let values = trajectory.scalar(quantity)?;
    Ok(crossings_of(&trajectory.times, values, quantity, level))
}

pub(crate) fn crossings_of(
    times: &[f64],
    values: &[f64],
    quantity: &str,
    level: f64,
) -> Vec<CrossingEvent> {
    let mut events = Vec::new();
    // (time, value − level) of the last sample strictly off the level
    let mut last: Option<(f64, f64)> = None;
    for (&t, &v) in times.iter().zip(values) {
        if v.is_nan() {
            last = None;
            continue;
        }
        let d = v - level;
        if d == 0.0 {
            continue;
        }
        if let Some((t0, d0)) = last {
            if d0.signum() != d.signum() {
                let time = t0 + (t - t0) * d0 / (d0 - d);
                events.push(CrossingEvent {
                    quantity: quantity.to_string(),
                    time,
                    direction: if d < 0.0 {
                        Direction::Downward
                    } else {
                        Direction::Upward
                    },
                    level,
                });
            }
        }
        last = Some((t, d));
    }
    events
}
