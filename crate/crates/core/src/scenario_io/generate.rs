//! Seeded random scenarios.
//!
//! Each quantity draws from its own ChaCha8 stream of the generator seeded
//! with `seed`: stream `8·attempt + q`, with `q` = 0 for `B`, 1 for `B_w`,
//! 2 for `α`, 3 for `γ`, 4 for `γ^w`, 5 for `w(0)`. Matrices are filled
//! row-major. A draw is `lo + (hi − lo)·u` with `u` uniform on `[0, 1)`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Scenario, ScenarioError};
use crate::model::{ModelParams, State};

/// Attempts before giving up on drawing a valid parameter set.
pub const MAX_ATTEMPTS: usize = 16;

/// Closed interval `[lo, hi]`, written as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self, String> {
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(format!("interval [{lo}, {hi}] is not finite"));
        }
        if lo > hi {
            return Err(format!("interval [{lo}, {hi}] is empty"));
        }
        Ok(Self { lo, hi })
    }

    pub const fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let u: f64 = rng.gen();
        self.lo + (self.hi - self.lo) * u
    }
}

impl TryFrom<[f64; 2]> for Interval {
    type Error = String;

    fn try_from(v: [f64; 2]) -> Result<Self, Self::Error> {
        Interval::new(v[0], v[1])
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.lo, i.hi]
    }
}

/// Sampling intervals for every random quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Intervals {
    pub gamma: Interval,
    pub gamma_w: Interval,
    pub beta: Interval,
    pub beta_w: Interval,
    pub alpha: Interval,
    pub w0: Interval,
}

impl Default for Intervals {
    fn default() -> Self {
        Self {
            gamma: Interval { lo: 1.0, hi: 3.0 },
            gamma_w: Interval { lo: 0.6, hi: 0.75 },
            beta: Interval {
                lo: 0.01,
                hi: 0.338,
            },
            beta_w: Interval { lo: 0.01, hi: 0.2 },
            alpha: Interval { lo: 0.0, hi: 2.0 },
            w0: Interval { lo: 0.0, hi: 1.0 },
        }
    }
}

/// Generator description. Defaults: 10 population nodes, 5 resources,
/// `s(0) = 0.95`, `r(0) = 0`, `C_w = B_wᵀ − 0.01`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSpec {
    pub n: usize,
    pub m: usize,
    pub s0: f64,
    pub c_w_offset: f64,
    pub intervals: Intervals,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self {
            n: 10,
            m: 5,
            s0: 0.95,
            c_w_offset: 0.01,
            intervals: Intervals::default(),
        }
    }
}

impl GeneratorSpec {
    fn check(&self) -> Result<(), ScenarioError> {
        if self.n == 0 || self.m == 0 {
            return Err(ScenarioError::field(
                "generate",
                "n and m must be at least 1",
            ));
        }
        if !(0.0..=1.0).contains(&self.s0) {
            return Err(ScenarioError::field("generate.s0", "must lie in [0, 1]"));
        }
        let iv = &self.intervals;
        for (name, interval) in [
            ("gamma", iv.gamma),
            ("gamma_w", iv.gamma_w),
            ("beta", iv.beta),
            ("beta_w", iv.beta_w),
            ("alpha", iv.alpha),
            ("w0", iv.w0),
        ] {
            if interval.lo < 0.0 {
                return Err(ScenarioError::field(
                    format!("generate.intervals.{name}"),
                    "lower bound must be nonnegative",
                ));
            }
        }
        Ok(())
    }
}

const STREAMS_PER_ATTEMPT: u64 = 8;

fn stream(seed: u64, attempt: usize, quantity: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STREAMS_PER_ATTEMPT * attempt as u64 + quantity);
    rng
}

fn draw_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, iv: Interval) -> DMatrix<f64> {
    let data: Vec<f64> = (0..rows * cols).map(|_| iv.sample(rng)).collect();
    DMatrix::from_row_slice(rows, cols, &data)
}

fn draw_vector(rng: &mut ChaCha8Rng, len: usize, iv: Interval) -> DVector<f64> {
    DVector::from_iterator(len, (0..len).map(|_| iv.sample(rng)))
}

/// Draws a scenario; identical `(spec, seed)` always gives the same result.
/// Self-flows `α_jj` are zero and not drawn.
pub fn generate_scenario(spec: &GeneratorSpec, seed: u64) -> Result<Scenario, ScenarioError> {
    spec.check()?;
    let (n, m) = (spec.n, spec.m);
    let iv = &spec.intervals;
    let mut last = None;
    for attempt in 0..MAX_ATTEMPTS {
        let beta = draw_matrix(&mut stream(seed, attempt, 0), n, n, iv.beta);
        let beta_w = draw_matrix(&mut stream(seed, attempt, 1), n, m, iv.beta_w);
        let mut alpha = DMatrix::zeros(m, m);
        let mut rng = stream(seed, attempt, 2);
        for j in 0..m {
            for k in 0..m {
                if j != k {
                    alpha[(j, k)] = iv.alpha.sample(&mut rng);
                }
            }
        }
        let gamma = draw_vector(&mut stream(seed, attempt, 3), n, iv.gamma);
        let gamma_w = draw_vector(&mut stream(seed, attempt, 4), m, iv.gamma_w);
        let w0 = draw_vector(&mut stream(seed, attempt, 5), m, iv.w0);
        let c_w = beta_w.transpose().add_scalar(-spec.c_w_offset);

        let params = ModelParams::new(beta, beta_w, c_w, alpha, gamma, gamma_w)?;
        let report = params.validate();
        if report.is_valid() {
            let initial = State::initial(
                DVector::from_element(n, spec.s0),
                DVector::from_element(n, 1.0 - spec.s0),
                w0,
            )?;
            let mut scenario = Scenario::new(params, initial);
            scenario.seed = Some(seed);
            scenario.generator = Some(*spec);
            return Ok(scenario);
        }
        last = Some(report);
    }
    Err(ScenarioError::GenerationExhausted {
        attempts: MAX_ATTEMPTS,
        last: last.expect("at least one attempt"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_draws_lie_in_intervals() {
        let spec = GeneratorSpec::default();
        let iv = spec.intervals;
        for seed in 0..20 {
            let sc = generate_scenario(&spec, seed).unwrap();
            let p = &sc.params;
            assert_eq!((p.n(), p.m()), (10, 5));
            assert!(p.beta().iter().all(|&v| iv.beta.contains(v)));
            assert!(p.beta_w().iter().all(|&v| iv.beta_w.contains(v)));
            assert!(p.gamma().iter().all(|&v| iv.gamma.contains(v)));
            assert!(p.gamma_w().iter().all(|&v| iv.gamma_w.contains(v)));
            for j in 0..5 {
                for k in 0..5 {
                    let a = p.alpha()[(j, k)];
                    if j == k {
                        assert_eq!(a, 0.0);
                    } else {
                        assert!(iv.alpha.contains(a));
                    }
                }
            }
            assert!(p.c_w().iter().all(|&v| v >= 0.0));
            let expected_cw = p.beta_w().transpose().add_scalar(-0.01);
            assert_eq!(p.c_w(), &expected_cw);
            assert!(sc.initial.w.iter().all(|&v| iv.w0.contains(v)));
            assert!(sc.initial.s.iter().all(|&v| v == 0.95));
            assert!(sc.initial.r.iter().all(|&v| v == 0.0));
            assert!(sc.initial.x.iter().all(|&v| (v - 0.05).abs() < 1e-15));
            assert!(p.validate().is_valid());
        }
    }

    #[test]
    fn same_seed_same_scenario() {
        let spec = GeneratorSpec::default();
        assert_eq!(
            generate_scenario(&spec, 42).unwrap(),
            generate_scenario(&spec, 42).unwrap()
        );
        assert_ne!(
            generate_scenario(&spec, 42).unwrap().params,
            generate_scenario(&spec, 43).unwrap().params
        );
    }

    #[test]
    fn degenerate_interval_is_constant() {
        let mut spec = GeneratorSpec::default();
        spec.intervals.gamma = Interval::point(2.5);
        spec.intervals.w0 = Interval::point(0.25);
        let sc = generate_scenario(&spec, 3).unwrap();
        assert!(sc.params.gamma().iter().all(|&v| v == 2.5));
        assert!(sc.initial.w.iter().all(|&v| v == 0.25));
    }

    #[test]
    fn impossible_spec_exhausts_retries() {
        let mut spec = GeneratorSpec::default();
        spec.intervals.alpha = Interval::point(0.0);
        match generate_scenario(&spec, 1) {
            Err(ScenarioError::GenerationExhausted { attempts, last }) => {
                assert_eq!(attempts, MAX_ATTEMPTS);
                assert!(last.contains(crate::model::Violation::AlphaIrreducible));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn interval_rejects_reversed_bounds() {
        assert!(Interval::new(1.0, 0.0).is_err());
        let parsed: Result<Interval, _> = serde_json::from_str("[2.0, 1.0]");
        assert!(parsed.is_err());
    }
}
