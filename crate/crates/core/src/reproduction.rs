//! Reproduction numbers: the global number `R(t)`, distributed (pairwise)
//! numbers, local effective numbers (LERNs), and the effective
//! reproduction matrix `𝓡(t)` built from unscaled pairwise numbers.
//!
//! Node indices are stacked: `0..n` population, `n..n+m` resources.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::model::{ModelParams, State};
use crate::spectral::{spectral_radius, SpectralError};

/// Below this level `x_i` (or `w_j`) counts as zero and ratios with it in
/// the denominator are undefined.
pub const DEFINEDNESS_EPS: f64 = 1e-12;

/// `H(s) D_f⁻¹ B_f` by explicit matrix products.
pub fn next_generation_matrix(params: &ModelParams, s: &DVector<f64>) -> DMatrix<f64> {
    let d_inv = DMatrix::from_diagonal(&params.d_f().diagonal().map(|d| 1.0 / d));
    params.h_times(s, &(d_inv * params.b_f()))
}

/// `R(t) = ρ(H(s) D_f⁻¹ B_f)`.
pub fn global_r(params: &ModelParams, state: &State) -> Result<f64, SpectralError> {
    spectral_radius(&next_generation_matrix(params, &state.s))
}

/// Unscaled pairwise numbers assembled blockwise.
///
/// Population rows: `s_i β_ij / γ_i` and `s_i β^w_ij / γ_i`. Resource rows:
/// `c_kj / h_j` and `α_kj / h_j` with `h_j = γ^w_j − [A_w]_jj`. The
/// resource self-flow `α_jj` cancels out of the dynamics and is excluded.
pub fn reproduction_matrix(params: &ModelParams, s: &DVector<f64>) -> DMatrix<f64> {
    let (n, m) = (params.n(), params.m());
    DMatrix::from_fn(n + m, n + m, |row, col| {
        if row < n {
            let rate = if col < n {
                params.beta()[(row, col)]
            } else {
                params.beta_w()[(row, col - n)]
            };
            s[row] * rate / params.gamma()[row]
        } else {
            let j = row - n;
            let rate = if col < n {
                params.c_w()[(j, col)]
            } else if col - n == j {
                0.0
            } else {
                params.alpha()[(col - n, j)]
            };
            rate / params.resource_healing(j)
        }
    })
}

/// `R_ij(t)` for population node `i` and any node `j`.
///
/// # Panics
/// If `i >= n` or `j >= n + m`.
pub fn drn_population(params: &ModelParams, state: &State, i: usize, j: usize) -> Option<f64> {
    let n = params.n();
    assert!(i < n, "population index {i} out of range (n={n})");
    assert!(j < params.size(), "node index {j} out of range");
    let xi = state.x[i];
    if xi.is_nan() || xi <= DEFINEDNESS_EPS {
        return None;
    }
    let inflow = if j < n {
        params.beta()[(i, j)] * state.x[j]
    } else {
        params.beta_w()[(i, j - n)] * state.w[j - n]
    };
    Some(state.s[i] * inflow / (params.gamma()[i] * xi))
}

/// `R_jk(t)` for resource `j` (in `0..m`) and any node `k`.
///
/// # Panics
/// If `j >= m` or `k >= n + m`.
pub fn drn_infrastructure(params: &ModelParams, state: &State, j: usize, k: usize) -> Option<f64> {
    let (n, m) = (params.n(), params.m());
    assert!(j < m, "resource index {j} out of range (m={m})");
    assert!(k < n + m, "node index {k} out of range");
    let wj = state.w[j];
    if wj.is_nan() || wj <= DEFINEDNESS_EPS {
        return None;
    }
    let inflow = if k < n {
        params.c_w()[(j, k)] * state.x[k]
    } else if k - n == j {
        0.0
    } else {
        params.alpha()[(k - n, j)] * state.w[k - n]
    };
    Some(inflow / (params.resource_healing(j) * wj))
}

/// `R_i(t) = Σ_j R_ij(t)` over both layers, population terms first.
pub fn lern(params: &ModelParams, state: &State, node: usize) -> Option<f64> {
    let n = params.n();
    let size = params.size();
    assert!(node < size, "node index {node} out of range");
    let terms: Option<Vec<f64>> = if node < n {
        (0..size)
            .map(|j| drn_population(params, state, node, j))
            .collect()
    } else {
        (0..size)
            .map(|k| drn_infrastructure(params, state, node - n, k))
            .collect()
    };
    terms.map(|t| t.into_iter().sum())
}

/// LERNs of every node.
pub fn lerns(params: &ModelParams, state: &State) -> Vec<Option<f64>> {
    (0..params.size()).map(|i| lern(params, state, i)).collect()
}

/// `ẋ_ij^k = s_i (β_ij x_j + β^w_ik w_k) − γ_i x_i` for population `i, j`
/// and resource `k` (in `0..m`).
pub fn pairwise_infection_derivative(
    params: &ModelParams,
    state: &State,
    i: usize,
    j: usize,
    k: usize,
) -> f64 {
    state.s[i] * (params.beta()[(i, j)] * state.x[j] + params.beta_w()[(i, k)] * state.w[k])
        - params.gamma()[i] * state.x[i]
}

/// Every reproduction quantity at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproductionReport {
    pub t: f64,
    pub global_r: f64,
    pub matrix_r: Vec<Vec<f64>>,
    /// `None` where the node's own state is below [`DEFINEDNESS_EPS`].
    pub lern: Vec<Option<f64>>,
    pub drn_defined: Vec<bool>,
}

impl ReproductionReport {
    pub fn compute(params: &ModelParams, state: &State) -> Result<Self, SpectralError> {
        let global_r = global_r(params, state)?;
        let matrix = reproduction_matrix(params, &state.s);
        let lern = lerns(params, state);
        Ok(Self {
            t: state.t,
            global_r,
            matrix_r: matrix
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
            drn_defined: lern.iter().map(Option::is_some).collect(),
            lern,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::derivative;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

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

    fn state(s: &[f64], x: &[f64], w: &[f64]) -> State {
        let r: Vec<f64> = s.iter().zip(x).map(|(a, b)| 1.0 - a - b).collect();
        State::new(
            0.0,
            DVector::from_column_slice(s),
            DVector::from_column_slice(x),
            DVector::from_column_slice(&r),
            DVector::from_column_slice(w),
        )
        .unwrap()
    }

    /// n = 2, m = 2: population node 0 has β_01 = 4 and β^w_00 = 1,
    /// γ_0 = 2; resource 0 has γ^w = 1 and outflow 0.5.
    fn worked_example() -> ModelParams {
        ModelParams::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 4.0, 1.0, 0.0]),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]),
            DMatrix::from_row_slice(2, 2, &[0.3, 0.0, 0.0, 0.3]),
            DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]),
            DVector::from_column_slice(&[2.0, 1.0]),
            DVector::from_column_slice(&[1.0, 1.0]),
        )
        .unwrap()
    }

    #[test]
    fn golden_global_r() {
        let p = golden();
        let r = global_r(&p, &state(&[1.0], &[0.0], &[0.0])).unwrap();
        assert_relative_eq!(r, (1.0 + 5f64.sqrt()) / 2.0, max_relative = 1e-10);
        let r0 = global_r(&p, &state(&[0.0], &[0.0], &[0.0])).unwrap();
        assert_eq!(r0, 0.0);
    }

    #[test]
    fn golden_matrix_and_halving() {
        let p = golden();
        let full = reproduction_matrix(&p, &DVector::from_element(1, 1.0));
        assert_eq!(full, DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 0.0]));
        let half = reproduction_matrix(&p, &DVector::from_element(1, 0.5));
        assert_eq!(half.row(0), full.row(0) * 0.5);
        assert_eq!(half.row(1), full.row(1));
    }

    #[test]
    fn population_drns_by_substitution() {
        let p = worked_example();
        let st = state(&[0.5, 0.5], &[0.1, 0.2], &[0.4, 0.0]);
        assert_relative_eq!(
            drn_population(&p, &st, 0, 1).unwrap(),
            2.0,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            drn_population(&p, &st, 0, 2).unwrap(),
            1.0,
            max_relative = 1e-14
        );
        assert_eq!(drn_population(&p, &st, 0, 0), Some(0.0));
        assert_eq!(drn_population(&p, &st, 0, 3), Some(0.0));
        // R_0 = 2 + 1 and ẋ_0 = 0.5 (4·0.2 + 1·0.4) − 2·0.1 = 0.4
        assert_relative_eq!(lern(&p, &st, 0).unwrap(), 3.0, max_relative = 1e-14);
        let dx = derivative(&p, &st).dx[0];
        assert_abs_diff_eq!(dx, 0.4, epsilon = 1e-14);
        assert_abs_diff_eq!(
            pairwise_infection_derivative(&p, &st, 0, 1, 0),
            0.4,
            epsilon = 1e-14
        );
    }

    #[test]
    fn infrastructure_drn_by_substitution() {
        // [A_w]_00 = −0.5 so the total healing rate is 1.5.
        let p = worked_example();
        assert_abs_diff_eq!(p.a_w()[(0, 0)], -0.5);
        let st = state(&[0.5, 0.5], &[0.5, 0.0], &[0.2, 0.0]);
        assert_relative_eq!(
            drn_infrastructure(&p, &st, 0, 0).unwrap(),
            0.5,
            max_relative = 1e-14
        );
        assert_eq!(drn_infrastructure(&p, &st, 0, 2), Some(0.0));
        assert_eq!(drn_infrastructure(&p, &st, 1, 0), None);
    }

    #[test]
    fn no_sources_means_zero_drns() {
        let p = ModelParams::new(
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 2, 1.0),
            DMatrix::from_element(2, 1, 1.0),
            DMatrix::zeros(2, 2),
            DVector::from_element(1, 1.0),
            DVector::from_element(2, 1.0),
        )
        .unwrap();
        let st = state(&[0.9], &[0.0], &[0.3, 0.4]);
        for j in 0..2 {
            for k in 0..3 {
                assert_eq!(drn_infrastructure(&p, &st, j, k), Some(0.0));
            }
        }
    }

    #[test]
    fn depleted_node() {
        let p = worked_example();
        let st = state(&[0.0, 0.5], &[0.3, 0.2], &[0.4, 0.1]);
        for j in 0..4 {
            assert_eq!(drn_population(&p, &st, 0, j), Some(0.0));
        }
        assert_eq!(lern(&p, &st, 0), Some(0.0));
        assert!(derivative(&p, &st).dx[0] < 0.0);
    }

    #[test]
    fn undefined_below_threshold() {
        let p = worked_example();
        let st = state(&[0.5, 0.5], &[0.0, 0.2], &[1e-13, 0.1]);
        assert_eq!(drn_population(&p, &st, 0, 1), None);
        assert_eq!(lern(&p, &st, 0), None);
        assert_eq!(lern(&p, &st, 2), None);
        let report = ReproductionReport::compute(&p, &st).unwrap();
        assert_eq!(report.drn_defined, vec![false, true, false, true]);
    }

    #[test]
    fn blocks_match_product() {
        let p = worked_example();
        let s = DVector::from_column_slice(&[0.7, 0.3]);
        let a = reproduction_matrix(&p, &s);
        let b = next_generation_matrix(&p, &s);
        assert!((a - b).amax() <= 1e-15);
    }
}
