//! Model parameters, state, and the right-hand side of the coupled
//! population/infrastructure SIR system.
//!
//! Node indexing follows the stacked vector `z = (x, w)`: indices `0..n`
//! are population groups, indices `n..n + m` are resource nodes.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::spectral::{is_strongly_connected, positive_pattern};

/// Tolerance on `s + x + r = 1` for a single population group.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// Structural problems: the inputs cannot even be assembled into a model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("`{name}` has shape {got_rows}x{got_cols}, expected {want_rows}x{want_cols}")]
    MatrixShape {
        name: &'static str,
        want_rows: usize,
        want_cols: usize,
        got_rows: usize,
        got_cols: usize,
    },
    #[error("`{name}` has length {got}, expected {want}")]
    VectorLength {
        name: &'static str,
        want: usize,
        got: usize,
    },
    #[error("model needs at least one population node and one resource node (n={n}, m={m})")]
    Empty { n: usize, m: usize },
    #[error("state violates its invariants: {0}")]
    InvalidState(String),
}

/// One violated parameter condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Violation {
    GammaPositivity,
    BetaNonnegativity,
    BetaWNonnegativity,
    CWNonnegativity,
    AlphaNonnegativity,
    ResourceHealingPositivity,
    CWCoupling,
    BetaWCoupling,
    BIrreducible,
    AlphaIrreducible,
}

impl Violation {
    pub fn name(self) -> &'static str {
        match self {
            Violation::GammaPositivity => "gamma positivity",
            Violation::BetaNonnegativity => "beta nonnegativity",
            Violation::BetaWNonnegativity => "beta_w nonnegativity",
            Violation::CWNonnegativity => "c_w nonnegativity",
            Violation::AlphaNonnegativity => "alpha nonnegativity",
            Violation::ResourceHealingPositivity => "resource healing positivity",
            Violation::CWCoupling => "c_w coupling",
            Violation::BetaWCoupling => "beta_w coupling",
            Violation::BIrreducible => "B irreducible",
            Violation::AlphaIrreducible => "A_w irreducible",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Result of checking the parameter assumptions. Empty means valid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn contains(&self, v: Violation) -> bool {
        self.violations.contains(&v)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("valid");
        }
        let names: Vec<_> = self.violations.iter().map(|v| v.name()).collect();
        write!(f, "violated: {}", names.join(", "))
    }
}

/// Derived block matrices of the compact form `ż = (H(s) B_f − D_f) z`.
#[derive(Debug, Clone, PartialEq)]
pub struct Blocks {
    pub a_w: DMatrix<f64>,
    pub b_f: DMatrix<f64>,
    pub d_f: DMatrix<f64>,
}

/// Spreading, healing, and flow rates plus the assembled block matrices.
///
/// `c_w` is stored `m x n` so that `(C_w x)_j = Σ_k c_kj x_k`; `alpha[(j, k)]`
/// is the raw flow rate from resource `j` to resource `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    n: usize,
    m: usize,
    beta: DMatrix<f64>,
    beta_w: DMatrix<f64>,
    c_w: DMatrix<f64>,
    alpha: DMatrix<f64>,
    gamma: DVector<f64>,
    gamma_w: DVector<f64>,
    blocks: Blocks,
}

fn check_shape(
    name: &'static str,
    mat: &DMatrix<f64>,
    rows: usize,
    cols: usize,
) -> Result<(), ModelError> {
    if mat.nrows() != rows || mat.ncols() != cols {
        return Err(ModelError::MatrixShape {
            name,
            want_rows: rows,
            want_cols: cols,
            got_rows: mat.nrows(),
            got_cols: mat.ncols(),
        });
    }
    Ok(())
}

fn check_len(name: &'static str, v: &DVector<f64>, len: usize) -> Result<(), ModelError> {
    if v.len() != len {
        return Err(ModelError::VectorLength {
            name,
            want: len,
            got: v.len(),
        });
    }
    Ok(())
}

/// Builds `A_w`, `B_f`, `D_f` from the raw rates.
///
/// `A_w` is fixed by the resource dynamics: the coefficient of `w_k` in
/// `ẇ_j` is `α_kj` for `k ≠ j` and `α_jj − Σ_k α_jk` on the diagonal, so
/// `A_w = αᵀ − diag(α 1)` and every column of `A_w` sums to zero.
pub fn assemble_blocks(
    beta: &DMatrix<f64>,
    beta_w: &DMatrix<f64>,
    c_w: &DMatrix<f64>,
    alpha: &DMatrix<f64>,
    gamma: &DVector<f64>,
    gamma_w: &DVector<f64>,
) -> Blocks {
    let n = beta.nrows();
    let m = alpha.nrows();
    let mut a_w = alpha.transpose();
    for j in 0..m {
        let outflow: f64 = alpha.row(j).iter().sum();
        a_w[(j, j)] -= outflow;
    }

    let size = n + m;
    let mut b_f = DMatrix::zeros(size, size);
    b_f.view_mut((0, 0), (n, n)).copy_from(beta);
    b_f.view_mut((0, n), (n, m)).copy_from(beta_w);
    b_f.view_mut((n, 0), (m, n)).copy_from(c_w);
    for j in 0..m {
        for k in 0..m {
            if j != k {
                b_f[(n + j, n + k)] = a_w[(j, k)];
            }
        }
    }

    let mut d_f = DMatrix::zeros(size, size);
    for i in 0..n {
        d_f[(i, i)] = gamma[i];
    }
    for j in 0..m {
        d_f[(n + j, n + j)] = gamma_w[j] - a_w[(j, j)];
    }

    Blocks { a_w, b_f, d_f }
}

impl ModelParams {
    /// Checks shapes and assembles the block matrices. Does not check the
    /// rate assumptions; see [`ModelParams::validate`].
    pub fn new(
        beta: DMatrix<f64>,
        beta_w: DMatrix<f64>,
        c_w: DMatrix<f64>,
        alpha: DMatrix<f64>,
        gamma: DVector<f64>,
        gamma_w: DVector<f64>,
    ) -> Result<Self, ModelError> {
        let n = beta.nrows();
        let m = alpha.nrows();
        if n == 0 || m == 0 {
            return Err(ModelError::Empty { n, m });
        }
        check_shape("beta", &beta, n, n)?;
        check_shape("beta_w", &beta_w, n, m)?;
        check_shape("c_w", &c_w, m, n)?;
        check_shape("alpha", &alpha, m, m)?;
        check_len("gamma", &gamma, n)?;
        check_len("gamma_w", &gamma_w, m)?;
        let blocks = assemble_blocks(&beta, &beta_w, &c_w, &alpha, &gamma, &gamma_w);
        Ok(Self {
            n,
            m,
            beta,
            beta_w,
            c_w,
            alpha,
            gamma,
            gamma_w,
            blocks,
        })
    }

    /// Lists every violated parameter assumption.
    pub fn validate(&self) -> ValidationReport {
        let nonneg = |mat: &DMatrix<f64>| mat.iter().all(|&v| v >= 0.0);
        let mut violations = Vec::new();

        if !self.gamma.iter().all(|&g| g > 0.0) {
            violations.push(Violation::GammaPositivity);
        }
        if !nonneg(&self.beta) {
            violations.push(Violation::BetaNonnegativity);
        }
        if !nonneg(&self.beta_w) {
            violations.push(Violation::BetaWNonnegativity);
        }
        if !nonneg(&self.c_w) {
            violations.push(Violation::CWNonnegativity);
        }
        if !nonneg(&self.alpha) {
            violations.push(Violation::AlphaNonnegativity);
        }
        let healing_ok = (0..self.m).all(|j| self.resource_healing(j) > 0.0);
        if !healing_ok {
            violations.push(Violation::ResourceHealingPositivity);
        }
        if !self.c_w.iter().any(|&v| v > 0.0) {
            violations.push(Violation::CWCoupling);
        }
        if !self.beta_w.iter().any(|&v| v > 0.0) {
            violations.push(Violation::BetaWCoupling);
        }
        if !is_strongly_connected(&positive_pattern(&self.beta)) {
            violations.push(Violation::BIrreducible);
        }
        if !is_strongly_connected(&positive_pattern(&self.alpha)) {
            violations.push(Violation::AlphaIrreducible);
        }
        ValidationReport { violations }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Total node count `n + m`.
    pub fn size(&self) -> usize {
        self.n + self.m
    }

    pub fn beta(&self) -> &DMatrix<f64> {
        &self.beta
    }

    pub fn beta_w(&self) -> &DMatrix<f64> {
        &self.beta_w
    }

    pub fn c_w(&self) -> &DMatrix<f64> {
        &self.c_w
    }

    pub fn alpha(&self) -> &DMatrix<f64> {
        &self.alpha
    }

    pub fn gamma(&self) -> &DVector<f64> {
        &self.gamma
    }

    pub fn gamma_w(&self) -> &DVector<f64> {
        &self.gamma_w
    }

    pub fn a_w(&self) -> &DMatrix<f64> {
        &self.blocks.a_w
    }

    pub fn b_f(&self) -> &DMatrix<f64> {
        &self.blocks.b_f
    }

    pub fn d_f(&self) -> &DMatrix<f64> {
        &self.blocks.d_f
    }

    pub fn blocks(&self) -> &Blocks {
        &self.blocks
    }

    /// Total healing rate `γ_j^w − [A_w]_jj` of resource `j`.
    pub fn resource_healing(&self, j: usize) -> f64 {
        self.gamma_w[j] - self.blocks.a_w[(j, j)]
    }

    /// `H(s) B_f − D_f`, the Metzler matrix governing `z`.
    pub fn metzler_matrix(&self, s: &DVector<f64>) -> DMatrix<f64> {
        let mut mat = self.h_times(s, &self.blocks.b_f);
        mat -= &self.blocks.d_f;
        mat
    }

    /// `H(s) M`: scales the population rows of `mat` by `s`.
    pub(crate) fn h_times(&self, s: &DVector<f64>, mat: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = mat.clone();
        for i in 0..self.n {
            out.row_mut(i).scale_mut(s[i]);
        }
        out
    }
}

/// Susceptible/infected/recovered proportions and resource contamination.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub s: DVector<f64>,
    pub x: DVector<f64>,
    pub r: DVector<f64>,
    pub w: DVector<f64>,
}

impl State {
    pub fn new(
        t: f64,
        s: DVector<f64>,
        x: DVector<f64>,
        r: DVector<f64>,
        w: DVector<f64>,
    ) -> Result<Self, ModelError> {
        let n = s.len();
        check_len("x", &x, n)?;
        check_len("r", &r, n)?;
        Ok(Self { t, s, x, r, w })
    }

    /// Initial condition with `r = 1 − s − x`.
    pub fn initial(s: DVector<f64>, x: DVector<f64>, w: DVector<f64>) -> Result<Self, ModelError> {
        check_len("x", &x, s.len())?;
        let r = s.map(|v| 1.0 - v).zip_map(&x, |a, b| (a - b).max(0.0));
        let state = Self::new(0.0, s, x, r, w)?;
        if !state
            .s
            .iter()
            .chain(state.x.iter())
            .all(|v| (0.0..=1.0).contains(v))
            || !state
                .s
                .iter()
                .zip(state.x.iter())
                .all(|(a, b)| a + b <= 1.0 + SIMPLEX_TOLERANCE)
        {
            return Err(ModelError::InvalidState(
                "s0, x0 and s0 + x0 must lie in [0, 1]".into(),
            ));
        }
        if !state.w.iter().all(|&v| v >= 0.0) {
            return Err(ModelError::InvalidState("w0 must be nonnegative".into()));
        }
        Ok(state)
    }

    /// Healthy state `(s*, 0, 0)`.
    pub fn healthy(s: DVector<f64>, m: usize) -> Self {
        let n = s.len();
        let r = s.map(|v| 1.0 - v);
        Self {
            t: 0.0,
            s,
            x: DVector::zeros(n),
            r,
            w: DVector::zeros(m),
        }
    }

    pub fn n(&self) -> usize {
        self.s.len()
    }

    pub fn m(&self) -> usize {
        self.w.len()
    }

    /// Stacked `(x, w)`.
    pub fn z(&self) -> DVector<f64> {
        let n = self.n();
        DVector::from_fn(
            n + self.m(),
            |k, _| if k < n { self.x[k] } else { self.w[k - n] },
        )
    }

    /// First invariant violation larger than `tol`, if any.
    pub fn check(&self, tol: f64) -> Result<(), String> {
        for i in 0..self.n() {
            for (name, v) in [("s", self.s[i]), ("x", self.x[i]), ("r", self.r[i])] {
                if !(v >= -tol && v <= 1.0 + tol) {
                    return Err(format!("{name}_{} = {v:e} outside [0, 1]", i + 1));
                }
            }
            let total = self.s[i] + self.x[i] + self.r[i];
            if total.is_nan() || (total - 1.0).abs() > tol {
                return Err(format!("s_{0} + x_{0} + r_{0} = {total:.15} != 1", i + 1));
            }
        }
        for (j, &v) in self.w.iter().enumerate() {
            if v.is_nan() || v < -tol {
                return Err(format!("w_{} = {v:e} is negative", j + 1));
            }
        }
        Ok(())
    }
}

/// Time derivative of a [`State`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateDerivative {
    pub ds: DVector<f64>,
    pub dx: DVector<f64>,
    pub dr: DVector<f64>,
    pub dw: DVector<f64>,
}

impl StateDerivative {
    /// Stacked `(ẋ, ẇ)`.
    pub fn dz(&self) -> DVector<f64> {
        let n = self.dx.len();
        DVector::from_fn(n + self.dw.len(), |k, _| {
            if k < n {
                self.dx[k]
            } else {
                self.dw[k - n]
            }
        })
    }
}

/// Right-hand side in the per-layer vector form.
pub fn derivative(params: &ModelParams, state: &State) -> StateDerivative {
    let force = params.beta() * &state.x + params.beta_w() * &state.w;
    let infection = state.s.component_mul(&force);
    let healing = params.gamma().component_mul(&state.x);
    let ds = -&infection;
    let dx = &infection - &healing;
    let dw = params.a_w() * &state.w - params.gamma_w().component_mul(&state.w)
        + params.c_w() * &state.x;
    StateDerivative {
        ds,
        dx,
        dr: healing,
        dw,
    }
}

/// Right-hand side of the compact form `ż = (H(s) B_f − D_f) z`.
pub fn derivative_compact(params: &ModelParams, state: &State) -> DVector<f64> {
    params.metzler_matrix(&state.s) * state.z()
}
