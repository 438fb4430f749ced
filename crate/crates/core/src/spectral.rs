//! Perron–Frobenius machinery: spectral radius of nonnegative matrices,
//! rightmost eigenpair of Metzler matrices, and strong connectivity.
//!
//! Everything here is dense power iteration. The matrices in scope are
//! irreducible and nonnegative (or Metzler after a diagonal shift), so the
//! dominant eigenvalue is real and simple and the iteration converges from
//! any strictly positive start vector.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("entry ({row}, {col}) = {value:e} is negative")]
    Negative { row: usize, col: usize, value: f64 },
    #[error("off-diagonal entry ({row}, {col}) = {value:e} is negative (not Metzler)")]
    NotMetzler { row: usize, col: usize, value: f64 },
    #[error("entry ({row}, {col}) is not finite")]
    NotFinite { row: usize, col: usize },
    #[error("power iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
}

/// Stopping rule for power iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSettings {
    /// Residual bound relative to the infinity norm of the iterated matrix.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Residual (relative) accepted at the iteration cap for reducible input.
    pub stall_tolerance: f64,
}

impl Default for PowerSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-13,
            max_iterations: 100_000,
            stall_tolerance: 1e-8,
        }
    }
}

/// Dominant eigenvalue with its nonnegative eigenvector (unit 1-norm).
#[derive(Debug, Clone, PartialEq)]
pub struct DominantPair {
    pub value: f64,
    /// Right eigenvector for [`spectral_radius_with`], left eigenvector for
    /// [`dominant_metzler_with`].
    pub vector: DVector<f64>,
    pub iterations: usize,
    /// `‖M v − λ v‖∞` (or `‖vᵀ M − λ vᵀ‖∞`) at the returned vector.
    pub residual: f64,
}

impl DominantPair {
    pub fn left_vector(&self) -> &DVector<f64> {
        &self.vector
    }
}

fn check_finite_square(m: &DMatrix<f64>) -> Result<(), SpectralError> {
    if m.nrows() != m.ncols() {
        return Err(SpectralError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            if !m[(r, c)].is_finite() {
                return Err(SpectralError::NotFinite { row: r, col: c });
            }
        }
    }
    Ok(())
}

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn start_vector(dim: usize, warm: Option<&DVector<f64>>) -> DVector<f64> {
    let floor = 1e-3 / dim as f64;
    let mut v = match warm {
        Some(w) if w.len() == dim && w.iter().all(|x| x.is_finite()) => w.map(|x| x.max(floor)),
        _ => DVector::from_element(dim, 1.0),
    };
    let total = v.sum();
    v /= total;
    v
}

/// Power iteration on `a + shift·I` (all entries nonnegative). Returns the
/// eigenvalue of `a` itself.
fn shifted_power(
    a: &DMatrix<f64>,
    shift: f64,
    settings: &PowerSettings,
    warm: Option<&DVector<f64>>,
) -> Result<DominantPair, SpectralError> {
    let dim = a.nrows();
    let scale = (inf_norm(a) + shift).max(f64::MIN_POSITIVE);
    let mut v = start_vector(dim, warm);
    let mut y = DVector::zeros(dim);
    let mut best: Option<DominantPair> = None;

    for iteration in 1..=settings.max_iterations {
        a.mul_to(&v, &mut y);
        y.axpy(shift, &v, 1.0);
        let total = y.sum();
        if total <= 0.0 {
            // a v = 0 with v > 0 and a ≥ 0 forces a = 0.
            return Ok(DominantPair {
                value: 0.0,
                vector: v,
                iterations: iteration,
                residual: 0.0,
            });
        }
        // v has unit 1-norm, so this is the Collatz–Wielandt mean ratio.
        let estimate = total;
        let residual = y
            .iter()
            .zip(v.iter())
            .map(|(yi, vi)| (yi - estimate * vi).abs())
            .fold(0.0, f64::max);
        if residual <= settings.tolerance * scale {
            return Ok(DominantPair {
                value: estimate - shift,
                vector: v,
                iterations: iteration,
                residual,
            });
        }
        if best.as_ref().is_none_or(|b| residual < b.residual) {
            best = Some(DominantPair {
                value: estimate - shift,
                vector: v.clone(),
                iterations: iteration,
                residual,
            });
        }
        std::mem::swap(&mut v, &mut y);
        v /= total;
    }

    let best = best.expect("at least one iteration ran");
    if best.residual <= settings.stall_tolerance * scale {
        return Ok(best);
    }
    Err(SpectralError::NoConvergence {
        iterations: settings.max_iterations,
        residual: best.residual,
    })
}

/// `ρ(M)` for an entrywise nonnegative square matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64, SpectralError> {
    spectral_radius_with(m, &PowerSettings::default(), None).map(|p| p.value)
}

/// Perron root and right Perron vector of a nonnegative matrix.
///
/// Zero-diagonal matrices are first probed for nilpotency (which gives
/// `ρ = 0` exactly) and otherwise iterated on `M + (‖M‖∞/2) I` to break
/// periodicity. Matrices with a positive diagonal entry are iterated as-is.
pub fn spectral_radius_with(
    m: &DMatrix<f64>,
    settings: &PowerSettings,
    warm: Option<&DVector<f64>>,
) -> Result<DominantPair, SpectralError> {
    check_finite_square(m)?;
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            if m[(r, c)] < 0.0 {
                return Err(SpectralError::Negative {
                    row: r,
                    col: c,
                    value: m[(r, c)],
                });
            }
        }
    }
    let dim = m.nrows();
    if dim == 0 {
        return Ok(DominantPair {
            value: 0.0,
            vector: DVector::zeros(0),
            iterations: 0,
            residual: 0.0,
        });
    }

    let shift = if m.diagonal().iter().any(|&d| d > 0.0) {
        0.0
    } else {
        let mut probe = DVector::from_element(dim, 1.0 / dim as f64);
        for _ in 0..dim {
            probe = m * probe;
        }
        if probe.iter().all(|&v| v == 0.0) {
            return Ok(DominantPair {
                value: 0.0,
                vector: DVector::from_element(dim, 1.0 / dim as f64),
                iterations: dim,
                residual: 0.0,
            });
        }
        0.5 * inf_norm(m)
    };
    shifted_power(m, shift, settings, warm)
}

/// Rightmost eigenvalue and positive left eigenvector of a Metzler matrix.
pub fn dominant_metzler(m: &DMatrix<f64>) -> Result<DominantPair, SpectralError> {
    dominant_metzler_with(m, &PowerSettings::default(), None)
}

/// Power iteration on `(M + cI)ᵀ` with `c = 1 + max_i |M_ii|`, which is
/// nonnegative with a positive diagonal; `c` is subtracted from the result.
pub fn dominant_metzler_with(
    m: &DMatrix<f64>,
    settings: &PowerSettings,
    warm: Option<&DVector<f64>>,
) -> Result<DominantPair, SpectralError> {
    check_finite_square(m)?;
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            if r != c && m[(r, c)] < 0.0 {
                return Err(SpectralError::NotMetzler {
                    row: r,
                    col: c,
                    value: m[(r, c)],
                });
            }
        }
    }
    let shift = 1.0 + m.diagonal().iter().fold(0.0_f64, |acc, d| acc.max(d.abs()));
    shifted_power(&m.transpose(), shift, settings, warm)
}

/// Pattern of strictly positive entries.
pub fn positive_pattern(m: &DMatrix<f64>) -> DMatrix<bool> {
    m.map(|v| v > 0.0)
}

fn reaches_all(pattern: &DMatrix<bool>, transpose: bool) -> bool {
    let dim = pattern.nrows();
    let mut seen = vec![false; dim];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for v in 0..dim {
            let edge = if transpose {
                pattern[(v, u)]
            } else {
                pattern[(u, v)]
            };
            if edge && !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Whether the digraph with an edge `i → j` for every `pattern[(i, j)]` is
/// strongly connected: node 0 reaches everything forward and backward.
pub fn is_strongly_connected(pattern: &DMatrix<bool>) -> bool {
    assert_eq!(pattern.nrows(), pattern.ncols(), "pattern must be square");
    if pattern.nrows() <= 1 {
        return true;
    }
    reaches_all(pattern, false) && reaches_all(pattern, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const GOLDEN: f64 = 1.618_033_988_749_895;

    #[test]
    fn golden_ratio_radius() {
        // λ² − λ − 1 = 0
        let oracle = (1.0 + 5f64.sqrt()) / 2.0;
        assert_relative_eq!(oracle, GOLDEN, max_relative = 1e-15);
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 0.0]);
        assert_relative_eq!(spectral_radius(&m).unwrap(), oracle, max_relative = 1e-10);
    }

    #[test]
    fn zero_and_nilpotent() {
        assert_eq!(spectral_radius(&DMatrix::zeros(3, 3)).unwrap(), 0.0);
        let nil = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]);
        assert_eq!(spectral_radius(&nil).unwrap(), 0.0);
    }

    #[test]
    fn scaled_identity() {
        for c in [0.0, 0.25, 3.0] {
            let m = DMatrix::identity(4, 4) * c;
            assert_relative_eq!(spectral_radius(&m).unwrap(), c, max_relative = 1e-12);
        }
    }

    #[test]
    fn periodic_matrix_converges() {
        let m = DMatrix::from_row_slice(3, 3, &[0.0, 2.0, 0.0, 0.0, 0.0, 2.0, 2.0, 0.0, 0.0]);
        assert_relative_eq!(spectral_radius(&m).unwrap(), 2.0, max_relative = 1e-10);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            spectral_radius(&DMatrix::zeros(2, 3)),
            Err(SpectralError::NotSquare { .. })
        ));
        let neg = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 0.0, 1.0]);
        assert!(matches!(
            spectral_radius(&neg),
            Err(SpectralError::Negative { row: 0, col: 1, .. })
        ));
        let not_metzler = DMatrix::from_row_slice(2, 2, &[-1.0, -0.5, 1.0, -1.0]);
        assert!(matches!(
            dominant_metzler(&not_metzler),
            Err(SpectralError::NotMetzler { .. })
        ));
        let nan = DMatrix::from_row_slice(1, 1, &[f64::NAN]);
        assert!(matches!(
            spectral_radius(&nan),
            Err(SpectralError::NotFinite { .. })
        ));
    }

    #[test]
    fn golden_metzler_pair() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, -1.0]);
        let pair = dominant_metzler(&m).unwrap();
        // Symmetric, eigenvalues (−1 ± √5)/2, eigenvector (φ, 1).
        let phi = GOLDEN;
        assert_relative_eq!(pair.value, (-1.0 + 5f64.sqrt()) / 2.0, max_relative = 1e-10);
        assert_relative_eq!(pair.vector[0], phi / (phi + 1.0), max_relative = 1e-10);
        assert_relative_eq!(pair.vector[1], 1.0 / (phi + 1.0), max_relative = 1e-10);
    }

    #[test]
    fn negative_identity() {
        let pair = dominant_metzler(&(-DMatrix::<f64>::identity(3, 3))).unwrap();
        assert_relative_eq!(pair.value, -1.0, max_relative = 1e-12);
        for v in pair.vector.iter() {
            assert_relative_eq!(*v, 1.0 / 3.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn left_vector_of_asymmetric_metzler() {
        let m = DMatrix::from_row_slice(2, 2, &[-2.0, 3.0, 0.5, -1.0]);
        let pair = dominant_metzler(&m).unwrap();
        let lhs = pair.vector.transpose() * &m;
        let rhs = pair.vector.transpose() * pair.value;
        assert!((lhs - rhs).amax() <= 1e-8 * inf_norm(&m));
        assert!(pair.vector.iter().all(|&v| v > 0.0));
        assert_relative_eq!(pair.vector.sum(), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn strong_connectivity() {
        assert!(is_strongly_connected(&DMatrix::from_element(1, 1, false)));
        let cycle = DMatrix::from_row_slice(2, 2, &[false, true, true, false]);
        assert!(is_strongly_connected(&cycle));
        let path = DMatrix::from_row_slice(
            3,
            3,
            &[false, true, false, false, false, true, false, false, false],
        );
        assert!(!is_strongly_connected(&path));
        let mut ring = path.clone();
        ring[(2, 0)] = true;
        assert!(is_strongly_connected(&ring));
    }
}
