//! Dense real symmetric matrices and a cyclic Jacobi eigensolver.
//!
//! Everything here is sized for desk-scale networks (a few hundred edges at
//! most), so storage is dense and the solver favours robustness over speed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative off-diagonal tolerance used by [`is_psd`] and the certificate code.
pub const EIG_TOL: f64 = 1e-13;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix dimension must be at least 1")]
    EmptyMatrix,
    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("expected {expected} entries, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("Jacobi iteration did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NonConvergence { sweeps: usize, off_norm: f64 },
}

/// Real symmetric matrix stored as its packed lower triangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    dim: usize,
    lower: Vec<f64>,
}

#[inline]
fn packed(i: usize, j: usize) -> usize {
    let (r, c) = if i >= j { (i, j) } else { (j, i) };
    r * (r + 1) / 2 + c
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Result<Self, LinalgError> {
        if dim == 0 {
            return Err(LinalgError::EmptyMatrix);
        }
        Ok(Self {
            dim,
            lower: vec![0.0; dim * (dim + 1) / 2],
        })
    }

    pub fn identity(dim: usize) -> Result<Self, LinalgError> {
        let mut m = Self::zeros(dim)?;
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        Ok(m)
    }

    pub fn from_diag(diag: &[f64]) -> Result<Self, LinalgError> {
        let mut m = Self::zeros(diag.len())?;
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        Ok(m)
    }

    /// Builds a matrix by evaluating `f(i, j)` on the lower triangle (`j <= i`).
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self, LinalgError> {
        let mut m = Self::zeros(dim)?;
        for i in 0..dim {
            for j in 0..=i {
                m.set(i, j, f(i, j));
            }
        }
        Ok(m)
    }

    /// Builds a matrix from full rows, rejecting any asymmetry.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let dim = rows.len();
        let mut m = Self::zeros(dim)?;
        for row in rows {
            if row.len() != dim {
                return Err(LinalgError::ShapeMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
        }
        for i in 0..dim {
            for j in 0..=i {
                if rows[i][j] != rows[j][i] {
                    return Err(LinalgError::NotSymmetric { row: i, col: j });
                }
                m.set(i, j, rows[i][j]);
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.lower[packed(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.lower[packed(i, j)] = value;
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.lower.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                let v = self.get(i, j);
                s += v * v;
            }
        }
        s.sqrt()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    /// Returns `S^T A S` for a dense square `S` given row-major.
    pub fn congruence(&self, s: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let n = self.dim;
        if s.len() != n || s.iter().any(|r| r.len() != n) {
            return Err(LinalgError::ShapeMismatch {
                expected: n * n,
                got: s.iter().map(Vec::len).sum(),
            });
        }
        // AS first, then S^T (AS)
        let mut as_ = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                as_[i][j] = (0..n).map(|k| self.get(i, k) * s[k][j]).sum();
            }
        }
        Self::from_fn(n, |i, j| (0..n).map(|k| s[k][i] * as_[k][j]).sum())
    }
}

/// Eigenvalues of a symmetric matrix, sorted ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenResult {
    pub eigenvalues: Vec<f64>,
    /// Number of full Jacobi sweeps performed.
    pub iterations: usize,
    pub converged: bool,
    /// Largest `||A v - lambda v||` over the accumulated eigenvectors.
    pub max_residual: f64,
}

fn off_diagonal_norm(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[i][j] * a[i][j];
            }
        }
    }
    s.sqrt()
}

/// Cyclic Jacobi eigenvalue iteration.
///
/// Stops once the off-diagonal Frobenius norm of the rotated matrix drops to
/// `tol * ||A||_F`. The sweep cap is `50 * dim^2`.
pub fn sym_eigvals(a: &SymMatrix, tol: f64) -> Result<EigenResult, LinalgError> {
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(LinalgError::InvalidTolerance(tol));
    }
    let n = a.dim();
    let mut m = a.to_rows();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let norm = a.frobenius();
    let threshold = tol * norm;
    let max_sweeps = 50 * n * n;

    let mut sweeps = 0;
    let mut off = off_diagonal_norm(&m);
    while off > threshold {
        if sweeps >= max_sweeps {
            return Err(LinalgError::NonConvergence {
                sweeps,
                off_norm: off,
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p][q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p][p];
                let aqq = m[q][q];
                // negligible against both diagonal entries: annihilate outright
                if apq.abs() <= f64::EPSILON * 0.5 * (app.abs() * aqq.abs()).sqrt() {
                    m[p][q] = 0.0;
                    m[q][p] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                m[p][q] = 0.0;
                m[q][p] = 0.0;
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
        off = off_diagonal_norm(&m);
    }

    let mut max_residual = 0.0_f64;
    for j in 0..n {
        let col: Vec<f64> = v.iter().map(|row| row[j]).collect();
        let av = a.mul_vec(&col);
        let lambda = m[j][j];
        let r = av
            .iter()
            .zip(&col)
            .map(|(x, y)| (x - lambda * y).powi(2))
            .sum::<f64>()
            .sqrt();
        max_residual = max_residual.max(r);
    }

    let mut eigenvalues: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
    eigenvalues.sort_by(f64::total_cmp);
    Ok(EigenResult {
        eigenvalues,
        iterations: sweeps,
        converged: true,
        max_residual,
    })
}

/// Scale-aware PSD tolerance: `1e-9 * dim * max|entry|`.
pub fn default_psd_tol(a: &SymMatrix) -> f64 {
    1e-9 * a.dim() as f64 * a.max_abs()
}

/// Positive semi-definiteness verdict together with the smallest eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsdVerdict {
    pub psd: bool,
    pub min_eig: f64,
}

pub fn is_psd(a: &SymMatrix, tol: f64) -> Result<PsdVerdict, LinalgError> {
    if !(tol >= 0.0) {
        return Err(LinalgError::InvalidTolerance(tol));
    }
    let eig = sym_eigvals(a, EIG_TOL)?;
    let min_eig = eig.eigenvalues[0];
    Ok(PsdVerdict {
        psd: min_eig >= -tol,
        min_eig,
    })
}

/// [`is_psd`] with [`default_psd_tol`].
pub fn is_psd_default(a: &SymMatrix) -> Result<PsdVerdict, LinalgError> {
    is_psd(a, default_psd_tol(a))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_eigenvalues() {
        let r = sym_eigvals(&SymMatrix::identity(3).unwrap(), 1e-12).unwrap();
        assert_eq!(r.eigenvalues, vec![1.0, 1.0, 1.0]);
        assert!(r.converged);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn rank_one_two_by_two() {
        // lambda^2 - lambda = 0
        let a = SymMatrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let r = sym_eigvals(&a, 1e-12).unwrap();
        assert!(r.eigenvalues[0].abs() < 1e-15);
        assert!((r.eigenvalues[1] - 1.0).abs() < 1e-15);
        assert!(r.max_residual <= 10.0 * 1e-12 * a.frobenius());
    }

    #[test]
    fn diagonal_is_sorted() {
        let d = [-0.71, -0.41, -0.55, -0.50, -0.61];
        let r = sym_eigvals(&SymMatrix::from_diag(&d).unwrap(), 1e-12).unwrap();
        assert_eq!(r.eigenvalues, vec![-0.71, -0.61, -0.55, -0.50, -0.41]);
    }

    #[test]
    fn psd_examples() {
        let z = SymMatrix::zeros(2).unwrap();
        assert_eq!(is_psd(&z, 0.0).unwrap(), PsdVerdict { psd: true, min_eig: 0.0 });

        let a = SymMatrix::from_rows(&[vec![1.0, -0.5], vec![-0.5, 1.0]]).unwrap();
        let v = is_psd_default(&a).unwrap();
        assert!(v.psd);
        assert!((v.min_eig - 0.5).abs() < 1e-15);

        let b = SymMatrix::from_diag(&[-1.0, 2.0]).unwrap();
        let v = is_psd_default(&b).unwrap();
        assert!(!v.psd);
        assert_eq!(v.min_eig, -1.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(SymMatrix::zeros(0), Err(LinalgError::EmptyMatrix));
        assert!(matches!(
            SymMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 1.0]]),
            Err(LinalgError::NotSymmetric { .. })
        ));
        let a = SymMatrix::identity(2).unwrap();
        assert!(sym_eigvals(&a, 0.0).is_err());
        assert!(is_psd(&a, -1.0).is_err());
    }

    #[test]
    fn storage_is_symmetric() {
        let mut a = SymMatrix::zeros(3).unwrap();
        a.set(0, 2, 4.0);
        assert_eq!(a.get(2, 0), 4.0);
        assert_eq!(a.to_rows()[0][2], a.to_rows()[2][0]);
    }
}
