//! SISO LTI agents: rational transfer functions, their frequency response,
//! controllable canonical realizations and frequency-sweep IFP index estimates.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LtiError {
    #[error("coefficient list is empty")]
    EmptyCoefficients,
    #[error("coefficients must be finite")]
    NonFiniteCoefficient,
    #[error("leading denominator coefficient is zero")]
    ZeroLeadingDenominator,
    #[error("numerator is identically zero")]
    ZeroNumerator,
    #[error("transfer function is not strictly proper (numerator degree {num_degree}, denominator degree {den_degree})")]
    NotStrictlyProper { num_degree: usize, den_degree: usize },
    #[error("s = j{omega} is a pole")]
    PoleAtFrequency { omega: f64 },
    #[error("unstable poles: {0}")]
    UnstablePoles(String),
    #[error("invalid frequency sweep: {0}")]
    InvalidSweep(String),
}

/// Horner evaluation of a real polynomial (descending powers) at a complex point.
pub fn poly_eval(coeffs: &[f64], s: Complex64) -> Complex64 {
    coeffs
        .iter()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
}

/// Strictly proper rational transfer function with monic denominator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RationalTransfer {
    num: Vec<f64>,
    den: Vec<f64>,
}

impl RationalTransfer {
    /// Coefficients are in descending powers of `s`.
    pub fn new(num: &[f64], den: &[f64]) -> Result<Self, LtiError> {
        if num.is_empty() || den.is_empty() {
            return Err(LtiError::EmptyCoefficients);
        }
        if num.iter().chain(den).any(|c| !c.is_finite()) {
            return Err(LtiError::NonFiniteCoefficient);
        }
        if den[0] == 0.0 {
            return Err(LtiError::ZeroLeadingDenominator);
        }
        let first = num
            .iter()
            .position(|&c| c != 0.0)
            .ok_or(LtiError::ZeroNumerator)?;
        let num = &num[first..];
        if num.len() >= den.len() {
            return Err(LtiError::NotStrictlyProper {
                num_degree: num.len() - 1,
                den_degree: den.len() - 1,
            });
        }
        let lead = den[0];
        Ok(Self {
            num: num.iter().map(|c| c / lead).collect(),
            den: den.iter().map(|c| c / lead).collect(),
        })
    }

    pub fn num(&self) -> &[f64] {
        &self.num
    }

    pub fn den(&self) -> &[f64] {
        &self.den
    }

    /// Denominator degree, which is also the realization order.
    pub fn order(&self) -> usize {
        self.den.len() - 1
    }

    pub fn freq_response(&self, omega: f64) -> Result<Complex64, LtiError> {
        let s = Complex64::new(0.0, omega);
        let d = poly_eval(&self.den, s);
        if d.norm() < 1e-12 {
            return Err(LtiError::PoleAtFrequency { omega });
        }
        Ok(poly_eval(&self.num, s) / d)
    }

    /// Checks that all poles are in the open left half-plane except for at
    /// most one simple pole at the origin.
    pub fn check_poles(&self) -> Result<(), LtiError> {
        let origin = self.den.iter().rev().take_while(|&&c| c == 0.0).count();
        if origin > 1 {
            return Err(LtiError::UnstablePoles(format!(
                "pole at the origin has multiplicity {origin}"
            )));
        }
        let rest = &self.den[..self.den.len() - origin];
        if !routh_hurwitz(rest) {
            return Err(LtiError::UnstablePoles(
                "pole in the open right half-plane or on the imaginary axis".into(),
            ));
        }
        Ok(())
    }

    /// Controllable canonical realization.
    pub fn realize(&self) -> StateSpace {
        let m = self.order();
        let mut a = vec![vec![0.0; m]; m];
        for (i, row) in a.iter_mut().enumerate().take(m - 1) {
            row[i + 1] = 1.0;
        }
        // den = s^m + d_1 s^{m-1} + ... + d_m; last row is [-d_m, ..., -d_1]
        for j in 0..m {
            a[m - 1][j] = -self.den[m - j];
        }
        let mut b = vec![0.0; m];
        b[m - 1] = 1.0;
        let mut c = vec![0.0; m];
        for (power, &coef) in self.num.iter().rev().enumerate() {
            c[power] = coef;
        }
        StateSpace { a, b, c }
    }
}

/// Strict Hurwitz test on a polynomial with positive leading coefficient.
fn routh_hurwitz(coeffs: &[f64]) -> bool {
    let degree = coeffs.len() - 1;
    if degree == 0 {
        return true;
    }
    let scale = coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    let eps = 1e-12 * scale;
    let width = degree / 2 + 1;
    let mut prev: Vec<f64> = (0..width)
        .map(|j| coeffs.get(2 * j).copied().unwrap_or(0.0))
        .collect();
    let mut cur: Vec<f64> = (0..width)
        .map(|j| coeffs.get(2 * j + 1).copied().unwrap_or(0.0))
        .collect();
    if prev[0] <= eps || cur[0] <= eps {
        return false;
    }
    for _ in 2..=degree {
        let next: Vec<f64> = (0..width)
            .map(|j| {
                let a = prev.get(j + 1).copied().unwrap_or(0.0);
                let b = cur.get(j + 1).copied().unwrap_or(0.0);
                (cur[0] * a - prev[0] * b) / cur[0]
            })
            .collect();
        if next[0] <= eps {
            return false;
        }
        prev = cur;
        cur = next;
    }
    true
}

/// Single-input single-output state-space model `x' = Ax + Bu, y = Cx`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpace {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl StateSpace {
    pub fn order(&self) -> usize {
        self.b.len()
    }

    #[inline]
    pub fn output(&self, x: &[f64]) -> f64 {
        self.c.iter().zip(x).map(|(c, x)| c * x).sum()
    }

    #[inline]
    pub fn derivative(&self, x: &[f64], u: f64, dx: &mut [f64]) {
        for (i, row) in self.a.iter().enumerate() {
            dx[i] = row.iter().zip(x).map(|(a, x)| a * x).sum::<f64>() + self.b[i] * u;
        }
    }

    /// `C (jwI - A)^{-1} B`, solved by complex Gaussian elimination.
    pub fn freq_response(&self, omega: f64) -> Result<Complex64, LtiError> {
        let m = self.order();
        let s = Complex64::new(0.0, omega);
        let mut aug: Vec<Vec<Complex64>> = (0..m)
            .map(|i| {
                let mut row: Vec<Complex64> = (0..m)
                    .map(|j| {
                        let diag = if i == j { s } else { Complex64::new(0.0, 0.0) };
                        diag - self.a[i][j]
                    })
                    .collect();
                row.push(Complex64::new(self.b[i], 0.0));
                row
            })
            .collect();
        let scale = balance(&mut aug);
        for col in 0..m {
            let pivot = (col..m)
                .max_by(|&x, &y| aug[x][col].norm().total_cmp(&aug[y][col].norm()))
                .unwrap_or(col);
            if aug[pivot][col].norm() < 1e-14 {
                return Err(LtiError::PoleAtFrequency { omega });
            }
            aug.swap(col, pivot);
            for r in (col + 1)..m {
                let f = aug[r][col] / aug[col][col];
                for k in col..=m {
                    let v = aug[col][k];
                    aug[r][k] -= f * v;
                }
            }
        }
        let mut x = vec![Complex64::new(0.0, 0.0); m];
        for i in (0..m).rev() {
            let mut acc = aug[i][m];
            for k in (i + 1)..m {
                acc -= aug[i][k] * x[k];
            }
            x[i] = acc / aug[i][i];
        }
        Ok(self
            .c
            .iter()
            .zip(&x)
            .zip(&scale)
            .map(|((c, x), d)| x * (*c * d))
            .sum())
    }
}

/// Osborne balancing of the square part of an augmented system `[M | b]`.
///
/// Replaces `M` by `D^{-1} M D` and `b` by `D^{-1} b` with `D` a diagonal of
/// powers of two, and returns `D`; the original solution is `D x`. Companion
/// matrices at high frequency have solution entries spread over many orders of
/// magnitude, and without this the small ones lose relative accuracy.
fn balance(aug: &mut [Vec<Complex64>]) -> Vec<f64> {
    let m = aug.len();
    let mut d = vec![1.0; m];
    for _ in 0..100 {
        let mut done = true;
        for i in 0..m {
            let c: f64 = (0..m).filter(|&k| k != i).map(|k| aug[k][i].l1_norm()).sum();
            let r: f64 = (0..m).filter(|&k| k != i).map(|k| aug[i][k].l1_norm()).sum();
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let mut f = 1.0;
            let (mut cs, mut rs) = (c, r);
            while cs < rs / 2.0 {
                f *= 2.0;
                cs *= 2.0;
                rs /= 2.0;
            }
            while cs >= rs * 2.0 {
                f /= 2.0;
                cs /= 2.0;
                rs *= 2.0;
            }
            if (c * f + r / f) < 0.95 * (c + r) {
                done = false;
                d[i] *= f;
                for k in 0..m {
                    aug[k][i] *= f;
                }
                for v in aug[i].iter_mut() {
                    *v /= f;
                }
            }
        }
        if done {
            break;
        }
    }
    d
}

/// Frequency-sweep estimate of the IFP index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IfpEstimate {
    pub nu: f64,
    /// Frequency (rad/s) where the minimum of `Re H(jw)` was found.
    pub argmin_omega: f64,
    pub grid_points: usize,
    pub refined: bool,
}

/// Sweep settings for [`ifp_index_estimate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IfpSweep {
    pub omega_min: f64,
    pub omega_max: f64,
    pub points: usize,
}

impl Default for IfpSweep {
    fn default() -> Self {
        Self {
            omega_min: 1e-4,
            omega_max: 1e4,
            points: 2048,
        }
    }
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Estimates the IFP index as the infimum of `Re H(jw)`.
///
/// The minimum over a logarithmic grid is refined by golden-section search in
/// the bracket around the best grid point, and the low-frequency limit is
/// probed at `omega_min / {10, 100, 1000}`. Because it is a minimum over
/// finitely many frequencies the result can only overestimate the infimum.
pub fn ifp_index_estimate(h: &RationalTransfer, sweep: IfpSweep) -> Result<IfpEstimate, LtiError> {
    let IfpSweep {
        omega_min,
        omega_max,
        points,
    } = sweep;
    if !(omega_min > 0.0 && omega_min < omega_max && omega_max.is_finite()) {
        return Err(LtiError::InvalidSweep(format!(
            "need 0 < omega_min < omega_max, got [{omega_min}, {omega_max}]"
        )));
    }
    if points < 64 {
        return Err(LtiError::InvalidSweep(format!(
            "need at least 64 grid points, got {points}"
        )));
    }
    h.check_poles()?;

    let re = |w: f64| h.freq_response(w).map(|z| z.re);
    let ratio = (omega_max / omega_min).ln();
    let grid: Vec<f64> = (0..points)
        .map(|k| omega_min * (ratio * k as f64 / (points - 1) as f64).exp())
        .collect();

    let mut best_idx = 0;
    let mut best = f64::INFINITY;
    for (k, &w) in grid.iter().enumerate() {
        let v = re(w)?;
        if v < best {
            best = v;
            best_idx = k;
        }
    }
    let mut nu = best;
    let mut argmin = grid[best_idx];

    // golden-section refinement inside the neighbouring grid cells
    let mut lo = grid[best_idx.saturating_sub(1)];
    let mut hi = grid[(best_idx + 1).min(points - 1)];
    let stop = 1e-6 * grid[best_idx];
    let mut x1 = hi - GOLDEN * (hi - lo);
    let mut x2 = lo + GOLDEN * (hi - lo);
    let mut f1 = re(x1)?;
    let mut f2 = re(x2)?;
    while hi - lo >= stop {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - GOLDEN * (hi - lo);
            f1 = re(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + GOLDEN * (hi - lo);
            f2 = re(x2)?;
        }
    }
    for (w, v) in [(x1, f1), (x2, f2)] {
        if v < nu {
            nu = v;
            argmin = w;
        }
    }

    for div in [10.0, 100.0, 1000.0] {
        let w = omega_min / div;
        let v = re(w)?;
        if v < nu {
            nu = v;
            argmin = w;
        }
    }

    Ok(IfpEstimate {
        nu,
        argmin_omega: argmin,
        grid_points: points,
        refined: true,
    })
}
