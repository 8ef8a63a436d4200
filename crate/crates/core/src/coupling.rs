//! Static, odd, sector-bounded edge nonlinearities and the stacked edge
//! operator `Psi` applied componentwise to edge differences.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CouplingError {
    #[error("sector bounds must satisfy 0 < alpha_lo <= alpha_hi < inf, got [{lo}, {hi}]")]
    InvalidSector { lo: f64, hi: f64 },
    #[error("coupling gain must be positive and finite, got {0}")]
    InvalidGain(f64),
    #[error("custom table: {0}")]
    InvalidTable(String),
    #[error("expected {expected} edge values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CouplingKind {
    /// `a x`
    LinearGain { gain: f64 },
    /// `a sin(x)` for `|x| < pi/2`, `a x` otherwise.
    SaturatedSine { gain: f64 },
    /// Piecewise-linear through `(0, 0)` and the positive-half breakpoints,
    /// mirrored to negative `x`, and extended past the last breakpoint with
    /// its secant slope.
    CustomTable { breakpoints: Vec<(f64, f64)> },
}

impl CouplingKind {
    fn validate(&self) -> Result<(), CouplingError> {
        match self {
            Self::LinearGain { gain } | Self::SaturatedSine { gain } => {
                if !(*gain > 0.0 && gain.is_finite()) {
                    return Err(CouplingError::InvalidGain(*gain));
                }
            }
            Self::CustomTable { breakpoints } => {
                if breakpoints.is_empty() {
                    return Err(CouplingError::InvalidTable("no breakpoints".into()));
                }
                let mut last = 0.0;
                for (k, &(x, y)) in breakpoints.iter().enumerate() {
                    if !x.is_finite() || !y.is_finite() {
                        return Err(CouplingError::InvalidTable(format!(
                            "breakpoint {k} is not finite"
                        )));
                    }
                    if x <= last {
                        return Err(CouplingError::InvalidTable(format!(
                            "breakpoint abscissae must be positive and strictly increasing (at {k})"
                        )));
                    }
                    last = x;
                }
            }
        }
        Ok(())
    }

    fn eval(&self, x: f64) -> f64 {
        match self {
            Self::LinearGain { gain } => gain * x,
            Self::SaturatedSine { gain } => {
                if x.abs() < FRAC_PI_2 {
                    gain * x.sin()
                } else {
                    gain * x
                }
            }
            Self::CustomTable { breakpoints } => {
                let ax = x.abs();
                let (mut x0, mut y0) = (0.0, 0.0);
                for &(x1, y1) in breakpoints {
                    if ax <= x1 {
                        let y = y0 + (y1 - y0) * (ax - x0) / (x1 - x0);
                        return if x < 0.0 { -y } else { y };
                    }
                    x0 = x1;
                    y0 = y1;
                }
                let y = y0 / x0 * ax;
                if x < 0.0 {
                    -y
                } else {
                    y
                }
            }
        }
    }
}

/// One edge coupling with its declared sector `[alpha_lo, alpha_hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorCoupling {
    #[serde(flatten)]
    pub kind: CouplingKind,
    pub alpha_lo: f64,
    pub alpha_hi: f64,
}

impl SectorCoupling {
    pub fn new(kind: CouplingKind, alpha_lo: f64, alpha_hi: f64) -> Result<Self, CouplingError> {
        kind.validate()?;
        if !(alpha_lo > 0.0 && alpha_lo <= alpha_hi && alpha_hi.is_finite()) {
            return Err(CouplingError::InvalidSector {
                lo: alpha_lo,
                hi: alpha_hi,
            });
        }
        Ok(Self {
            kind,
            alpha_lo,
            alpha_hi,
        })
    }

    pub fn linear(gain: f64) -> Result<Self, CouplingError> {
        Self::new(CouplingKind::LinearGain { gain }, gain, gain)
    }

    /// Saturated sine with its tight sector `[2a/pi, a]`; the lower bound is
    /// the infimum of `sin(x)/x` on `|x| < pi/2`.
    pub fn saturated_sine(gain: f64) -> Result<Self, CouplingError> {
        Self::new(
            CouplingKind::SaturatedSine { gain },
            gain * std::f64::consts::FRAC_2_PI,
            gain,
        )
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.kind.eval(x)
    }
}

/// Observed ratio range of a coupling on a sample grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorCheck {
    pub alpha_lo_observed: f64,
    pub alpha_hi_observed: f64,
    pub odd: bool,
    pub pass: bool,
}

/// Samples `theta(x)/x` on `x = ±range * m / samples`, `m = 1..=samples`, and
/// compares it with the declared sector (slack 1e-9). Oddness is checked on the
/// same grid.
pub fn sector_verify(c: &SectorCoupling, samples: usize, range: f64) -> SectorCheck {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut odd = c.eval(0.0) == 0.0;
    for m in 1..=samples {
        let x = range * m as f64 / samples as f64;
        let fp = c.eval(x);
        let fm = c.eval(-x);
        if (fp + fm).abs() > 1e-12 * (1.0 + fp.abs()) {
            odd = false;
        }
        for (xs, f) in [(x, fp), (-x, fm)] {
            let r = f / xs;
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    let pass = odd && lo >= c.alpha_lo - 1e-9 && hi <= c.alpha_hi + 1e-9;
    SectorCheck {
        alpha_lo_observed: lo,
        alpha_hi_observed: hi,
        odd,
        pass,
    }
}

/// Per-edge couplings in canonical edge order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingBank {
    couplings: Vec<SectorCoupling>,
}

impl CouplingBank {
    pub fn new(couplings: Vec<SectorCoupling>) -> Self {
        Self { couplings }
    }

    pub fn len(&self) -> usize {
        self.couplings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.couplings.is_empty()
    }

    pub fn couplings(&self) -> &[SectorCoupling] {
        &self.couplings
    }

    pub fn get(&self, k: usize) -> &SectorCoupling {
        &self.couplings[k]
    }

    /// Smallest lower sector bound over all edges.
    pub fn alpha_lo_min(&self) -> f64 {
        self.couplings
            .iter()
            .map(|c| c.alpha_lo)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn psi_apply(&self, a: &[f64]) -> Result<Vec<f64>, CouplingError> {
        let mut out = vec![0.0; a.len()];
        self.psi_apply_into(a, &mut out)?;
        Ok(out)
    }

    pub fn psi_apply_into(&self, a: &[f64], out: &mut [f64]) -> Result<(), CouplingError> {
        if a.len() != self.len() || out.len() != self.len() {
            return Err(CouplingError::LengthMismatch {
                expected: self.len(),
                got: a.len(),
            });
        }
        for ((c, &x), o) in self.couplings.iter().zip(a).zip(out.iter_mut()) {
            *o = c.eval(x);
        }
        Ok(())
    }
}
