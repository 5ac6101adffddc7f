//! Bandwidth grids.

use serde::{Deserialize, Serialize};

use crate::apen::sample_std;
use crate::error::{Result, RlenError};

/// Largest bandwidth a generated grid may contain; the jackknife kernel
/// needs `h < 0.5`.
pub const MAX_GRID_BANDWIDTH: f64 = 0.49;

/// Multiplier applied to the rate `n^{-1/(4 + m)}` of a log grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GridScale {
    /// The rate as is.
    Unit,
    /// The rate times the sample standard deviation of the series.
    #[default]
    SampleStd,
}

/// Log-spaced bandwidths around `c = s n^{-1/(4 + m)}`, `s` given by the
/// scale, or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridSpec {
    LogSpaced {
        points: usize,
        lo_factor: f64,
        hi_factor: f64,
        scale: GridScale,
    },
    Explicit(Vec<f64>),
}

impl GridSpec {
    /// Default grid for entropy bandwidth selection.
    pub fn entropy_default() -> Self {
        GridSpec::LogSpaced {
            points: 20,
            lo_factor: 0.5,
            hi_factor: 4.0,
            scale: GridScale::SampleStd,
        }
    }

    /// Default grid for the regression bandwidth in lag selection.
    pub fn regression_default() -> Self {
        GridSpec::LogSpaced {
            points: 15,
            lo_factor: 0.5,
            hi_factor: 4.0,
            scale: GridScale::SampleStd,
        }
    }

    /// Bandwidths for lag order `m` on one series (`n = len - m` embedded
    /// points), ascending.
    pub fn resolve_for(&self, series: &[f64], m: usize) -> Result<Vec<f64>> {
        let n = series.len().saturating_sub(m);
        match self {
            GridSpec::LogSpaced {
                scale: GridScale::SampleStd,
                ..
            } => self.resolve_scaled(n, m, sample_std(series)),
            _ => self.resolve_scaled(n, m, 1.0),
        }
    }

    /// Bandwidths for sample size `n`, lag order `m` and spread `spread`
    /// (ignored unless the scale is [`GridScale::SampleStd`]), ascending.
    ///
    /// Endpoints above [`MAX_GRID_BANDWIDTH`] are capped there before
    /// spacing, so every point stays valid and distinct.
    pub fn resolve_scaled(&self, n: usize, m: usize, spread: f64) -> Result<Vec<f64>> {
        match self {
            GridSpec::Explicit(hs) => {
                if hs.is_empty() {
                    return Err(RlenError::arg("empty bandwidth grid"));
                }
                if let Some(h) = hs.iter().find(|h| !(**h > 0.0 && **h < 0.5)) {
                    return Err(RlenError::arg(format!("grid bandwidth {h} outside (0, 0.5)")));
                }
                let mut out = hs.clone();
                out.sort_by(f64::total_cmp);
                out.dedup();
                Ok(out)
            }
            &GridSpec::LogSpaced {
                points,
                lo_factor,
                hi_factor,
                scale,
            } => {
                if points == 0 || !(lo_factor > 0.0) || !(hi_factor >= lo_factor) || n == 0 {
                    return Err(RlenError::arg(format!(
                        "invalid log grid: {points} points, factors [{lo_factor}, {hi_factor}], n = {n}"
                    )));
                }
                let s = match scale {
                    GridScale::Unit => 1.0,
                    GridScale::SampleStd => spread,
                };
                if !(s > 0.0 && s.is_finite()) {
                    return Err(RlenError::arg(format!(
                        "bandwidth grid scale {s} must be positive (constant series?)"
                    )));
                }
                let c = s * (n as f64).powf(-1.0 / (4.0 + m as f64));
                let hi = (hi_factor * c).min(MAX_GRID_BANDWIDTH);
                let lo = (lo_factor * c).min(hi);
                Ok(log_spaced(lo, hi, points))
            }
        }
    }
}

/// `points` values from `lo` to `hi` equally spaced in log scale.
pub fn log_spaced(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 || lo == hi {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    let step = (b - a) / (points - 1) as f64;
    (0..points)
        .map(|i| {
            if i == points - 1 {
                hi
            } else {
                (a + step * i as f64).exp()
            }
        })
        .collect()
}
