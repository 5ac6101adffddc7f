//! Approximate entropy, `Phi^m(r) - Phi^{m+1}(r)`, with Chebyshev distance
//! and self-matches counted.

use serde::{Deserialize, Serialize};

use crate::error::{Result, RlenError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RMode {
    /// `r` is used as given.
    Absolute,
    /// `r` multiplies the sample standard deviation of each series.
    StdMultiple,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApEnConfig {
    pub m: usize,
    pub r: f64,
    pub r_mode: RMode,
}

impl Default for ApEnConfig {
    fn default() -> Self {
        ApEnConfig {
            m: 2,
            r: 0.2,
            r_mode: RMode::StdMultiple,
        }
    }
}

impl ApEnConfig {
    /// Tolerance in the units of `series`.
    pub fn resolve_r(&self, series: &[f64]) -> f64 {
        match self.r_mode {
            RMode::Absolute => self.r,
            RMode::StdMultiple => self.r * sample_std(series),
        }
    }
}

pub(crate) fn sample_std(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    if x.len() < 2 {
        return 0.0;
    }
    let mean = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// `Phi^k(r)`: mean log fraction of length-`k` templates within `r` of each
/// template.
fn phi(x: &[f64], k: usize, r: f64) -> f64 {
    let count = x.len() - k + 1;
    let mut total = 0.0;
    for i in 0..count {
        let a = &x[i..i + k];
        let matches = (0..count)
            .filter(|&j| {
                x[j..j + k]
                    .iter()
                    .zip(a)
                    .all(|(p, q)| (p - q).abs() <= r)
            })
            .count();
        total += (matches as f64 / count as f64).ln();
    }
    total / count as f64
}

pub fn apen(series: &[f64], config: &ApEnConfig) -> Result<f64> {
    let m = config.m;
    if m == 0 {
        return Err(RlenError::arg("ApEn template length must be >= 1"));
    }
    if series.len() <= m + 1 {
        return Err(RlenError::arg(format!(
            "ApEn needs N > m + 1, got N = {}, m = {m}",
            series.len()
        )));
    }
    let r = config.resolve_r(series);
    if !(r > 0.0) {
        return Err(RlenError::arg(format!("ApEn tolerance {r} must be positive")));
    }
    Ok(phi(series, m, r) - phi(series, m + 1, r))
}
