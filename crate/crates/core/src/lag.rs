//! Lag-order selection by a BIC criterion on leave-one-out Nadaraya-Watson
//! regression of `x_{i+m}` on `(x_i, ..., x_{i+m-1})`.
//!
//! Regression weights use the product jackknife kernel evaluated at
//! `x_j - x_i`, so the boundary branch is chosen by the data point `x_j`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::Embedding;
use crate::error::{Result, RlenError};
use crate::grid::GridSpec;
use crate::kernels::{check_bandwidth, KernelSpec, PointKernel};
use crate::matrix::SeriesMatrix;

/// Which leave-one-out prediction to use in cross-validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NwVariant {
    /// Numerator sums over every `j` including `i`; the normaliser excludes `i`.
    #[default]
    Printed,
    /// Both sums exclude `i`.
    Symmetric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagConfig {
    /// Largest lag order scanned.
    pub max_m: usize,
    pub grid: GridSpec,
    pub variant: NwVariant,
    /// Fraction of rows allowed a zero normaliser at one bandwidth before
    /// that bandwidth is discarded; failing rows are predicted by the mean
    /// target.
    pub isolated_tolerance: f64,
}

impl Default for LagConfig {
    fn default() -> Self {
        LagConfig {
            max_m: 10,
            grid: GridSpec::regression_default(),
            variant: NwVariant::Printed,
            isolated_tolerance: 0.01,
        }
    }
}

/// Kernel sums for every row of one embedding at one bandwidth.
#[derive(Debug, Clone)]
struct NwSums {
    /// `sum_{j != i} K(x_j - x_i) y_j`
    num: Vec<f64>,
    /// `sum_{j != i} K(x_j - x_i)`
    den: Vec<f64>,
    /// `K(x_i - x_i)`, with the branch of `x_i`
    diag: Vec<f64>,
}

fn point_kernels(kernel: &KernelSpec, x: &[f64], h: f64) -> Vec<PointKernel> {
    x.iter().map(|&v| kernel.point_kernel(v, h)).collect()
}

/// Offset-by-offset accumulation: the coordinate weight
/// `K(x_{t+d} - x_t)` is shared by every pair `(i, i + d)` covering `t`.
fn nw_sums(kernel: &KernelSpec, x: &[f64], m: usize, h: f64) -> NwSums {
    let n = x.len() - m;
    let inv_h = 1.0 / h;
    let pks = point_kernels(kernel, x, h);
    let mut num = vec![0.0; n];
    let mut den = vec![0.0; n];
    let diag: Vec<f64> = (0..n)
        .map(|i| {
            (i..i + m)
                .map(|t| kernel.eval_pair(&pks[t], x[t], x[t], inv_h))
                .product()
        })
        .collect();
    let mut w = vec![0.0; x.len()];
    let span = n as isize;
    for d in -(span - 1)..span {
        if d == 0 {
            continue;
        }
        let i_lo = (-d).max(0) as usize;
        let i_hi = (span - d.max(0)) as usize;
        for t in i_lo..i_hi + m - 1 {
            let u = (t as isize + d) as usize;
            w[t] = kernel.eval_pair(&pks[u], x[u], x[t], inv_h);
        }
        for i in i_lo..i_hi {
            let mut prod = 1.0;
            for &wk in &w[i..i + m] {
                prod *= wk;
                if prod == 0.0 {
                    break;
                }
            }
            if prod != 0.0 {
                let j = (i as isize + d) as usize;
                num[i] += prod * x[j + m];
                den[i] += prod;
            }
        }
    }
    NwSums { num, den, diag }
}

/// Cross-validated fit at one bandwidth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvFit {
    pub h: f64,
    /// Mean leave-one-out squared prediction error.
    pub sigma2: f64,
    /// Effective degrees of freedom `tr(L)`.
    pub v: f64,
    /// Rows whose prediction fell back to the mean target.
    pub imputed: usize,
}

fn evaluate_sums(
    s: &NwSums,
    targets: &[f64],
    h: f64,
    variant: NwVariant,
    tolerance: f64,
) -> Result<CvFit> {
    let n = targets.len();
    let mean = targets.iter().sum::<f64>() / n as f64;
    let mut sse = 0.0;
    let mut v = 0.0;
    let mut failed = Vec::new();
    for i in 0..n {
        let full = s.den[i] + s.diag[i];
        // signed boundary weights can cancel, so a non-positive normaliser is
        // treated like an empty neighbourhood; the mean fallback weighs row i
        // by 1/n
        let pred = if s.den[i] > 0.0 && full > 0.0 {
            v += s.diag[i] / full;
            match variant {
                NwVariant::Printed => (s.num[i] + s.diag[i] * targets[i]) / s.den[i],
                NwVariant::Symmetric => s.num[i] / s.den[i],
            }
        } else {
            failed.push(i);
            v += 1.0 / n as f64;
            mean
        };
        sse += (targets[i] - pred).powi(2);
    }
    if !failed.is_empty() && failed.len() as f64 >= tolerance * n as f64 {
        return Err(RlenError::IsolatedPoint { index: failed[0], h });
    }
    Ok(CvFit {
        h,
        sigma2: sse / n as f64,
        v,
        imputed: failed.len(),
    })
}

/// Leave-one-out prediction of `targets[i]` (no fallback).
pub fn nw_loo_predict(
    kernel: &KernelSpec,
    emb: &Embedding,
    h: f64,
    i: usize,
    variant: NwVariant,
) -> Result<f64> {
    check_bandwidth(h)?;
    let n = emb.n();
    if i >= n {
        return Err(RlenError::arg(format!("index {i} out of range for n = {n}")));
    }
    let row = weight_row(kernel, emb, h, i);
    let (mut num, mut den) = (0.0, 0.0);
    for (j, &w) in row.iter().enumerate() {
        if j != i {
            num += w * emb.target(j);
            den += w;
        }
    }
    if !(den > 0.0) {
        return Err(RlenError::IsolatedPoint { index: i, h });
    }
    if variant == NwVariant::Printed {
        num += row[i] * emb.target(i);
    }
    Ok(num / den)
}

/// `K(x_j - x_i)` for all `j`.
fn weight_row(kernel: &KernelSpec, emb: &Embedding, h: f64, i: usize) -> Vec<f64> {
    let inv_h = 1.0 / h;
    let xi = emb.vector(i);
    (0..emb.n())
        .map(|j| {
            emb.vector(j)
                .iter()
                .zip(xi)
                .map(|(&a, &b)| kernel.eval_pair(&kernel.point_kernel(a, h), a, b, inv_h))
                .product()
        })
        .collect()
}

/// The `n x n` smoother matrix `L` (row-major); rows sum to one.
pub fn smoother_matrix(kernel: &KernelSpec, emb: &Embedding, h: f64) -> Result<Vec<f64>> {
    check_bandwidth(h)?;
    let mut out = Vec::with_capacity(emb.n() * emb.n());
    for i in 0..emb.n() {
        let row = weight_row(kernel, emb, h, i);
        let total: f64 = row.iter().sum();
        if !(total > 0.0) {
            return Err(RlenError::IsolatedPoint { index: i, h });
        }
        out.extend(row.iter().map(|w| w / total));
    }
    Ok(out)
}

/// `tr(L) = sum_i K_i(0) / sum_s K(x_s - x_i)`, without forming `L`.
pub fn effective_dof(kernel: &KernelSpec, emb: &Embedding, h: f64) -> Result<f64> {
    check_bandwidth(h)?;
    let s = nw_sums(kernel, emb.series(), emb.m(), h);
    let mut v = 0.0;
    for i in 0..emb.n() {
        let full = s.den[i] + s.diag[i];
        if !(full > 0.0) {
            return Err(RlenError::IsolatedPoint { index: i, h });
        }
        v += s.diag[i] / full;
    }
    Ok(v)
}

/// Cross-validated fit at every grid bandwidth that is not disqualified.
fn cv_scan(
    kernel: &KernelSpec,
    emb: &Embedding,
    grid: &[f64],
    variant: NwVariant,
    tolerance: f64,
) -> Result<Vec<std::result::Result<CvFit, RlenError>>> {
    grid.iter()
        .map(|&h| {
            check_bandwidth(h)?;
            let s = nw_sums(kernel, emb.series(), emb.m(), h);
            Ok(evaluate_sums(&s, emb.targets(), h, variant, tolerance))
        })
        .collect()
}

/// Grid bandwidth minimising the leave-one-out squared error; ties go to the
/// smallest bandwidth.
pub fn loocv_bandwidth(
    kernel: &KernelSpec,
    emb: &Embedding,
    grid: &[f64],
    variant: NwVariant,
    tolerance: f64,
) -> Result<CvFit> {
    if grid.is_empty() {
        return Err(RlenError::arg("empty bandwidth grid"));
    }
    let mut hs = grid.to_vec();
    hs.sort_by(f64::total_cmp);
    let mut best: Option<CvFit> = None;
    for fit in cv_scan(kernel, emb, &hs, variant, tolerance)?.into_iter().flatten() {
        if best.as_ref().is_none_or(|b| fit.sigma2 < b.sigma2) {
            best = Some(fit);
        }
    }
    best.ok_or_else(|| {
        RlenError::Selection(format!(
            "every bandwidth in [{}, {}] has isolated points (m = {})",
            hs[0],
            hs[hs.len() - 1],
            emb.m()
        ))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BicScore {
    pub m: usize,
    pub bic: f64,
    /// `n log sigma2`
    pub fit_term: f64,
    /// `v log n`
    pub penalty_term: f64,
    pub fit: CvFit,
}

/// `B(m) = n log sigma2(m) + v(m, h*) log n` at the cross-validated bandwidth.
pub fn bic_score(kernel: &KernelSpec, series: &[f64], m: usize, cfg: &LagConfig) -> Result<BicScore> {
    let emb = Embedding::new(series, m)?;
    let n = emb.n();
    let t = emb.targets();
    if t.iter().all(|&v| v == t[0]) {
        return Err(RlenError::DegenerateFit { m });
    }
    let grid = cfg.grid.resolve_for(series, m)?;
    let fit = loocv_bandwidth(kernel, &emb, &grid, cfg.variant, cfg.isolated_tolerance)?;
    if !(fit.sigma2 > 0.0) {
        return Err(RlenError::DegenerateFit { m });
    }
    let nf = n as f64;
    let fit_term = nf * fit.sigma2.ln();
    let penalty_term = fit.v * nf.ln();
    Ok(BicScore {
        m,
        bic: fit_term + penalty_term,
        fit_term,
        penalty_term,
        fit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagSelectionReport {
    pub max_m: usize,
    /// Mean BIC across series for `m = 1..=max_m`.
    pub bic_bar: Vec<f64>,
    /// `per_series[j][m - 1]`
    pub per_series: Vec<Vec<BicScore>>,
    pub m_hat: usize,
    pub isolated_tolerance: f64,
    pub warnings: Vec<String>,
}

/// Neumaier-compensated sum.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Scores `m = 1..=max_m` on every column, averages across columns and
/// returns the minimiser (ties go to the smallest `m`).
pub fn select_lag(kernel: &KernelSpec, matrix: &SeriesMatrix, cfg: &LagConfig) -> Result<LagSelectionReport> {
    let big_m = cfg.max_m;
    if big_m == 0 || big_m + 2 > matrix.n_rows() {
        return Err(RlenError::arg(format!(
            "max lag {big_m} must lie in [1, N - 2] for N = {}",
            matrix.n_rows()
        )));
    }
    let jobs: Vec<(usize, usize)> = (0..matrix.n_cols())
        .flat_map(|j| (1..=big_m).map(move |m| (j, m)))
        .collect();
    let scores = jobs
        .par_iter()
        .map(|&(j, m)| bic_score(kernel, matrix.column(j), m, cfg).map_err(|e| e.in_column(j, Some(m))))
        .collect::<Result<Vec<_>>>()?;
    let per_series: Vec<Vec<BicScore>> = scores.chunks(big_m).map(<[BicScore]>::to_vec).collect();
    let jf = matrix.n_cols() as f64;
    let bic_bar: Vec<f64> = (0..big_m)
        .map(|k| compensated_sum(per_series.iter().map(|row| row[k].bic)) / jf)
        .collect();
    let mut m_hat = 1;
    for (k, &b) in bic_bar.iter().enumerate() {
        if b < bic_bar[m_hat - 1] {
            m_hat = k + 1;
        }
    }
    let warnings = per_series
        .iter()
        .enumerate()
        .flat_map(|(j, row)| {
            row.iter().filter(|s| s.fit.imputed > 0).map(move |s| {
                format!(
                    "column {j}, lag {}: {} isolated rows predicted by the mean target at h = {}",
                    s.m, s.fit.imputed, s.fit.h
                )
            })
        })
        .collect();
    Ok(LagSelectionReport {
        max_m: big_m,
        bic_bar,
        per_series,
        m_hat,
        isolated_tolerance: cfg.isolated_tolerance,
        warnings,
    })
}
