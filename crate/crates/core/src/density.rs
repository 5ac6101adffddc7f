//! Time-delay embedding and leave-one-out jackknife density estimates.
//!
//! Indices are 0-based throughout: embedded vector `i` is
//! `series[i..i + m]` and its target is `series[i + m]`.

use crate::error::{Result, RlenError};
use crate::kernels::{check_bandwidth, KernelSpec, PointKernel};

/// Delay embedding of one series at lag order `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    series: Vec<f64>,
    m: usize,
}

impl Embedding {
    /// Requires `1 <= m <= N - 2` and values in `[0, 1]`.
    pub fn new(series: &[f64], m: usize) -> Result<Self> {
        let big_n = series.len();
        if m == 0 || big_n < 2 || m > big_n - 2 {
            return Err(RlenError::arg(format!(
                "lag order {m} outside [1, N - 2] for N = {big_n}"
            )));
        }
        check_unit_interval(series)?;
        Ok(Embedding {
            series: series.to_vec(),
            m,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Effective sample count `n = N - m`.
    pub fn n(&self) -> usize {
        self.series.len() - self.m
    }

    pub fn series(&self) -> &[f64] {
        &self.series
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.series[i..i + self.m]
    }

    pub fn target(&self, i: usize) -> f64 {
        self.series[i + self.m]
    }

    pub fn vectors(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.n()).map(move |i| self.vector(i))
    }

    pub fn targets(&self) -> &[f64] {
        &self.series[self.m..]
    }
}

/// Convenience wrapper over [`Embedding::new`].
pub fn embed(series: &[f64], m: usize) -> Result<Embedding> {
    Embedding::new(series, m)
}

pub(crate) fn check_unit_interval(series: &[f64]) -> Result<()> {
    if let Some((i, v)) = series
        .iter()
        .enumerate()
        .find(|(_, v)| !(0.0..=1.0).contains(*v))
    {
        return Err(RlenError::domain(format!(
            "value {v} at index {i} outside [0, 1]"
        )));
    }
    Ok(())
}

fn check_points(points: &[Vec<f64>]) -> Result<usize> {
    if points.len() < 2 {
        return Err(RlenError::arg(format!(
            "leave-one-out density needs n >= 2, got {}",
            points.len()
        )));
    }
    let d = points[0].len();
    if d == 0 || points.iter().any(|p| p.len() != d) {
        return Err(RlenError::arg("points must share one dimension d >= 1"));
    }
    for p in points {
        check_unit_interval(p)?;
    }
    Ok(d)
}

/// `(n - 1)^{-1} sum_{j != i} K_h(p_i - p_j)` with the product jackknife kernel.
pub fn loo_density(kernel: &KernelSpec, points: &[Vec<f64>], i: usize, h: f64) -> Result<f64> {
    check_bandwidth(h)?;
    check_points(points)?;
    if i >= points.len() {
        return Err(RlenError::arg(format!(
            "index {i} out of range for {} points",
            points.len()
        )));
    }
    let inv_h = 1.0 / h;
    let pks: Vec<PointKernel> = points[i].iter().map(|&x| kernel.point_kernel(x, h)).collect();
    let mut acc = 0.0;
    for (j, q) in points.iter().enumerate() {
        if j != i {
            acc += product(kernel, &pks, &points[i], q, inv_h);
        }
    }
    Ok(acc / (points.len() - 1) as f64)
}

#[inline]
fn product(kernel: &KernelSpec, pks: &[PointKernel], p: &[f64], q: &[f64], inv_h: f64) -> f64 {
    let mut w = 1.0;
    for ((pk, &x), &y) in pks.iter().zip(p).zip(q) {
        w *= kernel.eval_pair(pk, x, y, inv_h);
        if w == 0.0 {
            return 0.0;
        }
    }
    w
}

/// All `n` leave-one-out densities through the full `n x n` kernel matrix.
pub fn loo_densities_full(kernel: &KernelSpec, points: &[Vec<f64>], h: f64) -> Result<Vec<f64>> {
    check_bandwidth(h)?;
    check_points(points)?;
    let n = points.len();
    let inv_h = 1.0 / h;
    let mut mat = vec![0.0; n * n];
    for (i, p) in points.iter().enumerate() {
        let pks: Vec<PointKernel> = p.iter().map(|&x| kernel.point_kernel(x, h)).collect();
        for (j, q) in points.iter().enumerate() {
            if j != i {
                mat[i * n + j] = product(kernel, &pks, p, q, inv_h);
            }
        }
    }
    let scale = 1.0 / (n - 1) as f64;
    Ok(mat
        .chunks(n)
        .map(|row| row.iter().sum::<f64>() * scale)
        .collect())
}

/// Leave-one-out densities of the three embeddings used by the entropy
/// estimator: joint (`m + 1` coordinates), leading block (`m`) and last
/// coordinate (`1`).
#[derive(Debug, Clone, PartialEq)]
pub struct LooDensities {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub g1: Vec<f64>,
}

/// Computes [`LooDensities`] without materialising any kernel matrix.
///
/// Every coordinate kernel value `K_h(x_t - x_{t+d})` is shared by all
/// embedded pairs at offset `d`, so each offset is evaluated once along the
/// series and the per-pair products are formed from it. Summation order per
/// point matches [`loo_densities_full`] (ascending partner index).
pub fn series_loo_densities(
    kernel: &KernelSpec,
    series: &[f64],
    m: usize,
    h: f64,
) -> Result<LooDensities> {
    check_bandwidth(h)?;
    let emb = Embedding::new(series, m)?;
    let n = emb.n();
    let x = emb.series();
    let inv_h = 1.0 / h;
    let pks: Vec<PointKernel> = x.iter().map(|&v| kernel.point_kernel(v, h)).collect();
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut g1 = vec![0.0; n];
    let mut w = vec![0.0; x.len()];
    let span = n as isize;
    for d in -(span - 1)..span {
        if d == 0 {
            continue;
        }
        // pairs (i, i + d) with both in [0, n)
        let i_lo = (-d).max(0) as usize;
        let i_hi = (span - d.max(0)) as usize;
        // coordinates t = i + k, k in [0, m]
        for t in i_lo..i_hi + m {
            let u = (t as isize + d) as usize;
            w[t] = kernel.eval_pair(&pks[t], x[t], x[u], inv_h);
        }
        for i in i_lo..i_hi {
            let last = w[i + m];
            g1[i] += last;
            let mut prod = 1.0;
            for &wk in &w[i..i + m] {
                prod *= wk;
                if prod == 0.0 {
                    break;
                }
            }
            if prod != 0.0 {
                g[i] += prod;
                f[i] += prod * last;
            }
        }
    }
    let scale = 1.0 / (n - 1) as f64;
    for v in f.iter_mut().chain(g.iter_mut()).chain(g1.iter_mut()) {
        *v *= scale;
    }
    Ok(LooDensities { f, g, g1 })
}

/// The three point sets behind [`LooDensities`], for the full-matrix path.
pub fn embedding_point_sets(emb: &Embedding) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let m = emb.m();
    let x = emb.series();
    let joint = (0..emb.n()).map(|i| x[i..=i + m].to_vec()).collect();
    let lead = emb.vectors().map(<[f64]>::to_vec).collect();
    let last = emb.targets().iter().map(|&v| vec![v]).collect();
    (joint, lead, last)
}
