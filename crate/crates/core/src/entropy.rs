//! The relative-entropy estimator and its bandwidth selection.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::series_loo_densities;
use crate::error::{Result, RlenError};
use crate::grid::GridSpec;
use crate::kernels::KernelSpec;
use crate::matrix::SeriesMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    /// Estimated relative entropy in nats.
    pub value: f64,
    pub m: usize,
    pub h: f64,
    /// Number of indices with all three densities positive.
    pub s_count: usize,
    pub n: usize,
}

/// `n^{-1} sum_{i in S} log(f_i / (g_i g1_i))` over the indices `S` where all
/// three leave-one-out densities are positive.
///
/// The sum is divided by `n`, not by `|S|`.
pub fn rlen_estimate(kernel: &KernelSpec, series: &[f64], m: usize, h: f64) -> Result<EntropyEstimate> {
    let d = series_loo_densities(kernel, series, m, h)?;
    let n = d.f.len();
    let mut sum = 0.0;
    let mut s_count = 0;
    for i in 0..n {
        let (f, g, g1) = (d.f[i], d.g[i], d.g1[i]);
        if f > 0.0 && g > 0.0 && g1 > 0.0 {
            sum += (f / (g * g1)).ln();
            s_count += 1;
        }
    }
    if s_count == 0 {
        return Err(RlenError::EstimationDegenerate { n, h });
    }
    Ok(EntropyEstimate {
        value: sum / n as f64,
        m,
        h,
        s_count,
        n,
    })
}

/// Grid point maximising the estimate; ties go to the smallest bandwidth.
///
/// Degenerate grid points are skipped; if every point is degenerate the
/// error of the smallest bandwidth is returned.
pub fn select_bandwidth(
    kernel: &KernelSpec,
    series: &[f64],
    m: usize,
    grid: &[f64],
) -> Result<(f64, EntropyEstimate)> {
    if grid.is_empty() {
        return Err(RlenError::arg("empty bandwidth grid"));
    }
    let mut hs = grid.to_vec();
    hs.sort_by(f64::total_cmp);
    let mut best: Option<EntropyEstimate> = None;
    let mut first_err = None;
    for &h in &hs {
        match rlen_estimate(kernel, series, m, h) {
            Ok(e) => {
                if best.as_ref().is_none_or(|b| e.value > b.value) {
                    best = Some(e);
                }
            }
            Err(e @ RlenError::EstimationDegenerate { .. }) => {
                first_err.get_or_insert(e);
            }
            Err(e) => return Err(e),
        }
    }
    match best {
        Some(e) => Ok((e.h, e)),
        None => Err(first_err.expect("grid is nonempty")),
    }
}

/// Per-series entropy estimates with their selected bandwidths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyProfile {
    pub m: usize,
    pub estimates: Vec<EntropyEstimate>,
}

impl EntropyProfile {
    pub fn values(&self) -> Vec<f64> {
        self.estimates.iter().map(|e| e.value).collect()
    }

    pub fn bandwidths(&self) -> Vec<f64> {
        self.estimates.iter().map(|e| e.h).collect()
    }
}

/// Runs [`select_bandwidth`] on every column. Columns are processed in
/// parallel on the current rayon pool; the result does not depend on the
/// schedule.
pub fn entropy_profile(
    kernel: &KernelSpec,
    matrix: &SeriesMatrix,
    m: usize,
    grid: &GridSpec,
) -> Result<EntropyProfile> {
    let estimates = matrix
        .columns()
        .par_iter()
        .enumerate()
        .map(|(j, col)| {
            grid.resolve_for(col, m)
                .and_then(|hs| select_bandwidth(kernel, col, m, &hs))
                .map(|(_, e)| e)
                .map_err(|e| e.in_column(j, Some(m)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EntropyProfile { m, estimates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn uniform(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random::<f64>()).collect()
    }

    #[test]
    fn estimate_is_finite_and_repeatable() {
        let k = KernelSpec::default();
        let x = uniform(300, 1);
        let a = rlen_estimate(&k, &x, 2, 0.2).unwrap();
        let b = rlen_estimate(&k, &x, 2, 0.2).unwrap();
        assert!(a.value.is_finite());
        assert!(a.s_count >= 1 && a.s_count <= a.n);
        assert_eq!(a.n, 298);
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }

    #[test]
    fn empty_support_is_degenerate() {
        let k = KernelSpec::default();
        // widely separated points: no neighbours within any small bandwidth
        let x = [0.1, 0.5, 0.9, 0.3, 0.7];
        assert!(matches!(
            rlen_estimate(&k, &x, 1, 0.01),
            Err(RlenError::EstimationDegenerate { n: 4, .. })
        ));
    }

    #[test]
    fn selection_equals_rescan() {
        let k = KernelSpec::default();
        let x = uniform(200, 3);
        let grid = [0.3, 0.1, 0.2, 0.15];
        let (h, e) = select_bandwidth(&k, &x, 1, &grid).unwrap();
        let best = grid
            .iter()
            .map(|&h| rlen_estimate(&k, &x, 1, h).unwrap().value)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(e.value, best);
        assert_eq!(e.h, h);
        let (h1, _) = select_bandwidth(&k, &x, 1, &[0.25]).unwrap();
        assert_eq!(h1, 0.25);
        assert!(select_bandwidth(&k, &x, 1, &[]).is_err());
    }

    #[test]
    fn profile_matches_per_column_selection() {
        let k = KernelSpec::default();
        let a = uniform(120, 4);
        let b = uniform(120, 5);
        let mat = SeriesMatrix::from_columns(vec![a.clone(), b, a.clone()]).unwrap();
        let grid = GridSpec::Explicit(vec![0.15, 0.3]);
        let p = entropy_profile(&k, &mat, 1, &grid).unwrap();
        assert_eq!(p.estimates[0], p.estimates[2]);
        let (_, single) = select_bandwidth(&k, &a, 1, &[0.15, 0.3]).unwrap();
        assert_eq!(p.estimates[0], single);
    }

    #[test]
    fn column_errors_carry_coordinates() {
        let k = KernelSpec::default();
        let bad = SeriesMatrix::from_columns(vec![uniform(50, 6), vec![2.0; 50]]).unwrap();
        let err = entropy_profile(&k, &bad, 1, &GridSpec::Explicit(vec![0.2])).unwrap_err();
        assert!(matches!(err, RlenError::Column { column: 1, lag: Some(1), .. }), "{err}");
    }
}
