//! Mean-shift change-point detection on a scalar sequence.
//!
//! Segment cost is the within-segment sum of squared deviations. Change
//! points are reported 1-based as the first index of each new segment.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Result, RlenError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangePointResult {
    pub changepoints: Vec<usize>,
    pub segment_means: Vec<f64>,
    pub penalty: f64,
    /// Total segment cost plus `penalty` per change point.
    pub cost: f64,
}

/// O(1) segment costs from prefix sums of centred values.
struct SegmentCost {
    s1: Vec<f64>,
    s2: Vec<f64>,
}

impl SegmentCost {
    fn new(values: &[f64]) -> Self {
        let centre = values.iter().sum::<f64>() / values.len() as f64;
        let mut s1 = vec![0.0; values.len() + 1];
        let mut s2 = vec![0.0; values.len() + 1];
        for (i, v) in values.iter().enumerate() {
            let c = v - centre;
            s1[i + 1] = s1[i] + c;
            s2[i + 1] = s2[i] + c * c;
        }
        SegmentCost { s1, s2 }
    }

    /// Cost of `values[a..b]`.
    fn cost(&self, a: usize, b: usize) -> f64 {
        let sum = self.s1[b] - self.s1[a];
        let c = self.s2[b] - self.s2[a] - sum * sum / (b - a) as f64;
        c.max(0.0)
    }
}

fn tie_tolerance(values: &[f64]) -> f64 {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    1e-9 * (1.0 + ss)
}

/// Segment starts (0-based) reached by following back-pointers from `t`.
fn trace(back: &[usize], mut t: usize) -> Vec<usize> {
    let mut out = Vec::new();
    while t > 0 {
        let s = back[t];
        if s > 0 {
            out.push(s);
        }
        t = s;
    }
    out.reverse();
    out
}

/// `(cost, starts)` ordering: lower cost beyond `tol`, then fewer change
/// points, then lexicographically earlier starts.
fn better(a_cost: f64, a: &[usize], b_cost: f64, b: &[usize], tol: f64) -> bool {
    if a_cost < b_cost - tol {
        return true;
    }
    if a_cost > b_cost + tol {
        return false;
    }
    (a.len(), a) < (b.len(), b)
}

fn finish(values: &[f64], starts: Vec<usize>, penalty: f64, cost: &SegmentCost) -> ChangePointResult {
    let mut bounds = vec![0];
    bounds.extend(&starts);
    bounds.push(values.len());
    let segment_means = bounds
        .windows(2)
        .map(|w| values[w[0]..w[1]].iter().sum::<f64>() / (w[1] - w[0]) as f64)
        .collect();
    let total: f64 = bounds.windows(2).map(|w| cost.cost(w[0], w[1])).sum::<f64>() + penalty * starts.len() as f64;
    ChangePointResult {
        changepoints: starts.iter().map(|s| s + 1).collect(),
        segment_means,
        penalty,
        cost: total,
    }
}

fn check_args(values: &[f64], penalty: f64, min_seg: usize) -> Result<()> {
    if min_seg == 0 {
        return Err(RlenError::arg("min_seg must be >= 1"));
    }
    if values.len() < 2 * min_seg {
        return Err(RlenError::arg(format!(
            "sequence of length {} shorter than 2 * min_seg = {}",
            values.len(),
            2 * min_seg
        )));
    }
    if !(penalty >= 0.0 && penalty.is_finite()) {
        return Err(RlenError::arg(format!("penalty {penalty} must be finite and >= 0")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(RlenError::domain("non-finite value in sequence"));
    }
    Ok(())
}

/// Penalised optimal segmentation; `prune` switches PELT pruning on.
fn penalised(values: &[f64], penalty: f64, min_seg: usize, prune: bool) -> Result<ChangePointResult> {
    check_args(values, penalty, min_seg)?;
    let n = values.len();
    let cost = SegmentCost::new(values);
    let tol = tie_tolerance(values);
    let mut f = vec![f64::INFINITY; n + 1];
    let mut back = vec![0usize; n + 1];
    f[0] = -penalty;
    // (start, first end at which it is no longer a candidate)
    let mut cands: Vec<(usize, usize)> = vec![(0, usize::MAX)];
    for t in min_seg..=n {
        let mut best: Option<(f64, Vec<usize>, usize)> = None;
        for &(s, expiry) in &cands {
            if t >= expiry || t - s < min_seg {
                continue;
            }
            let c = f[s] + cost.cost(s, t) + penalty;
            let mut path = trace(&back, s);
            if s > 0 {
                path.push(s);
            }
            if best.as_ref().is_none_or(|(bc, bp, _)| better(c, &path, *bc, bp, tol)) {
                best = Some((c, path, s));
            }
        }
        if let Some((c, _, s)) = best {
            f[t] = c;
            back[t] = s;
        }
        if prune && f[t].is_finite() {
            // a start beaten at t can only be discarded once t itself is a
            // valid start, min_seg later
            for cand in cands.iter_mut() {
                let (s, expiry) = *cand;
                if t - s >= min_seg && f[s] + cost.cost(s, t) > f[t] + tol {
                    cand.1 = expiry.min(t + min_seg);
                }
            }
            cands.retain(|&(_, expiry)| expiry > t);
        }
        if f[t].is_finite() && t + min_seg <= n {
            cands.push((t, usize::MAX));
        }
    }
    Ok(finish(values, trace(&back, n), penalty, &cost))
}

/// PELT: exact minimiser of segment cost plus `penalty` per change point,
/// with every segment at least `min_seg` long.
pub fn pelt_detect(values: &[f64], penalty: f64, min_seg: usize) -> Result<ChangePointResult> {
    penalised(values, penalty, min_seg, true)
}

/// Same optimum as [`pelt_detect`] without pruning.
pub fn optimal_partitioning(values: &[f64], penalty: f64, min_seg: usize) -> Result<ChangePointResult> {
    penalised(values, penalty, min_seg, false)
}

/// Enumerates all `2^(n-1)` segmentations; for small `n` only.
pub fn exhaustive_detect(values: &[f64], penalty: f64, min_seg: usize) -> Result<ChangePointResult> {
    check_args(values, penalty, min_seg)?;
    let n = values.len();
    if n > 24 {
        return Err(RlenError::arg("exhaustive search limited to n <= 24"));
    }
    let cost = SegmentCost::new(values);
    let tol = tie_tolerance(values);
    let direct = |a: usize, b: usize| {
        let seg = &values[a..b];
        let mean = seg.iter().sum::<f64>() / seg.len() as f64;
        seg.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
    };
    let mut best: Option<(f64, Vec<usize>)> = None;
    for mask in 0u32..(1 << (n - 1)) {
        let starts: Vec<usize> = (1..n).filter(|s| mask & (1 << (s - 1)) != 0).collect();
        let mut bounds = vec![0];
        bounds.extend(&starts);
        bounds.push(n);
        if bounds.windows(2).any(|w| w[1] - w[0] < min_seg) {
            continue;
        }
        let c: f64 = bounds.windows(2).map(|w| direct(w[0], w[1])).sum::<f64>() + penalty * starts.len() as f64;
        if best.as_ref().is_none_or(|(bc, bs)| better(c, &starts, *bc, bs, tol)) {
            best = Some((c, starts));
        }
    }
    let (_, starts) = best.expect("a single segment is always feasible");
    Ok(finish(values, starts, penalty, &cost))
}

/// Optimal segmentation with exactly `k` change points.
pub fn dp_detect_k(values: &[f64], k: usize, min_seg: usize) -> Result<ChangePointResult> {
    if min_seg == 0 {
        return Err(RlenError::arg("min_seg must be >= 1"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(RlenError::domain("non-finite value in sequence"));
    }
    let n = values.len();
    if n == 0 || (k + 1) * min_seg > n {
        return Err(RlenError::arg(format!(
            "{k} change points infeasible for length {n} with min_seg {min_seg}"
        )));
    }
    let cost = SegmentCost::new(values);
    let tol = tie_tolerance(values);
    // d[s][t]: best cost of values[..t] in s + 1 segments, with starts
    let mut d: Vec<Vec<Option<(f64, Vec<usize>)>>> = vec![vec![None; n + 1]; k + 1];
    for t in min_seg..=n {
        d[0][t] = Some((cost.cost(0, t), Vec::new()));
    }
    for s in 1..=k {
        for t in (s + 1) * min_seg..=n {
            let mut best: Option<(f64, Vec<usize>)> = None;
            for u in s * min_seg..=t - min_seg {
                if let Some((pc, ps)) = &d[s - 1][u] {
                    let c = pc + cost.cost(u, t);
                    let mut path = ps.clone();
                    path.push(u);
                    if best.as_ref().is_none_or(|(bc, bp)| better(c, &path, *bc, bp, tol)) {
                        best = Some((c, path));
                    }
                }
            }
            d[s][t] = best;
        }
    }
    let (_, starts) = d[k][n].clone().expect("feasibility checked");
    Ok(finish(values, starts, 0.0, &cost))
}

/// `2 sigma^2 log n` with `sigma^2` half the sample variance of first
/// differences, a noise-variance estimate that ignores level shifts.
pub fn default_penalty(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 3 {
        return 0.0;
    }
    let diffs: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (diffs.len() - 1) as f64;
    2.0 * (var / 2.0) * (n as f64).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchTest {
    pub t: f64,
    pub df: f64,
    /// Two-sided p-value.
    pub p: f64,
}

/// Welch two-sample t-test with Satterthwaite degrees of freedom.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(RlenError::arg(format!(
            "Welch test needs two observations per group, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let moments = |x: &[f64]| {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var / n, n)
    };
    let (ma, qa, na) = moments(a);
    let (mb, qb, nb) = moments(b);
    let se2 = qa + qb;
    if se2 == 0.0 {
        return Ok(if ma == mb {
            WelchTest { t: 0.0, df: na + nb - 2.0, p: 1.0 }
        } else {
            WelchTest {
                t: (ma - mb).signum() * f64::INFINITY,
                df: na + nb - 2.0,
                p: 0.0,
            }
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    // P(|T| > |t|) = I_{df / (df + t^2)}(df / 2, 1 / 2)
    let p = beta_reg(df / 2.0, 0.5, df / (df + t * t));
    Ok(WelchTest { t, df, p })
}
