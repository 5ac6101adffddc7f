//! Series generators for the simulation studies, the logistic transform and
//! the minimum-moving-variance extractor.
//!
//! Every series draws its Gaussian innovations from a ChaCha20 stream
//! identified by `(seed, stream)`. Column `j` of a case matrix uses stream
//! `j`, so any column can be regenerated alone and results do not depend on
//! how columns are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ar::check_stationary;
use crate::error::{Result, RlenError};
use crate::matrix::SeriesMatrix;

pub use crate::ar::matched_noise_variance;

/// Seasonal ARIMA `phi(L) Phi(L) (1 - L)^d (1 - L^s)^ds x_t = c + theta(L) e_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SarimaSpec {
    /// `phi(L) = 1 - sum_k phi[k-1] L^k`
    pub phi: Vec<f64>,
    /// `Phi(L) = 1 - sum (coeff L^lag)` over `(lag, coeff)` pairs
    pub seasonal_ar: Vec<(usize, f64)>,
    /// `theta(L) = 1 + sum_k theta[k-1] L^k`
    pub theta: Vec<f64>,
    pub d: usize,
    pub ds: usize,
    pub s: usize,
    pub c: f64,
}

impl SarimaSpec {
    /// The three fitted processes of the muscle-contraction study.
    pub fn fitted_process(k: usize) -> Result<SarimaSpec> {
        match k {
            1 => Ok(SarimaSpec {
                phi: vec![1.9414, -0.693],
                seasonal_ar: vec![(75, 0.02037)],
                theta: vec![1.82984, 0.9931],
                d: 2,
                ds: 1,
                s: 75,
                c: 2.9993e-6,
            }),
            2 => Ok(SarimaSpec {
                phi: vec![1.9631, -0.9851],
                seasonal_ar: vec![(67, -0.2818)],
                theta: vec![1.9619, 0.9910],
                d: 2,
                ds: 1,
                s: 67,
                c: 2.1477e-6,
            }),
            3 => Ok(SarimaSpec {
                phi: vec![1.9768, -0.98801],
                seasonal_ar: vec![(81, 0.1474)],
                theta: vec![0.3421],
                d: 2,
                ds: 1,
                s: 81,
                c: 3.9159e-7,
            }),
            _ => Err(RlenError::arg(format!("no fitted process {k}; expected 1, 2 or 3"))),
        }
    }

    /// Coefficients of `1 - phi(L) Phi(L)` as `x_t = sum_k a[k-1] x_{t-k}`.
    fn combined_ar(&self) -> Vec<f64> {
        let mut seasonal = vec![0.0; self.seasonal_ar.iter().map(|p| p.0).max().unwrap_or(0)];
        for &(lag, coeff) in &self.seasonal_ar {
            seasonal[lag - 1] += coeff;
        }
        let poly = |coeffs: &[f64]| {
            let mut p = vec![1.0];
            p.extend(coeffs.iter().map(|v| -v));
            p
        };
        let (a, b) = (poly(&self.phi), poly(&seasonal));
        let mut prod = vec![0.0; a.len() + b.len() - 1];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                prod[i + j] += x * y;
            }
        }
        prod[1..].iter().map(|v| -v).collect()
    }

    fn validate(&self) -> Result<()> {
        check_stationary(&self.phi)?;
        let mut seasonal = vec![0.0; self.seasonal_ar.iter().map(|p| p.0).max().unwrap_or(0)];
        for &(lag, coeff) in &self.seasonal_ar {
            if lag == 0 {
                return Err(RlenError::arg("seasonal lag must be >= 1"));
            }
            seasonal[lag - 1] += coeff;
        }
        check_stationary(&seasonal)?;
        if self.ds > 0 && self.s == 0 {
            return Err(RlenError::arg("seasonal differencing needs a period s >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ModelKind {
    /// `x_i = -x_{i-2} e^{-x_{i-2}^2/2} + cos(alpha x_{i-2}) x_{i-1} / (1 + x_{i-2}^2) + e_i`
    Case1Model1 { alpha: f64 },
    /// As model 1 with `sin` in place of `cos`.
    Case1Model2 { alpha: f64 },
    /// `x_i = 0.138 + (0.316 + 0.982 x_{i-1}) e^{-3.89 x_{i-1}^2} + e_i`
    Case3Model1,
    /// `x_i = -0.437 - (0.659 + 1.260 x_{i-1}) e^{-3.89 x_{i-1}^2} + e_i`
    Case3Model2,
    Ar { phi: Vec<f64> },
    Sarima(SarimaSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Innovation variance.
    pub sigma2: f64,
    /// Starting values; they are the first entries of the unburnt series.
    pub init: Vec<f64>,
    /// Leading values discarded from the output.
    pub burnin: usize,
}

impl ModelSpec {
    pub fn case1_model1(alpha: f64) -> Self {
        ModelSpec {
            kind: ModelKind::Case1Model1 { alpha },
            sigma2: 0.4 * 0.4,
            init: vec![1.0, 1.0],
            burnin: 0,
        }
    }

    pub fn case1_model2(alpha: f64) -> Self {
        ModelSpec {
            kind: ModelKind::Case1Model2 { alpha },
            sigma2: 0.5 * 0.5,
            init: vec![1.0, 1.0],
            burnin: 0,
        }
    }

    pub fn case3_model1() -> Self {
        ModelSpec {
            kind: ModelKind::Case3Model1,
            sigma2: 0.04,
            init: vec![0.0],
            burnin: 500,
        }
    }

    pub fn case3_model2() -> Self {
        ModelSpec {
            kind: ModelKind::Case3Model2,
            sigma2: 0.04,
            init: vec![0.0],
            burnin: 500,
        }
    }

    /// Zero-started AR with a 500-step burn-in.
    pub fn ar(phi: Vec<f64>, sigma2: f64) -> Self {
        let p = phi.len();
        ModelSpec {
            kind: ModelKind::Ar { phi },
            sigma2,
            init: vec![0.0; p],
            burnin: 500,
        }
    }

    pub fn sarima(spec: SarimaSpec, sigma2: f64) -> Self {
        ModelSpec {
            kind: ModelKind::Sarima(spec),
            sigma2,
            init: Vec::new(),
            burnin: 0,
        }
    }

    fn order(&self) -> usize {
        match &self.kind {
            ModelKind::Case1Model1 { .. } | ModelKind::Case1Model2 { .. } => 2,
            ModelKind::Case3Model1 | ModelKind::Case3Model2 => 1,
            ModelKind::Ar { phi } => phi.len(),
            ModelKind::Sarima(_) => 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return Err(RlenError::arg(format!("innovation variance {} must be >= 0", self.sigma2)));
        }
        if self.init.len() != self.order() {
            return Err(RlenError::arg(format!(
                "model needs {} initial values, got {}",
                self.order(),
                self.init.len()
            )));
        }
        match &self.kind {
            ModelKind::Ar { phi } => check_stationary(phi),
            ModelKind::Sarima(s) => s.validate(),
            _ => Ok(()),
        }
    }
}

/// The generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `n` values of the model on stream 0 of `seed`.
pub fn gen_series(spec: &ModelSpec, n: usize, seed: u64) -> Result<Vec<f64>> {
    gen_series_stream(spec, n, seed, 0)
}

pub fn gen_series_stream(spec: &ModelSpec, n: usize, seed: u64, stream: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(RlenError::arg("series length must be positive"));
    }
    spec.validate()?;
    let mut rng = stream_rng(seed, stream);
    let sd = spec.sigma2.sqrt();
    let total = n + spec.burnin;
    let mut noise = || -> f64 {
        let z: f64 = StandardNormal.sample(&mut rng);
        sd * z
    };
    let mut x = spec.init.clone();
    x.truncate(total);
    match &spec.kind {
        ModelKind::Case1Model1 { alpha } | ModelKind::Case1Model2 { alpha } => {
            let use_cos = matches!(spec.kind, ModelKind::Case1Model1 { .. });
            while x.len() < total {
                let (a, b) = (x[x.len() - 2], x[x.len() - 1]);
                let osc = if use_cos { (alpha * a).cos() } else { (alpha * a).sin() };
                x.push(-a * (-a * a / 2.0).exp() + osc * b / (1.0 + a * a) + noise());
            }
        }
        ModelKind::Case3Model1 => {
            while x.len() < total {
                let a = x[x.len() - 1];
                x.push(0.138 + (0.316 + 0.982 * a) * (-3.89 * a * a).exp() + noise());
            }
        }
        ModelKind::Case3Model2 => {
            while x.len() < total {
                let a = x[x.len() - 1];
                x.push(-0.437 - (0.659 + 1.260 * a) * (-3.89 * a * a).exp() + noise());
            }
        }
        ModelKind::Ar { phi } => {
            while x.len() < total {
                let t = x.len();
                let v: f64 = phi.iter().enumerate().map(|(k, p)| p * x[t - k - 1]).sum();
                x.push(v + noise());
            }
        }
        ModelKind::Sarima(s) => {
            x = sarima_path(s, total, &mut noise);
        }
    }
    Ok(x.split_off(spec.burnin))
}

/// ARMA core with zero history, then seasonal and ordinary integration
/// from zero starting values.
fn sarima_path(s: &SarimaSpec, total: usize, noise: &mut impl FnMut() -> f64) -> Vec<f64> {
    let ar = s.combined_ar();
    let eps: Vec<f64> = (0..total).map(|_| noise()).collect();
    let mut w = vec![0.0; total];
    for t in 0..total {
        let mut v = s.c + eps[t];
        for (k, th) in s.theta.iter().enumerate() {
            if t > k {
                v += th * eps[t - k - 1];
            }
        }
        for (k, a) in ar.iter().enumerate() {
            if t > k {
                v += a * w[t - k - 1];
            }
        }
        w[t] = v;
    }
    for _ in 0..s.ds {
        for t in s.s..total {
            w[t] += w[t - s.s];
        }
    }
    for _ in 0..s.d {
        for t in 1..total {
            w[t] += w[t - 1];
        }
    }
    w
}

/// `1 / (1 + e^{-y})` elementwise.
pub fn logistic_transform(series: &[f64]) -> Vec<f64> {
    series.iter().map(|&y| logistic(y)).collect()
}

#[inline]
pub fn logistic(y: f64) -> f64 {
    1.0 / (1.0 + (-y).exp())
}

/// First 1-based start of the length-`window` slice with the smallest
/// sample variance, and that slice.
pub fn extract_min_variance_window(series: &[f64], window: usize) -> Result<(usize, Vec<f64>)> {
    if window == 0 || window > series.len() {
        return Err(RlenError::arg(format!(
            "window {window} must lie in [1, {}]",
            series.len()
        )));
    }
    let variances = moving_variances(series, window);
    let mut best = 0;
    for (i, &v) in variances.iter().enumerate() {
        if v < variances[best] {
            best = i;
        }
    }
    Ok((best + 1, series[best..best + window].to_vec()))
}

/// Sample variance of every length-`window` slice, updated in one pass.
pub fn moving_variances(series: &[f64], window: usize) -> Vec<f64> {
    let w = window as f64;
    let first = &series[..window];
    let mut mean = first.iter().sum::<f64>() / w;
    let mut m2: f64 = first.iter().map(|v| (v - mean).powi(2)).sum();
    let denom = if window > 1 { w - 1.0 } else { 1.0 };
    let mut out = Vec::with_capacity(series.len() - window + 1);
    out.push(m2.max(0.0) / denom);
    for i in window..series.len() {
        let (new, old) = (series[i], series[i - window]);
        let new_mean = mean + (new - old) / w;
        m2 += (new - old) * (new - new_mean + old - mean);
        mean = new_mean;
        out.push(m2.max(0.0) / denom);
    }
    out
}

/// Extension point for filtering series before extraction. The default
/// implementation leaves data untouched.
pub trait Preprocess {
    fn apply(&self, series: &[f64]) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PassThrough;

impl Preprocess for PassThrough {
    fn apply(&self, series: &[f64]) -> Vec<f64> {
        series.to_vec()
    }
}

/// Two regimes of series stacked as columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseMatrixSpec {
    pub spec1: ModelSpec,
    pub spec2: ModelSpec,
    pub p1: usize,
    pub p2: usize,
    pub n: usize,
    pub seed: u64,
}

impl CaseMatrixSpec {
    /// 30 + 70 nonlinear AR(2) series of length 400.
    pub fn case1(alpha: f64, seed: u64) -> Self {
        CaseMatrixSpec {
            spec1: ModelSpec::case1_model1(alpha),
            spec2: ModelSpec::case1_model2(alpha),
            p1: 30,
            p2: 70,
            n: 400,
            seed,
        }
    }

    /// 60 + 40 AR(3) series of length 500 with matched stationary variance.
    pub fn case2(seed: u64) -> Result<Self> {
        let phi_x = vec![0.8, -0.3, 0.1];
        let phi_y = vec![0.7, -0.3, 0.1];
        let s2 = matched_noise_variance(&phi_x, &phi_y, 0.1)?;
        Ok(CaseMatrixSpec {
            spec1: ModelSpec::ar(phi_x, 0.1),
            spec2: ModelSpec::ar(phi_y, s2),
            p1: 60,
            p2: 40,
            n: 500,
            seed,
        })
    }

    /// 160 + 80 nonlinear AR(1) series of length 500.
    pub fn case3(seed: u64) -> Self {
        CaseMatrixSpec {
            spec1: ModelSpec::case3_model1(),
            spec2: ModelSpec::case3_model2(),
            p1: 160,
            p2: 80,
            n: 500,
            seed,
        }
    }

    /// 1-based index of the first second-regime column, if any.
    pub fn true_cp(&self) -> Option<usize> {
        (self.p1 > 0 && self.p2 > 0).then_some(self.p1 + 1)
    }

    /// Raw (untransformed) column `j`.
    pub fn raw_column(&self, j: usize) -> Result<Vec<f64>> {
        let spec = if j < self.p1 { &self.spec1 } else { &self.spec2 };
        gen_series_stream(spec, self.n, self.seed, j as u64)
    }
}

/// Generates all columns, logistic-transformed.
pub fn build_case_matrix(spec: &CaseMatrixSpec) -> Result<(SeriesMatrix, Option<usize>)> {
    let total = spec.p1 + spec.p2;
    if total == 0 {
        return Err(RlenError::arg("case matrix needs at least one column"));
    }
    let columns = (0..total)
        .into_par_iter()
        .map(|j| {
            spec.raw_column(j)
                .map(|c| logistic_transform(&c))
                .map_err(|e| e.in_column(j, None))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((SeriesMatrix::from_columns(columns)?, spec.true_cp()))
}

/// Detection accuracy across replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionSummary {
    pub replications: usize,
    /// Replications with no change point.
    pub failures: usize,
    /// Mean `|tau - truth|` over successful replications, using the detected
    /// index nearest the truth (ties to the earlier index).
    pub mad: f64,
    pub exact: usize,
}

pub fn summarize_detections(detected: &[Vec<usize>], truth: usize) -> DetectionSummary {
    let mut failures = 0;
    let mut exact = 0;
    let mut dist = 0.0;
    for cps in detected {
        let Some(&nearest) = cps.iter().min_by_key(|&&c| (c.abs_diff(truth), c)) else {
            failures += 1;
            continue;
        };
        let d = nearest.abs_diff(truth);
        if d == 0 {
            exact += 1;
        }
        dist += d as f64;
    }
    let ok = detected.len() - failures;
    DetectionSummary {
        replications: detected.len(),
        failures,
        mad: if ok > 0 { dist / ok as f64 } else { f64::NAN },
        exact,
    }
}
