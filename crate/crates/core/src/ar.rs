//! Gaussian autoregressive processes: stationarity, autocorrelations and the
//! closed-form relative entropies used as oracles for the estimator.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RlenError};

/// `x_i = sum_k phi_k x_{i-k} + e_i`, `e_i ~ N(0, sigma2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArSpec {
    pub phi: Vec<f64>,
    pub sigma2: f64,
}

impl ArSpec {
    pub fn new(phi: Vec<f64>, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(RlenError::arg(format!("innovation variance {sigma2} must be positive")));
        }
        check_stationary(&phi)?;
        Ok(ArSpec { phi, sigma2 })
    }

    /// Stationary variance `sigma2 / (1 - sum_k phi_k rho_k)`.
    pub fn variance(&self) -> Result<f64> {
        Ok(self.sigma2 / variance_factor(&self.phi)?)
    }
}

/// Spectral radius of the companion matrix of `phi`; NaN if the Schur
/// iteration does not converge.
pub fn spectral_radius(phi: &[f64]) -> f64 {
    let p = phi.iter().rposition(|v| *v != 0.0).map_or(0, |k| k + 1);
    if p == 0 {
        return 0.0;
    }
    let mut c = DMatrix::<f64>::zeros(p, p);
    for (k, &v) in phi[..p].iter().enumerate() {
        c[(0, k)] = v;
    }
    for k in 1..p {
        c[(k, k - 1)] = 1.0;
    }
    match c.try_schur(f64::EPSILON, 10_000) {
        Some(s) => s
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max),
        None => f64::NAN,
    }
}

/// Partial autocorrelations `phi_kk` by the step-down recursion; the
/// process is stationary iff every one lies strictly inside (-1, 1).
fn step_down(phi: &[f64]) -> Option<Vec<f64>> {
    let mut a = phi.to_vec();
    let mut pacf = vec![0.0; a.len()];
    for k in (1..=a.len()).rev() {
        let kappa = a[k - 1];
        if !(kappa.abs() < 1.0) {
            return None;
        }
        pacf[k - 1] = kappa;
        let d = 1.0 - kappa * kappa;
        a = (0..k - 1).map(|j| (a[j] + kappa * a[k - 2 - j]) / d).collect();
    }
    Some(pacf)
}

pub fn check_stationary(phi: &[f64]) -> Result<()> {
    if phi.iter().any(|v| !v.is_finite()) {
        return Err(RlenError::domain("non-finite AR coefficient"));
    }
    if step_down(phi).is_none() {
        return Err(RlenError::domain(format!(
            "AR coefficients {phi:?} not stationary (companion spectral radius {})",
            spectral_radius(phi)
        )));
    }
    Ok(())
}

/// Relative entropy of a stationary Gaussian AR(2) at lag order 2.
///
/// `0.5 ln((phi2 - 1) / phi_c)`, `phi_c = (phi2 + 1)(phi1^2 - phi2^2 + 2 phi2 - 1)`.
pub fn ar2_rlen(phi1: f64, phi2: f64) -> Result<f64> {
    if !(phi2 > -1.0 && phi2 < 1.0 - phi1.abs()) {
        return Err(RlenError::domain(format!(
            "AR(2) pair ({phi1}, {phi2}) not stationary"
        )));
    }
    let phi_c = (phi2 + 1.0) * (phi1 * phi1 - phi2 * phi2 + 2.0 * phi2 - 1.0);
    Ok(0.5 * ((phi2 - 1.0) / phi_c).ln())
}

/// Autocorrelations `rho_1..rho_k` of a stationary AR(p).
///
/// `rho_1..rho_p` solve the Yule-Walker system; later lags follow the
/// recursion `rho_k = sum_j phi_j rho_{k-j}`.
pub fn yule_walker_autocorr(phi: &[f64], k: usize) -> Result<Vec<f64>> {
    check_stationary(phi)?;
    let p = phi.len();
    // rho[0] = 1
    let mut rho = vec![1.0];
    if p > 0 {
        // row r (lag r + 1): rho_{r+1} - sum_{j != r+1} phi_j rho_{|r+1-j|} = phi_{r+1}
        let mut a = DMatrix::<f64>::identity(p, p);
        let mut b = DVector::<f64>::zeros(p);
        for r in 0..p {
            let lag = r + 1;
            for (jj, &ph) in phi.iter().enumerate() {
                let j = jj + 1;
                let d = lag.abs_diff(j);
                if d == 0 {
                    b[r] += ph;
                } else {
                    a[(r, d - 1)] -= ph;
                }
            }
        }
        let sol = a
            .lu()
            .solve(&b)
            .ok_or_else(|| RlenError::domain("singular Yule-Walker system"))?;
        rho.extend(sol.iter());
    }
    while rho.len() <= k {
        let t = rho.len();
        let next = phi
            .iter()
            .enumerate()
            .map(|(j, &ph)| if t > j { ph * rho[t - j - 1] } else { 0.0 })
            .sum();
        rho.push(next);
    }
    rho.truncate(k + 1);
    Ok(rho.split_off(1))
}

/// `1 - sum_k phi_k rho_k`, the ratio of innovation to process variance.
pub fn variance_factor(phi: &[f64]) -> Result<f64> {
    let rho = yule_walker_autocorr(phi, phi.len())?;
    Ok(1.0 - phi.iter().zip(&rho).map(|(a, b)| a * b).sum::<f64>())
}

fn toeplitz(rho0: &[f64], size: usize) -> DMatrix<f64> {
    DMatrix::from_fn(size, size, |i, j| rho0[i.abs_diff(j)])
}

fn log_det_spd(m: DMatrix<f64>) -> Result<f64> {
    let chol = m
        .cholesky()
        .ok_or_else(|| RlenError::NumericDegeneracy("correlation matrix not positive definite".into()))?;
    Ok(2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// Relative entropy between the leading `m + 1 - s` and trailing `s`
/// coordinates of `m + 1` consecutive values of a Gaussian AR process:
/// `0.5 log(|R11| |R22| / |R|)` from Toeplitz correlation matrices.
pub fn arp_rlen(phi: &[f64], m: usize, s: usize) -> Result<f64> {
    if m == 0 || s == 0 || s > m {
        return Err(RlenError::arg(format!("need 1 <= s <= m, got m = {m}, s = {s}")));
    }
    let mut rho0 = vec![1.0];
    rho0.extend(yule_walker_autocorr(phi, m)?);
    let full = log_det_spd(toeplitz(&rho0, m + 1))?;
    let r11 = log_det_spd(toeplitz(&rho0, m + 1 - s))?;
    let r22 = log_det_spd(toeplitz(&rho0, s))?;
    Ok(0.5 * (r11 + r22 - full))
}

/// Innovation variance for `phi_y` that gives the same stationary variance
/// as `phi_x` driven by innovations of variance `sigma1_sq`.
pub fn matched_noise_variance(phi_x: &[f64], phi_y: &[f64], sigma1_sq: f64) -> Result<f64> {
    Ok(sigma1_sq * variance_factor(phi_y)? / variance_factor(phi_x)?)
}
