//! Centering and scale constants of the estimator's asymptotic normal law
//! under independence.

use serde::{Deserialize, Serialize};

use crate::error::{Result, RlenError};
use crate::kernels::KernelSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryConstants {
    pub kappa: f64,
    pub tau: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub d0: f64,
    pub d1: f64,
    pub sigma_star2: f64,
    pub c1: f64,
    pub c2: f64,
    pub beta: f64,
    pub beta1: f64,
    pub beta2: f64,
}

/// Constants for lag order `m`, bandwidth `h` and effective sample size `n`.
///
/// `sqrt(n) h^{(m+1)/2} (2E + d0 + d1) / sigma_star` is approximately standard
/// normal when the series is independent.
pub fn theory_constants(kernel: &KernelSpec, m: usize, h: f64, n: usize) -> Result<TheoryConstants> {
    if m == 0 || n <= m + 2 {
        return Err(RlenError::arg(format!("need m >= 1 and n > m + 2, got m = {m}, n = {n}")));
    }
    if !(h > 0.0 && h <= 0.5) {
        return Err(RlenError::arg(format!("bandwidth {h} outside (0, 0.5]")));
    }
    let c = kernel.constants;
    let (nf, mf) = (n as f64, m as f64);
    let mi = m as i32;

    let d0 = c.kappa.powi(mi + 1) * h.powi(-(mi + 1)) / (nf - 1.0);
    let c1 = (2.0 * nf - mf - 1.0) * mf / ((nf - mf - 1.0) * (nf - mf));
    let c2 = (2.0 * nf - mf) * (mf - 1.0) / ((nf - mf) * (nf - mf + 1.0));
    let d1 = (nf - 2.0) / (nf - 1.0) * (c1 * (c.tau.powi(mi + 1) - 1.0) - c2 * (c.tau.powi(mi) - 1.0));

    let beta = 2.0 * nf * (nf - mf) * (nf - mf + 1.0) / (nf * nf * (nf - 1.0).powi(2));
    let beta1 = beta * (nf - 2.0).powi(2) / (nf - 1.0).powi(2);
    let beta2 = beta * (nf - 2.0) / (nf - 1.0);
    let sigma_star2 = 2.0 * beta * c.kappa.powi(mi) + beta1 * c.tau1.powi(mi) + 2.0 * beta2 * c.tau2.powi(mi);

    Ok(TheoryConstants {
        kappa: c.kappa,
        tau: c.tau,
        tau1: c.tau1,
        tau2: c.tau2,
        d0,
        d1,
        sigma_star2,
        c1,
        c2,
        beta,
        beta1,
        beta2,
    })
}

impl TheoryConstants {
    /// `sqrt(n) h^{(m+1)/2} (2 e + d0 + d1) / sigma_star`.
    pub fn standardize(&self, e: f64, m: usize, h: f64, n: usize) -> f64 {
        (n as f64).sqrt() * h.powf((m as f64 + 1.0) / 2.0) * (2.0 * e + self.d0 + self.d1)
            / self.sigma_star2.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn reference_values() {
        let k = KernelSpec::default();
        let t = theory_constants(&k, 1, 0.5, 101).unwrap();
        assert_abs_diff_eq!(t.kappa, 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(t.d0, 0.0144, epsilon = 1e-15);
        assert!(t.tau > 0.0 && t.tau < 1.0);
        assert!(t.d0 > 0.0 && t.sigma_star2 > 0.0);
        // c2 vanishes at m = 1
        assert_eq!(t.c2, 0.0);
        assert!(theory_constants(&k, 1, 0.2, 3).is_err());
        assert!(theory_constants(&k, 1, 0.6, 100).is_err());
    }

    #[test]
    fn large_n_limits() {
        let k = KernelSpec::default();
        let n = 10_000_000;
        let t = theory_constants(&k, 2, 0.1, n).unwrap();
        // beta -> 2/n, so n sigma_star2 -> 2 (2 kappa^m + tau1^m + 2 tau2^m)
        let c = k.constants;
        let lim = 2.0 * (2.0 * c.kappa.powi(2) + c.tau1.powi(2) + 2.0 * c.tau2.powi(2));
        assert_abs_diff_eq!(t.sigma_star2 * n as f64, lim, epsilon = 1e-5);
    }
}
