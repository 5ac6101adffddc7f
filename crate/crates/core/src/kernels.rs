//! Base kernels, boundary-corrected jackknife kernels on `[0, 1]`, and the
//! product kernel used by every density and regression estimate.
//!
//! For an evaluation point `x` close to an edge of the unit interval the
//! kernel is replaced by the signed combination
//!
//! ```text
//! k_rho(u) = (1 + beta) K(u) / w0(rho) - (beta / alpha) K(u / alpha) / w0(rho / alpha)
//! ```
//!
//! with `rho` the distance to the edge in bandwidth units, `alpha = 2 - rho`
//! and `beta` chosen from the first kernel moments so that the first-order
//! boundary bias cancels. `k_rho` is supported on `[-alpha, rho]`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, RlenError};
use crate::quad::{adaptive_simpson, GaussLegendre};

/// Denominators of `beta` smaller than this are reported as degenerate.
pub const BETA_DENOMINATOR_EPS: f64 = 1e-12;

const SIMPSON_TOL: f64 = 1e-10;

/// Symmetric kernels supported on `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BaseKernel {
    /// `0.75 (1 - u^2)`
    #[default]
    Epanechnikov,
    /// `15/16 (1 - u^2)^2`
    Biweight,
}

impl BaseKernel {
    #[inline(always)]
    pub fn eval(self, u: f64) -> f64 {
        if !(-1.0..=1.0).contains(&u) {
            return 0.0;
        }
        let s = 1.0 - u * u;
        match self {
            BaseKernel::Epanechnikov => 0.75 * s,
            BaseKernel::Biweight => 0.9375 * s * s,
        }
    }

    /// `w_l(rho) = \int_{-1}^{rho} u^l K(u) du` from the antiderivative.
    fn moment_analytic(self, l: u32, rho: f64) -> f64 {
        let r = rho;
        match (self, l) {
            (BaseKernel::Epanechnikov, 0) => (2.0 + 3.0 * r - r * r * r) / 4.0,
            (BaseKernel::Epanechnikov, 1) => {
                let s = 1.0 - r * r;
                -0.1875 * s * s
            }
            (BaseKernel::Epanechnikov, 2) => r.powi(3) / 4.0 - 0.15 * r.powi(5) + 0.1,
            (BaseKernel::Biweight, 0) => {
                0.9375 * (r - 2.0 * r.powi(3) / 3.0 + r.powi(5) / 5.0 + 8.0 / 15.0)
            }
            (BaseKernel::Biweight, 1) => {
                let s = 1.0 - r * r;
                -0.9375 * s * s * s / 6.0
            }
            (BaseKernel::Biweight, 2) => {
                0.9375 * (r.powi(3) / 3.0 - 0.4 * r.powi(5) + r.powi(7) / 7.0 + 8.0 / 105.0)
            }
            _ => unreachable!("moment order checked by caller"),
        }
    }
}

/// Integral constants of a base kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConstants {
    /// `\int K^2`
    pub kappa: f64,
    /// `\int_{-1}^{1} \int_{-1}^{1} K(u) K(u + v) du dv`
    pub tau: f64,
    /// `\int_{-1}^{1} [\int K(u) K(u + v) du]^2 dv`
    pub tau1: f64,
    /// `\int\int K(u) K(v) K(u + v) du dv`
    pub tau2: f64,
}

/// A base kernel with its precomputed constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub base: BaseKernel,
    pub constants: KernelConstants,
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::new(BaseKernel::Epanechnikov)
    }
}

/// Boundary coefficients for relative edge distance `rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCoeff {
    pub rho: f64,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Side {
    Interior,
    Left,
    Right,
}

/// Jackknife kernel specialised to one evaluation point and bandwidth.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PointKernel {
    side: Side,
    rho: f64,
    alpha: f64,
    inv_alpha: f64,
    /// `(1 + beta) / w0(rho)`
    a: f64,
    /// `beta / (alpha w0(rho / alpha))`
    b: f64,
}

impl KernelSpec {
    pub fn new(base: BaseKernel) -> Self {
        KernelSpec {
            base,
            constants: compute_constants(base),
        }
    }

    /// `K(u)`, zero outside `[-1, 1]`.
    #[inline]
    pub fn base_eval(&self, u: f64) -> f64 {
        self.base.eval(u)
    }

    /// `w_l(rho)` for `l` in `{0, 1, 2}` and `rho` in `[0, 1]`.
    pub fn moment(&self, l: u32, rho: f64) -> Result<f64> {
        check_moment_args(l, rho)?;
        Ok(self.base.moment_analytic(l, rho))
    }

    /// `w_l(rho)` by adaptive Simpson quadrature. Independent of the
    /// closed forms used by [`KernelSpec::moment`].
    pub fn moment_quadrature(&self, l: u32, rho: f64) -> Result<f64> {
        check_moment_args(l, rho)?;
        let base = self.base;
        Ok(adaptive_simpson(
            |u| u.powi(l as i32) * base.eval(u),
            -1.0,
            rho,
            SIMPSON_TOL,
        ))
    }

    fn ratio(&self, rho: f64) -> f64 {
        self.base.moment_analytic(1, rho) / self.base.moment_analytic(0, rho)
    }

    /// `alpha = 2 - rho` and `beta = R1(rho) / (alpha R1(rho / alpha) - R1(rho))`.
    ///
    /// At `rho = 1` both parts of the boundary kernel coincide with `K`, so
    /// `beta` is set to zero there.
    pub fn boundary_coeff(&self, rho: f64) -> Result<BoundaryCoeff> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(RlenError::arg(format!("rho = {rho} outside [0, 1]")));
        }
        let alpha = 2.0 - rho;
        if rho == 1.0 {
            return Ok(BoundaryCoeff {
                rho,
                alpha,
                beta: 0.0,
            });
        }
        let r1 = self.ratio(rho);
        let den = alpha * self.ratio(rho / alpha) - r1;
        if den.abs() < BETA_DENOMINATOR_EPS {
            return Err(RlenError::NumericDegeneracy(format!(
                "boundary coefficient denominator {den:e} at rho = {rho}"
            )));
        }
        Ok(BoundaryCoeff {
            rho,
            alpha,
            beta: r1 / den,
        })
    }

    /// `k_rho(u)`, the boundary kernel in bandwidth units.
    pub fn boundary_kernel(&self, rho: f64, u: f64) -> Result<f64> {
        let c = self.boundary_coeff(rho)?;
        let pk = self.point_kernel_from(Side::Left, c);
        Ok(self.eval_point(&pk, u))
    }

    pub(crate) fn point_kernel_from(&self, side: Side, c: BoundaryCoeff) -> PointKernel {
        let w0 = self.base.moment_analytic(0, c.rho);
        let w0s = self.base.moment_analytic(0, c.rho / c.alpha);
        PointKernel {
            side,
            rho: c.rho,
            alpha: c.alpha,
            inv_alpha: 1.0 / c.alpha,
            a: (1.0 + c.beta) / w0,
            b: c.beta / (c.alpha * w0s),
        }
    }

    /// The kernel used when `x` is the evaluation point.
    ///
    /// Edge distances whose `beta` denominator is below
    /// [`BETA_DENOMINATOR_EPS`] sit within about `1e-6 h` of the interior
    /// region, where `k_rho` has already converged to `K`; they use the
    /// interior kernel.
    pub(crate) fn point_kernel(&self, x: f64, h: f64) -> PointKernel {
        let interior = PointKernel {
            side: Side::Interior,
            rho: 1.0,
            alpha: 1.0,
            inv_alpha: 1.0,
            a: 1.0,
            b: 0.0,
        };
        let (side, rho) = if x < h {
            (Side::Left, x / h)
        } else if x > 1.0 - h {
            (Side::Right, (1.0 - x) / h)
        } else {
            return interior;
        };
        match self.boundary_coeff(rho.clamp(0.0, 1.0)) {
            Ok(c) => self.point_kernel_from(side, c),
            Err(_) => interior,
        }
    }

    /// Kernel value in bandwidth units; `u` is already oriented so that the
    /// nearby edge lies at `u = rho`.
    #[inline(always)]
    fn eval_point(&self, pk: &PointKernel, u: f64) -> f64 {
        if pk.side == Side::Interior {
            return self.base.eval(u);
        }
        if u > pk.rho || u < -pk.alpha {
            return 0.0;
        }
        pk.a * self.base.eval(u) - pk.b * self.base.eval(u * pk.inv_alpha)
    }

    /// `K_h^J(x - y)` with a precomputed point kernel for `x`.
    #[inline(always)]
    ///
    /// `u = rho` is the edge of the unit interval itself, so the upper cut is
    /// taken on `y` rather than on the rounded `u`.
    pub(crate) fn eval_pair(&self, pk: &PointKernel, x: f64, y: f64, inv_h: f64) -> f64 {
        let u = match pk.side {
            Side::Interior => return self.base.eval((x - y) * inv_h) * inv_h,
            Side::Left if y < 0.0 => return 0.0,
            Side::Right if y > 1.0 => return 0.0,
            Side::Left => (x - y) * inv_h,
            Side::Right => (y - x) * inv_h,
        };
        if u < -pk.alpha {
            return 0.0;
        }
        (pk.a * self.base.eval(u) - pk.b * self.base.eval(u * pk.inv_alpha)) * inv_h
    }

    /// Jackknife kernel `K_h^J(x - y)` for `x` in `[0, 1]`, `0 < h < 0.5`.
    ///
    /// The branch is chosen by `x`. On the right edge the boundary kernel is
    /// applied to `(y - x) / h`, the mirror image of the left edge, so that
    /// its support stays inside `[0, 1]`.
    pub fn jackknife_eval(&self, x: f64, y: f64, h: f64) -> Result<f64> {
        check_bandwidth(h)?;
        if !(0.0..=1.0).contains(&x) {
            return Err(RlenError::arg(format!("x = {x} outside [0, 1]")));
        }
        let pk = self.point_kernel(x, h);
        Ok(self.eval_pair(&pk, x, y, 1.0 / h))
    }

    /// Product of jackknife kernels over coordinates, common bandwidth `h`.
    pub fn product_kernel_eval(&self, x: &[f64], y: &[f64], h: f64) -> Result<f64> {
        if x.len() != y.len() {
            return Err(RlenError::arg(format!(
                "dimension mismatch: {} vs {}",
                x.len(),
                y.len()
            )));
        }
        if x.is_empty() {
            return Err(RlenError::arg("product kernel needs d >= 1"));
        }
        x.iter()
            .zip(y)
            .try_fold(1.0, |acc, (&xi, &yi)| Ok(acc * self.jackknife_eval(xi, yi, h)?))
    }

    /// Checks the assumptions placed on the base kernel.
    pub fn validate(&self) -> Result<()> {
        let base = self.base;
        let mass = adaptive_simpson(|u| base.eval(u), -1.0, 1.0, SIMPSON_TOL);
        if (mass - 1.0).abs() > 1e-10 {
            return Err(RlenError::domain(format!("kernel mass {mass} != 1")));
        }
        let second = adaptive_simpson(|u| u * u * base.eval(u), -1.0, 1.0, SIMPSON_TOL);
        if !second.is_finite() {
            return Err(RlenError::domain("kernel second moment not finite"));
        }
        let c = self.constants;
        let positive = [c.kappa, c.tau, c.tau1, c.tau2]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0);
        if !positive || c.tau >= 1.0 {
            return Err(RlenError::domain(format!("kernel constants out of range: {c:?}")));
        }
        Ok(())
    }
}

pub(crate) fn check_bandwidth(h: f64) -> Result<()> {
    if !(h > 0.0 && h < 0.5) {
        return Err(RlenError::arg(format!("bandwidth {h} outside (0, 0.5)")));
    }
    Ok(())
}

fn check_moment_args(l: u32, rho: f64) -> Result<()> {
    if l > 2 {
        return Err(RlenError::arg(format!("moment order {l} not in {{0, 1, 2}}")));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(RlenError::arg(format!("rho = {rho} outside [0, 1]")));
    }
    Ok(())
}

/// `\int K(u) K(u + v) du`, exact on the overlap of the two supports.
fn self_convolution(base: BaseKernel, v: f64, gl: &GaussLegendre) -> f64 {
    let lo = (-1.0f64).max(-1.0 - v);
    let hi = 1.0f64.min(1.0 - v);
    gl.integrate(|u| base.eval(u) * base.eval(u + v), lo, hi)
}

fn compute_constants(base: BaseKernel) -> KernelConstants {
    let gl = GaussLegendre::order64();
    let kappa = adaptive_simpson(|u| base.eval(u).powi(2), -1.0, 1.0, SIMPSON_TOL);
    // The convolution is a different polynomial on each side of zero.
    let split = |f: &dyn Fn(f64) -> f64| gl.integrate(f, -1.0, 0.0) + gl.integrate(f, 0.0, 1.0);
    let tau = split(&|v| self_convolution(base, v, gl));
    let tau1 = split(&|v| self_convolution(base, v, gl).powi(2));
    let tau2 = split(&|u| {
        let lo = (-1.0f64).max(-1.0 - u);
        let hi = 1.0f64.min(1.0 - u);
        base.eval(u) * gl.integrate(|v| base.eval(v) * base.eval(u + v), lo, hi)
    });
    KernelConstants {
        kappa,
        tau,
        tau1,
        tau2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn epa() -> KernelSpec {
        KernelSpec::default()
    }

    #[test]
    fn base_kernel_values() {
        let k = epa();
        assert_eq!(k.base_eval(0.0), 0.75);
        assert_eq!(k.base_eval(1.5), 0.0);
        assert_eq!(k.base_eval(0.5), 0.5625);
        assert_eq!(k.base_eval(-1.0), 0.0);
        for u in [0.1, 0.33, 0.9, 1.2] {
            assert_eq!(k.base_eval(u), k.base_eval(-u));
        }
    }

    #[test]
    fn moments() {
        let k = epa();
        assert_abs_diff_eq!(k.moment(0, 1.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(k.moment(1, 1.0).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(k.moment(1, 0.0).unwrap(), -0.1875, epsilon = 1e-15);
        assert_abs_diff_eq!(k.moment(2, 1.0).unwrap(), 0.2, epsilon = 1e-15);
        assert!(k.moment(3, 0.5).is_err());
        assert!(k.moment(0, 1.5).is_err());
        assert!(k.moment(0, -0.1).is_err());
    }

    #[test]
    fn analytic_moments_match_quadrature() {
        for base in [BaseKernel::Epanechnikov, BaseKernel::Biweight] {
            let k = KernelSpec::new(base);
            for l in 0..=2 {
                for i in 0..=20 {
                    let rho = i as f64 / 20.0;
                    let a = k.moment(l, rho).unwrap();
                    let q = k.moment_quadrature(l, rho).unwrap();
                    assert_abs_diff_eq!(a, q, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn boundary_coefficients() {
        let k = epa();
        let c1 = k.boundary_coeff(1.0).unwrap();
        assert_eq!(c1.beta, 0.0);
        assert_eq!(c1.alpha, 1.0);
        let c0 = k.boundary_coeff(0.0).unwrap();
        assert_abs_diff_eq!(c0.beta, 1.0, epsilon = 1e-14);
        assert_eq!(c0.alpha, 2.0);
        for rho in [0.1, 0.25, 0.5, 0.9] {
            let c = k.boundary_coeff(rho).unwrap();
            assert_eq!(c.alpha, 2.0 - rho);
            // closed form for the Epanechnikov kernel
            assert_abs_diff_eq!(c.beta, (4.0 - 3.0 * rho) / (4.0 - rho), epsilon = 1e-12);
        }
        assert!(matches!(
            k.boundary_coeff(1.0 - 1e-8),
            Err(RlenError::NumericDegeneracy(_))
        ));
        assert!(k.boundary_coeff(1.2).is_err());
    }

    #[test]
    fn boundary_kernel_has_unit_mass_and_zero_first_moment() {
        for base in [BaseKernel::Epanechnikov, BaseKernel::Biweight] {
            let k = KernelSpec::new(base);
            for rho in [0.0, 0.2, 0.5, 0.8] {
                let c = k.boundary_coeff(rho).unwrap();
                let mass = adaptive_simpson(
                    |u| k.boundary_kernel(rho, u).unwrap(),
                    -c.alpha,
                    rho,
                    1e-12,
                );
                let first = adaptive_simpson(
                    |u| u * k.boundary_kernel(rho, u).unwrap(),
                    -c.alpha,
                    rho,
                    1e-12,
                );
                assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-9);
                assert_abs_diff_eq!(first, 0.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn boundary_kernel_reduces_to_base_at_rho_one() {
        let k = epa();
        let mut worst: f64 = 0.0;
        for i in 0..=2000 {
            let u = -1.0 + i as f64 / 1000.0;
            worst = worst.max((k.boundary_kernel(1.0, u).unwrap() - k.base_eval(u)).abs());
        }
        assert!(worst < 1e-10);
    }

    #[test]
    fn jackknife_examples() {
        let k = epa();
        assert_abs_diff_eq!(k.jackknife_eval(0.5, 0.5, 0.1).unwrap(), 7.5, epsilon = 1e-12);
        assert_abs_diff_eq!(k.jackknife_eval(0.0, 0.0, 0.1).unwrap(), 22.5, epsilon = 1e-12);
        assert_abs_diff_eq!(k.jackknife_eval(1.0, 1.0, 0.1).unwrap(), 22.5, epsilon = 1e-12);
        assert_eq!(k.jackknife_eval(0.5, 0.8, 0.1).unwrap(), 0.0);
        assert!(k.jackknife_eval(0.5, 0.5, 0.0).is_err());
        assert!(k.jackknife_eval(0.5, 0.5, 0.5).is_err());
        assert!(k.jackknife_eval(1.2, 0.5, 0.1).is_err());
    }

    #[test]
    fn jackknife_edges_mirror_each_other() {
        let k = epa();
        let h = 0.12;
        for &(x, y) in &[(0.03, 0.1), (0.0, 0.2), (0.05, 0.0), (0.11, 0.3)] {
            let left = k.jackknife_eval(x, y, h).unwrap();
            let right = k.jackknife_eval(1.0 - x, 1.0 - y, h).unwrap();
            assert_abs_diff_eq!(left, right, epsilon = 1e-12);
        }
    }

    #[test]
    fn jackknife_can_be_negative_near_edge() {
        let k = epa();
        // second component dominates just beyond the first component's support
        let v = k.jackknife_eval(0.0, 0.15, 0.1).unwrap();
        assert!(v < 0.0, "{v}");
    }

    #[test]
    fn interior_mass_is_preserved() {
        let k = epa();
        let h = 0.1;
        for y in [0.2, 0.35, 0.5, 0.71, 0.8] {
            let mut pieces = vec![0.0, h, 1.0 - h, 1.0];
            for off in [-2.0, -1.0, 1.0, 2.0] {
                let p = y + off * h;
                if p > 0.0 && p < 1.0 {
                    pieces.push(p);
                }
            }
            pieces.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mass: f64 = pieces
                .windows(2)
                .map(|w| adaptive_simpson(|x| k.jackknife_eval(x, y, h).unwrap(), w[0], w[1], 1e-12))
                .sum();
            assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn product_kernel() {
        let k = epa();
        let a = k.product_kernel_eval(&[0.3], &[0.35], 0.1).unwrap();
        assert_eq!(a, k.jackknife_eval(0.3, 0.35, 0.1).unwrap());
        let p = k.product_kernel_eval(&[0.5, 0.5], &[0.5, 0.5], 0.1).unwrap();
        assert_abs_diff_eq!(p, 56.25, epsilon = 1e-10);
        assert_eq!(k.product_kernel_eval(&[0.02, 0.5], &[0.25, 0.5], 0.1).unwrap(), 0.0);
        assert!(k.product_kernel_eval(&[0.5], &[0.5, 0.5], 0.1).is_err());
        let s1 = k.product_kernel_eval(&[0.4, 0.6], &[0.45, 0.52], 0.1).unwrap();
        let s2 = k.product_kernel_eval(&[0.45, 0.52], &[0.4, 0.6], 0.1).unwrap();
        assert_abs_diff_eq!(s1, s2, epsilon = 1e-14);
    }

    #[test]
    fn epanechnikov_constants_match_closed_forms() {
        let c = epa().constants;
        assert_abs_diff_eq!(c.kappa, 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(c.tau, 141.0 / 160.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.tau1, 413113.0 / 985600.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.tau2, 1269.0 / 2560.0, epsilon = 1e-12);
        epa().validate().unwrap();
        KernelSpec::new(BaseKernel::Biweight).validate().unwrap();
    }

    #[test]
    fn constants_match_nested_simpson() {
        for base in [BaseKernel::Epanechnikov, BaseKernel::Biweight] {
            let k = KernelSpec::new(base);
            let conv = |v: f64| adaptive_simpson(|u| base.eval(u) * base.eval(u + v), -1.0, 1.0, 1e-12);
            let tau = adaptive_simpson(conv, -1.0, 1.0, 1e-11);
            let tau1 = adaptive_simpson(|v| conv(v).powi(2), -1.0, 1.0, 1e-11);
            let tau2 = adaptive_simpson(
                |u| {
                    base.eval(u)
                        * adaptive_simpson(|v| base.eval(v) * base.eval(u + v), -1.0, 1.0, 1e-12)
                },
                -1.0,
                1.0,
                1e-11,
            );
            assert_abs_diff_eq!(k.constants.tau, tau, epsilon = 1e-8);
            assert_abs_diff_eq!(k.constants.tau1, tau1, epsilon = 1e-8);
            assert_abs_diff_eq!(k.constants.tau2, tau2, epsilon = 1e-8);
        }
    }
}
