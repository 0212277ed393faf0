//! Closed-form densities for Hessian eigenvalues, gradient norm and
//! principal curvatures, and a numeric route between them.
//!
//! Write `s4 = sigma2 rho4_0` and `g = -sigma2 rho2_0`.
//!
//! Eigenvalues of an `m x m` field Hessian (unordered, over `R^m`):
//!
//! ```text
//! p(l) = 2^((2 - 7m - m^2)/4) / (sqrt(2 + m) s4^(m(m+1)/4) prod_i Gamma(1 + i/2))
//!        * prod_{i<j} |l_j - l_i| * exp(-l^T Sigma_tilde^-1 l / 2)
//! ```
//!
//! Gradient norm, a scaled chi law with `n` degrees of freedom:
//!
//! ```text
//! p(u) = 2 u^(n-1) exp(-u^2 / (2 g)) / ((2 g)^(n/2) Gamma(n/2))
//! ```
//!
//! Principal curvatures on `R^(n-1)`, with `a = alpha`:
//!
//! ```text
//! p(k) = 2^((n^2 - 7n + 8)/4) Gamma(n(n+1)/4) / (sqrt(1 + n) Gamma(n/2) prod_{i<n} Gamma(1 + i/2))
//!        * a^(n(n-1)/4) prod_{i<j} |k_j - k_i|
//!        / (a [sum k_i^2 - (sum k_i)^2 / (n + 1)] + 1)^((n^2 + n)/4)
//! ```
//!
//! The curvature law follows from `k = l / u` with `l` the eigenvalues of
//! the `(n-1)`-dimensional projected Hessian and `u` the gradient norm,
//! which are independent: `p(k) = int u^(n-1) p_l(k u) p_u(u) du`.
//! [`DensitySpec::ratio_integral_pdf`] evaluates that integral numerically.
//!
//! Normalising constants are assembled in log space.

use std::f64::consts::{FRAC_PI_2, LN_2};

use statrs::function::gamma::ln_gamma;

use crate::corrmodel::DerivedConstants;
use crate::covariance::eigen_quadratic_form;
use crate::error::{Error, Result};
use crate::quadrature::{integrate_half_line, integrate_real_line, Tolerance};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensitySpec {
    pub n: usize,
    pub consts: DerivedConstants,
}

impl DensitySpec {
    pub fn new(n: usize, consts: DerivedConstants) -> Self {
        assert!(n >= 1, "dimension must be positive");
        DensitySpec { n, consts }
    }

    pub fn alpha(&self) -> f64 {
        self.consts.alpha
    }

    /// Joint density of the eigenvalues of an `m x m` field Hessian,
    /// `m = lambda.len()`.
    pub fn eig_pdf(&self, lambda: &[f64]) -> f64 {
        eig_pdf(&self.consts, lambda)
    }

    /// Density of the gradient norm in dimension `n`.
    pub fn gradnorm_pdf(&self, u: f64) -> Result<f64> {
        if u < 0.0 {
            return Err(Error::NegativeArgument { name: "u", value: u });
        }
        let n = self.n as f64;
        let g = self.consts.grad_variance();
        if u == 0.0 {
            // u^(n-1) vanishes except for n = 1
            return Ok(if self.n == 1 { 2.0 / ((2.0 * g).sqrt() * std::f64::consts::PI.sqrt()) } else { 0.0 });
        }
        let ln = LN_2 + (n - 1.0) * u.ln() - u * u / (2.0 * g) - 0.5 * n * (2.0 * g).ln() - ln_gamma(0.5 * n);
        Ok(ln.exp())
    }

    /// Joint density of the `n - 1` principal curvatures.
    pub fn curvature_pdf(&self, kappa: &[f64]) -> f64 {
        assert!(self.n >= 2, "curvatures need n >= 2");
        assert_eq!(kappa.len(), self.n - 1, "expected n - 1 curvatures");
        let n = self.n as f64;
        let alpha = self.consts.alpha;
        let Some(ln_vdm) = ln_vandermonde(kappa) else {
            return 0.0;
        };
        let sum: f64 = kappa.iter().sum();
        let sq: f64 = kappa.iter().map(|k| k * k).sum();
        let base = alpha * (sq - sum * sum / (n + 1.0)) + 1.0;
        (ln_curvature_const(self.n, alpha) + ln_vdm - 0.25 * (n * n + n) * base.ln()).exp()
    }

    /// `int_0^inf u^(n-1) p_eig,(n-1)(k u) p_norm(u) du`, by adaptive
    /// quadrature. Agrees with [`Self::curvature_pdf`] when the closed form
    /// is right.
    pub fn ratio_integral_pdf(&self, kappa: &[f64]) -> Result<f64> {
        assert!(self.n >= 2, "curvatures need n >= 2");
        if kappa.len() != self.n - 1 {
            return Err(Error::DimensionMismatch { expected: self.n - 1, got: kappa.len() });
        }
        let n = self.n;
        let integrand = |u: f64| {
            let p_norm = self.gradnorm_pdf(u).unwrap_or(0.0);
            if p_norm == 0.0 {
                return 0.0;
            }
            let scaled: Vec<f64> = kappa.iter().map(|k| k * u).collect();
            u.powi(n as i32 - 1) * eig_pdf(&self.consts, &scaled) * p_norm
        };
        let r = integrate_half_line(integrand, self.consts.grad_variance().sqrt(), Tolerance::new(1e-300, 1e-12))?;
        Ok(r.value)
    }

    /// Cumulative distribution of the single curvature for `n = 2`.
    ///
    /// At `n = 2` the density is `C (1 + b k^2)^(-3/2)` with
    /// `b = 2 alpha / 3` and `C` the general normalising constant, whose
    /// antiderivative is `C k / sqrt(1 + b k^2)`.
    pub fn curvature_cdf_1d(&self, kappa: f64) -> Result<f64> {
        if self.n != 2 {
            return Err(Error::Unsupported(format!("1-D curvature CDF needs n = 2, got n = {}", self.n)));
        }
        let alpha = self.consts.alpha;
        let c = ln_curvature_const(2, alpha).exp();
        let b = 2.0 * alpha / 3.0;
        let anti =
            if kappa.is_infinite() { kappa.signum() / b.sqrt() } else { kappa / (1.0 + b * kappa * kappa).sqrt() };
        Ok(0.5 + c * anti)
    }

    /// Marginal density of one (unordered) curvature for `n = 3`.
    pub fn curvature_marginal_pdf(&self, kappa: f64) -> Result<f64> {
        if self.n != 3 {
            return Err(Error::Unsupported(format!("marginal curvature density needs n = 3, got n = {}", self.n)));
        }
        let r = integrate_real_line(|k2| self.curvature_pdf(&[kappa, k2]), &[kappa], Tolerance::new(1e-14, 1e-11))?;
        Ok(r.value)
    }
}

/// See [`DensitySpec::eig_pdf`].
pub fn eig_pdf(consts: &DerivedConstants, lambda: &[f64]) -> f64 {
    let m = lambda.len();
    assert!(m >= 1, "need at least one eigenvalue");
    let s4 = consts.hess_scale();
    let Some(ln_vdm) = ln_vandermonde(lambda) else {
        return 0.0;
    };
    (ln_eig_const(m, s4) + ln_vdm - 0.5 * eigen_quadratic_form(s4, lambda)).exp()
}

fn ln_eig_const(m: usize, s4: f64) -> f64 {
    let mf = m as f64;
    (2.0 - 7.0 * mf - mf * mf) / 4.0 * LN_2
        - 0.5 * (2.0 + mf).ln()
        - mf * (mf + 1.0) / 4.0 * s4.ln()
        - ln_gamma_halves(m)
}

fn ln_curvature_const(n: usize, alpha: f64) -> f64 {
    let nf = n as f64;
    (nf * nf - 7.0 * nf + 8.0) / 4.0 * LN_2 + ln_gamma(nf * (nf + 1.0) / 4.0)
        - 0.5 * (1.0 + nf).ln()
        - ln_gamma(0.5 * nf)
        - ln_gamma_halves(n - 1)
        + nf * (nf - 1.0) / 4.0 * alpha.ln()
}

// sum_{i=1}^{m} ln Gamma(1 + i/2)
fn ln_gamma_halves(m: usize) -> f64 {
    (1..=m).map(|i| ln_gamma(1.0 + 0.5 * i as f64)).sum()
}

// ln prod_{i<j} |x_j - x_i|, or None when two entries coincide.
fn ln_vandermonde(x: &[f64]) -> Option<f64> {
    let mut acc = 0.0;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let d = (x[j] - x[i]).abs();
            if d == 0.0 {
                return None;
            }
            acc += d.ln();
        }
    }
    Some(acc)
}

/// Tabulated CDF of a 1-D density, built on a uniform grid in
/// `theta = atan(x)` with the composite trapezoid rule. Used where no closed
/// CDF exists (the `n = 3` marginal).
#[derive(Debug, Clone)]
pub struct CdfTable {
    thetas: Vec<f64>,
    cdf: Vec<f64>,
    /// Total mass before normalisation.
    pub mass: f64,
}

impl CdfTable {
    pub fn from_density<F: Fn(f64) -> Result<f64> + Sync>(pdf: F, points: usize) -> Result<Self> {
        use rayon::prelude::*;
        assert!(points >= 3);
        let step = std::f64::consts::PI / (points - 1) as f64;
        let thetas: Vec<f64> = (0..points).map(|i| -FRAC_PI_2 + i as f64 * step).collect();
        let values = thetas
            .par_iter()
            .map(|&t| {
                if t.abs() >= FRAC_PI_2 {
                    return Ok(0.0);
                }
                let c = t.cos();
                Ok(pdf(t.tan())? / (c * c))
            })
            .collect::<Result<Vec<f64>>>()?;
        let mut cdf = Vec::with_capacity(points);
        let mut acc = 0.0;
        cdf.push(0.0);
        for w in values.windows(2) {
            acc += 0.5 * (w[0] + w[1]) * step;
            cdf.push(acc);
        }
        let mass = acc;
        for c in &mut cdf {
            *c /= mass;
        }
        Ok(CdfTable { thetas, cdf, mass })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let t = x.atan();
        let step = self.thetas[1] - self.thetas[0];
        let pos = (t - self.thetas[0]) / step;
        let i = (pos.floor().max(0.0) as usize).min(self.thetas.len() - 2);
        let frac = (pos - i as f64).clamp(0.0, 1.0);
        self.cdf[i] + frac * (self.cdf[i + 1] - self.cdf[i])
    }
}
