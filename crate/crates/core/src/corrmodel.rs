//! Radial correlation families and the derivative constants at lag zero.
//!
//! A model is described by `rho(s)` with `rho(0) = 1` and variance `sigma2`.
//! Derivatives are taken on `r(t) = sigma2 * rho(sqrt(t))`, which is smooth
//! at `t = 0` even though `sqrt` is not. Expanding `rho(s) = r(s^2) / sigma2`
//! around zero gives `rho''(0) = 2 r'(0) / sigma2` and
//! `rho''''(0) = 12 r''(0) / sigma2`.
//!
//! The lag-zero Hessian covariance of the field is
//! `4 r''(0) (I + C + vec(I) vec(I)^T)`, so the fourth-order constant that
//! enters the closed forms as `sigma2 * rho4_0` is `4 r''(0) / sigma2`, one
//! third of `rho''''(0)`. [`DerivedConstants::rho4_0`] stores that
//! coefficient; [`DerivedConstants::rho4_literal`] returns the plain fourth
//! derivative.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CorrelationKind {
    /// `exp(-s^2 / (2 l^2))`
    Gaussian,
    /// `(1 + s^2 / (2 a l^2))^(-a)`
    RationalQuadratic { shape: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationModel {
    #[serde(flatten)]
    pub kind: CorrelationKind,
    pub lengthscale: f64,
    pub variance: f64,
}

impl CorrelationModel {
    pub fn gaussian(lengthscale: f64, variance: f64) -> Result<Self> {
        Self::new(CorrelationKind::Gaussian, lengthscale, variance)
    }

    pub fn rational_quadratic(shape: f64, lengthscale: f64, variance: f64) -> Result<Self> {
        Self::new(CorrelationKind::RationalQuadratic { shape }, lengthscale, variance)
    }

    pub fn new(kind: CorrelationKind, lengthscale: f64, variance: f64) -> Result<Self> {
        let model = CorrelationModel { kind, lengthscale, variance };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.lengthscale) {
            return Err(Error::InvalidModel(format!("lengthscale must be > 0, got {}", self.lengthscale)));
        }
        if !positive(self.variance) {
            return Err(Error::InvalidModel(format!("variance must be > 0, got {}", self.variance)));
        }
        if let CorrelationKind::RationalQuadratic { shape } = self.kind {
            if !positive(shape) {
                return Err(Error::InvalidModel(format!("shape must be > 0, got {shape}")));
            }
        }
        Ok(())
    }

    /// Correlation at distance `s`.
    pub fn rho(&self, s: f64) -> Result<f64> {
        if s < 0.0 {
            return Err(Error::NegativeArgument { name: "s", value: s });
        }
        Ok(self.rho_unchecked(s))
    }

    fn rho_unchecked(&self, s: f64) -> f64 {
        let l2 = self.lengthscale * self.lengthscale;
        match self.kind {
            CorrelationKind::Gaussian => (-s * s / (2.0 * l2)).exp(),
            CorrelationKind::RationalQuadratic { shape } => (1.0 + s * s / (2.0 * shape * l2)).powf(-shape),
        }
    }

    /// `i`-th derivative of `r(t) = sigma2 * rho(sqrt(t))`, `0 <= i <= 4`.
    pub fn r_deriv(&self, order: usize, t: f64) -> Result<f64> {
        if order > 4 {
            return Err(Error::UnsupportedOrder(order));
        }
        if t < 0.0 {
            return Err(Error::NegativeArgument { name: "t", value: t });
        }
        let l2 = self.lengthscale * self.lengthscale;
        let value = match self.kind {
            CorrelationKind::Gaussian => {
                let c = -1.0 / (2.0 * l2);
                self.variance * c.powi(order as i32) * (c * t).exp()
            }
            CorrelationKind::RationalQuadratic { shape } => {
                // d^i/dt^i (1 + b t)^(-a) = (-a)(-a-1)...(-a-i+1) b^i (1 + b t)^(-a-i)
                let b = 1.0 / (2.0 * shape * l2);
                let falling = (0..order).map(|k| -shape - k as f64).product::<f64>();
                self.variance * falling * b.powi(order as i32) * (1.0 + b * t).powf(-shape - order as f64)
            }
        };
        Ok(value)
    }

    pub fn constants(&self) -> Result<DerivedConstants> {
        self.validate()?;
        let rho2_0 = 2.0 * self.r_deriv(1, 0.0)? / self.variance;
        let rho4_0 = 4.0 * self.r_deriv(2, 0.0)? / self.variance;
        DerivedConstants::new(rho2_0, rho4_0, self.variance)
    }
}

/// Step used by [`radial_operator_check`].
pub fn default_step(u: f64) -> f64 {
    1e-4_f64.max(1e-4 * u)
}

/// Applies `(1/(2u)) d/du` to `rho` `order` times and evaluates at `u`.
///
/// Since `d/du r(u^2) = 2u r'(u^2)`, the result equals
/// `r_deriv(order, u^2) / sigma2`; it is computed with nested central
/// differences and one level of Richardson extrapolation, independently of
/// the analytic derivatives.
pub fn radial_operator_check(model: &CorrelationModel, order: usize, u: f64) -> Result<f64> {
    radial_operator(model, order, u, default_step(u), true)
}

/// Same as [`radial_operator_check`] with an explicit step; `richardson`
/// toggles the extrapolation so the raw `O(h^2)` behaviour can be observed.
pub fn radial_operator(model: &CorrelationModel, order: usize, u: f64, h: f64, richardson: bool) -> Result<f64> {
    if !(1..=2).contains(&order) {
        return Err(Error::UnsupportedOrder(order));
    }
    if !(u > 0.0) || !(h > 0.0) || u - order as f64 * h <= 0.0 || u + h == u {
        return Err(Error::StepUnderflow { u, h });
    }
    let coarse = nested(model, order, u, h);
    let value = if richardson {
        let fine = nested(model, order, u, 0.5 * h);
        (4.0 * fine - coarse) / 3.0
    } else {
        coarse
    };
    Ok(value / 2f64.powi(order as i32))
}

// (1/u d/du)^order rho at u, by central differences.
fn nested(model: &CorrelationModel, order: usize, u: f64, h: f64) -> f64 {
    if order == 0 {
        return model.rho_unchecked(u);
    }
    let plus = nested(model, order - 1, u + h, h);
    let minus = nested(model, order - 1, u - h, h);
    (plus - minus) / (2.0 * h * u)
}

/// The scalars the closed forms depend on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    /// `rho''(0)`, negative.
    pub rho2_0: f64,
    /// Hessian covariance coefficient `4 r''(0) / sigma2`, positive.
    pub rho4_0: f64,
    /// `-rho2_0 / (2 rho4_0)`, units of length squared.
    pub alpha: f64,
    pub sigma2: f64,
}

impl DerivedConstants {
    pub fn new(rho2_0: f64, rho4_0: f64, sigma2: f64) -> Result<Self> {
        if !(rho2_0 < 0.0) || !(rho4_0 > 0.0) || !rho2_0.is_finite() || !rho4_0.is_finite() {
            return Err(Error::DegenerateModel { rho2_0, rho4_0 });
        }
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::InvalidModel(format!("variance must be > 0, got {sigma2}")));
        }
        Ok(DerivedConstants { rho2_0, rho4_0, alpha: -rho2_0 / (2.0 * rho4_0), sigma2 })
    }

    /// Per-component gradient variance, `-sigma2 rho2_0`.
    pub fn grad_variance(&self) -> f64 {
        -self.sigma2 * self.rho2_0
    }

    /// `sigma2 rho4_0`, the scale of the Hessian covariance.
    pub fn hess_scale(&self) -> f64 {
        self.sigma2 * self.rho4_0
    }

    /// `rho''''(0)`.
    pub fn rho4_literal(&self) -> f64 {
        3.0 * self.rho4_0
    }
}
