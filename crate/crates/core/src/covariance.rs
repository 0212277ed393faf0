//! Lag-zero covariance of the gradient and Hessian of an isotropic field.
//!
//! With `s4 = sigma2 * rho4_0`:
//!
//! - `Cov(grad) = -sigma2 rho2_0 I_n`
//! - `Cov(grad, vec H) = 0`
//! - `Cov(vec H) = s4 (I + C_n + vec(I) vec(I)^T)`, singular with rank
//!   `n(n+1)/2`, so densities are written on `vech H` with covariance
//!   `Sigma_n = D^+ Cov(vec H) D^+^T`.

use nalgebra::{DMatrix, DVector};

use crate::corrmodel::DerivedConstants;
use crate::error::{Error, Result};
use crate::matops::{commutation_matrix, dup_pinv, max_abs_diff, vec_identity, vech_len, vech_of};

#[derive(Debug, Clone)]
pub struct CovarianceBundle {
    pub n: usize,
    pub consts: DerivedConstants,
    pub grad_cov: DMatrix<f64>,
    pub cross_cov: DMatrix<f64>,
    pub hess_cov: DMatrix<f64>,
    pub sigma_n: DMatrix<f64>,
    pub sigma_tilde: DMatrix<f64>,
    pub sigma_det: f64,
}

impl CovarianceBundle {
    pub fn build(n: usize, consts: DerivedConstants) -> Self {
        assert!(n >= 1, "dimension must be positive");
        let s4 = consts.hess_scale();
        let n2 = n * n;

        let grad_cov = DMatrix::identity(n, n) * consts.grad_variance();
        let cross_cov = DMatrix::zeros(n, n2);

        let vi = vec_identity(n);
        let hess_cov = (DMatrix::identity(n2, n2) + commutation_matrix(n) + &vi * vi.transpose()) * s4;

        let dp = dup_pinv(n);
        let mut sigma_n = &dp * &hess_cov * dp.transpose();
        // exact in exact arithmetic; remove rounding asymmetry
        sigma_n = (&sigma_n + sigma_n.transpose()) * 0.5;

        let sigma_tilde = (DMatrix::identity(n, n) * 2.0 + DMatrix::from_element(n, n, 1.0)) * s4;

        let sigma_det = sigma_det_closed_form(n, s4);

        CovarianceBundle { n, consts, grad_cov, cross_cov, hess_cov, sigma_n, sigma_tilde, sigma_det }
    }

    pub fn hess_scale(&self) -> f64 {
        self.consts.hess_scale()
    }

    /// Closed-form Moore-Penrose inverse of `hess_cov`:
    /// `(I + C - 2/(2+n) vec(I) vec(I)^T) / (4 s4)`.
    pub fn hess_cov_pinv(&self) -> DMatrix<f64> {
        let n = self.n;
        let n2 = n * n;
        let vi = vec_identity(n);
        (DMatrix::identity(n2, n2) + commutation_matrix(n) - &vi * vi.transpose() * (2.0 / (2.0 + n as f64)))
            / (4.0 * self.hess_scale())
    }

    /// Max entrywise deviation of `(R (x) R) hess_cov (R^T (x) R^T)` from
    /// `hess_cov`. Only orthogonal `R` is accepted: for a general invertible
    /// matrix the `vec(I) vec(I)^T` term is not preserved.
    pub fn rotation_invariance_check(&self, r: &DMatrix<f64>) -> Result<f64> {
        check_orthogonal(r, self.n)?;
        let rr = r.kronecker(r);
        let rt = r.transpose();
        let rrt = rt.kronecker(&rt);
        let conj = &rr * &self.hess_cov * rrt;
        Ok(max_abs_diff(&conj, &self.hess_cov))
    }

    /// Evaluates both sides of
    /// `vech(R^T L R)^T Sigma_n^-1 vech(R^T L R) = lambda^T Sigma_tilde^-1 lambda`
    /// with `L = diag(lambda)`. The left side uses a Cholesky solve on
    /// `Sigma_n`; the right side the closed-form inverse of `Sigma_tilde`.
    pub fn quadratic_form_reduction(&self, r: &DMatrix<f64>, lambda: &[f64]) -> Result<(f64, f64)> {
        check_orthogonal(r, self.n)?;
        if lambda.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: lambda.len() });
        }
        let big_l = DMatrix::from_diagonal(&DVector::from_column_slice(lambda));
        let u = vech_of(&(r.transpose() * big_l * r));
        let chol = self.sigma_n.clone().cholesky().expect("Sigma_n is positive definite");
        let lhs = u.dot(&chol.solve(&u));
        let rhs = eigen_quadratic_form(self.hess_scale(), lambda);
        Ok((lhs, rhs))
    }

    /// Lower Cholesky factor of `Sigma_n`.
    pub fn sigma_n_cholesky(&self) -> DMatrix<f64> {
        self.sigma_n.clone().cholesky().expect("Sigma_n is positive definite").l()
    }
}

/// `|Sigma_n| = 2^(n-1) (2 + n) s4^(n(n+1)/2)`.
pub fn sigma_det_closed_form(n: usize, s4: f64) -> f64 {
    2f64.powi(n as i32 - 1) * (2.0 + n as f64) * s4.powi(vech_len(n) as i32)
}

/// `lambda^T Sigma_tilde^-1 lambda` for `Sigma_tilde = s4 (2I + 1 1^T)` of
/// size `m = lambda.len()`. The inverse is
/// `(I - 1 1^T / (m + 2)) / (2 s4)`.
pub fn eigen_quadratic_form(s4: f64, lambda: &[f64]) -> f64 {
    let m = lambda.len() as f64;
    let sum: f64 = lambda.iter().sum();
    let sq: f64 = lambda.iter().map(|x| x * x).sum();
    (sq - sum * sum / (m + 2.0)) / (2.0 * s4)
}

fn check_orthogonal(r: &DMatrix<f64>, n: usize) -> Result<()> {
    if r.shape() != (n, n) {
        return Err(Error::DimensionMismatch { expected: n, got: r.nrows() });
    }
    let dev = max_abs_diff(&(r.transpose() * r), &DMatrix::identity(n, n));
    if dev > 1e-12 {
        return Err(Error::NotOrthogonal(dev));
    }
    Ok(())
}
