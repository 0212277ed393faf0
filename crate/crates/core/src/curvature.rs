//! Principal curvatures of the level set through a point.
//!
//! For gradient `g` and Hessian `H`, the curvatures are the eigenvalues of
//! `-N^T H N / |g|` where the columns of `N` are an orthonormal basis of the
//! plane orthogonal to `g`. With the leading minus sign, the level sets of
//! `|x|^2` (spheres with outward gradient) have negative curvature.

use nalgebra::{DMatrix, DVector};

use rayon::prelude::*;

use crate::ensemble::{JetSampler, PointJet};
use crate::error::{Error, Result};

/// Gradients with `|g| <= GRADIENT_EPS * scale` are treated as zero.
pub const GRADIENT_EPS: f64 = 1e-12;

/// Principal curvatures, ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureSample {
    pub kappas: Vec<f64>,
}

impl CurvatureSample {
    pub fn mean_curvature(&self) -> f64 {
        self.kappas.iter().sum::<f64>() / self.kappas.len() as f64
    }

    pub fn gaussian_curvature(&self) -> f64 {
        self.kappas.iter().product()
    }
}

/// Orthonormal basis of the orthogonal complement of `g`, as an
/// `n x (n-1)` matrix.
///
/// A Householder reflection `P` with `P e_1 = -sign(g_1) g / |g|` is formed;
/// its last `n - 1` columns are orthonormal and orthogonal to `g`. The sign
/// choice keeps the reflection vector away from zero.
pub fn nullspace_basis(g: &DVector<f64>, scale: f64) -> Result<DMatrix<f64>> {
    let n = g.len();
    let norm = g.norm();
    let threshold = GRADIENT_EPS * scale;
    if !(norm > threshold) {
        return Err(Error::DegenerateGradient { norm, threshold });
    }
    let u = g / norm;
    let sign = if u[0] >= 0.0 { -1.0 } else { 1.0 };
    // w = e_1 - sign * u, |w|^2 = 2 (1 + |u_1|) >= 2
    let mut w = -sign * &u;
    w[0] += 1.0;
    let w = w.normalize();
    let p = DMatrix::identity(n, n) - 2.0 * &w * w.transpose();
    Ok(p.columns(1, n - 1).into_owned())
}

pub fn principal_curvatures(jet: &PointJet) -> Result<CurvatureSample> {
    principal_curvatures_scaled(jet, 1.0)
}

/// As [`principal_curvatures`], with the degeneracy threshold relative to
/// `scale` (typically the gradient standard deviation).
pub fn principal_curvatures_scaled(jet: &PointJet, scale: f64) -> Result<CurvatureSample> {
    let basis = nullspace_basis(&jet.gradient, scale)?;
    Ok(curvatures_with_basis(jet, &basis))
}

/// Curvatures computed with a caller-supplied orthonormal basis `N`.
pub fn curvatures_with_basis(jet: &PointJet, basis: &DMatrix<f64>) -> CurvatureSample {
    let norm = jet.gradient.norm();
    let m = basis.transpose() * &jet.hessian * basis / (-norm);
    let m = (&m + m.transpose()) * 0.5;
    let mut kappas: Vec<f64> = match m.nrows() {
        0 => Vec::new(),
        1 => vec![m[(0, 0)]],
        _ => m.symmetric_eigen().eigenvalues.iter().copied().collect(),
    };
    kappas.sort_by(f64::total_cmp);
    CurvatureSample { kappas }
}

/// Curvatures of jets `0..count` from `sampler`, in index order, with the
/// degeneracy threshold scaled by the gradient standard deviation. Returns
/// the samples and the number of jets skipped.
pub fn sample_curvatures(sampler: &JetSampler, count: usize) -> (Vec<CurvatureSample>, usize) {
    let scale = sampler.grad_sd();
    let out: Vec<CurvatureSample> = (0..count as u64)
        .into_par_iter()
        .filter_map(|i| principal_curvatures_scaled(&sampler.jet(i), scale).ok())
        .collect();
    let skipped = count - out.len();
    (out, skipped)
}
