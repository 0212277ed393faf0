//! Monte Carlo sampling of derivative jets at a single field point.
//!
//! The gradient is drawn as `sqrt(-sigma2 rho2_0) z` and `vech H` as `L z'`
//! with `L` the Cholesky factor of `Sigma_n`; the two draws are
//! independent. The singular `n^2`-dimensional Hessian covariance is never
//! factorised.
//!
//! Random numbers: jet `i` uses a ChaCha8 generator keyed by `seed` on
//! stream `i`, so every jet is a pure function of `(seed, i)` and output is
//! identical for any thread count. Normal variates come from
//! `rand_distr::StandardNormal` (ziggurat method); streams are reproducible
//! within this implementation, not across implementations.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::corrmodel::{CorrelationModel, DerivedConstants};
use crate::covariance::CovarianceBundle;
use crate::error::{Error, Result};
use crate::matops::{unvech, vech_len, vech_of};

/// Gradient and Hessian of a field realisation at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointJet {
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

impl PointJet {
    pub fn new(gradient: DVector<f64>, hessian: DMatrix<f64>) -> Self {
        assert_eq!(hessian.shape(), (gradient.len(), gradient.len()));
        PointJet { gradient, hessian }
    }

    /// Builds a jet from a gradient and the `vech` of its Hessian.
    pub fn from_vech(gradient: &[f64], hess_vech: &[f64]) -> Result<Self> {
        let n = gradient.len();
        if hess_vech.len() != vech_len(n) {
            return Err(Error::DimensionMismatch { expected: vech_len(n), got: hess_vech.len() });
        }
        Ok(PointJet { gradient: DVector::from_column_slice(gradient), hessian: unvech(hess_vech) })
    }

    pub fn dim(&self) -> usize {
        self.gradient.len()
    }

    /// `(g_1..g_n, vech H)` in one flat vector.
    pub fn flat(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.gradient.iter().copied().collect();
        out.extend(vech_of(&self.hessian).iter());
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SamplerConfig {
    pub n: usize,
    pub model: CorrelationModel,
    pub seed: u64,
    pub count: usize,
}

impl SamplerConfig {
    pub fn sampler(&self) -> Result<JetSampler> {
        if self.count == 0 {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        Ok(JetSampler::new(self.n, self.model.constants()?, self.seed))
    }
}

/// Draws jets by index. Cheap to share across threads.
#[derive(Debug, Clone)]
pub struct JetSampler {
    n: usize,
    consts: DerivedConstants,
    grad_sd: f64,
    chol: DMatrix<f64>,
    base: ChaCha8Rng,
}

impl JetSampler {
    pub fn new(n: usize, consts: DerivedConstants, seed: u64) -> Self {
        let bundle = CovarianceBundle::build(n, consts);
        JetSampler {
            n,
            consts,
            grad_sd: consts.grad_variance().sqrt(),
            chol: bundle.sigma_n_cholesky(),
            base: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn constants(&self) -> &DerivedConstants {
        &self.consts
    }

    /// Standard deviation of each gradient component.
    pub fn grad_sd(&self) -> f64 {
        self.grad_sd
    }

    pub fn jet(&self, index: u64) -> PointJet {
        let mut rng = self.base.clone();
        rng.set_stream(index);
        rng.set_word_pos(0);

        let gradient = DVector::from_fn(self.n, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            self.grad_sd * z
        });
        let z = DVector::from_fn(vech_len(self.n), |_, _| -> f64 { StandardNormal.sample(&mut rng) });
        let h = &self.chol * z;
        PointJet { gradient, hessian: unvech(h.as_slice()) }
    }

    /// Jets `start..start + count`, in index order.
    pub fn jets(&self, start: u64, count: usize) -> Vec<PointJet> {
        (0..count as u64).into_par_iter().map(|i| self.jet(start + i)).collect()
    }
}

pub fn sample_jets(config: &SamplerConfig) -> Result<Vec<PointJet>> {
    Ok(config.sampler()?.jets(0, config.count))
}

/// Ascending eigenvalues of each sampled Hessian.
pub fn sample_hessian_eigs(config: &SamplerConfig) -> Result<Vec<Vec<f64>>> {
    let sampler = config.sampler()?;
    Ok((0..config.count as u64).into_par_iter().map(|i| sorted_eigenvalues(&sampler.jet(i).hessian)).collect())
}

pub fn sorted_eigenvalues(s: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = s.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}
