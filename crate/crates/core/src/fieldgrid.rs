//! Periodic Gaussian field realisations on a regular grid.
//!
//! Fields are synthesised spectrally: real white noise is transformed,
//! scaled by the square root of the sampled spectral density
//! `S(k) = sigma2 (2 pi)^(n/2) l^n exp(-l^2 |k|^2 / 2)` of the gaussian
//! model divided by the cell volume, and transformed back. The result is an
//! exactly Gaussian periodic field whose covariance is the periodised model
//! covariance; on a domain of at least `12 l` per axis the periodisation
//! error is below `exp(-72)`.
//!
//! Jets come from fourth-order central differences with periodic wrap.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::corrmodel::{CorrelationKind, CorrelationModel};
use crate::curvature::principal_curvatures_scaled;
use crate::ensemble::PointJet;
use crate::error::{Error, Result};

/// Minimum domain extent per axis, in lengthscales.
pub const MIN_DOMAIN_LENGTHSCALES: f64 = 12.0;

#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub n: usize,
    /// Points per axis; axis 0 varies fastest in `values`.
    pub shape: Vec<usize>,
    pub spacing: f64,
    pub values: Vec<f64>,
    pub seed: u64,
}

impl FieldGrid {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn strides(&self) -> Vec<usize> {
        strides(&self.shape)
    }

    /// Every `factor`-th point along each axis; spacing grows by `factor`.
    pub fn subsample(&self, factor: usize) -> FieldGrid {
        assert!(factor >= 1 && self.shape.iter().all(|&s| s % factor == 0));
        let shape: Vec<usize> = self.shape.iter().map(|s| s / factor).collect();
        let src = self.strides();
        let total: usize = shape.iter().product();
        let values = (0..total)
            .map(|flat| {
                let idx = unravel(flat, &shape);
                idx.iter().zip(&src).map(|(i, s)| i * factor * s).sum::<usize>()
            })
            .map(|k| self.values[k])
            .collect();
        FieldGrid { n: self.n, shape, spacing: self.spacing * factor as f64, values, seed: self.seed }
    }
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = Vec::with_capacity(shape.len());
    let mut acc = 1;
    for &d in shape {
        s.push(acc);
        acc *= d;
    }
    s
}

fn unravel(mut flat: usize, shape: &[usize]) -> Vec<usize> {
    shape
        .iter()
        .map(|&d| {
            let i = flat % d;
            flat /= d;
            i
        })
        .collect()
}

/// One realisation. `shape` has one entry per axis (`n = shape.len()`).
pub fn synthesize(model: &CorrelationModel, shape: &[usize], spacing: f64, seed: u64) -> Result<FieldGrid> {
    model.validate()?;
    if model.kind != CorrelationKind::Gaussian {
        return Err(Error::Unsupported("spectral synthesis needs the gaussian model".into()));
    }
    let n = shape.len();
    if !(2..=3).contains(&n) {
        return Err(Error::Unsupported(format!("grid dimension must be 2 or 3, got {n}")));
    }
    if !(spacing > 0.0) {
        return Err(Error::InvalidModel(format!("spacing must be > 0, got {spacing}")));
    }
    let needed = MIN_DOMAIN_LENGTHSCALES * model.lengthscale;
    for (axis, &d) in shape.iter().enumerate() {
        let extent = d as f64 * spacing;
        if extent < needed {
            return Err(Error::DomainTooSmall { axis, extent, needed });
        }
    }

    let total: usize = shape.iter().product();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data: Vec<Complex<f64>> = (0..total).map(|_| Complex::new(StandardNormal.sample(&mut rng), 0.0)).collect();

    let mut planner = FftPlanner::new();
    fft_nd(&mut data, shape, &mut planner, false);

    let l = model.lengthscale;
    let cell = spacing.powi(n as i32);
    let norm = model.variance * (2.0 * PI).powf(n as f64 / 2.0) * l.powi(n as i32) / cell;
    let wavenumbers: Vec<Vec<f64>> = shape
        .iter()
        .map(|&d| {
            let dk = 2.0 * PI / (d as f64 * spacing);
            (0..d).map(|m| if m < d.div_ceil(2) { m as f64 * dk } else { (m as f64 - d as f64) * dk }).collect()
        })
        .collect();
    for (flat, z) in data.iter_mut().enumerate() {
        let idx = unravel(flat, shape);
        let k2: f64 = idx.iter().enumerate().map(|(ax, &i)| wavenumbers[ax][i].powi(2)).sum();
        *z *= (norm * (-0.5 * l * l * k2).exp()).sqrt();
    }

    fft_nd(&mut data, shape, &mut planner, true);
    let scale = 1.0 / total as f64;
    let values = data.iter().map(|z| z.re * scale).collect();
    Ok(FieldGrid { n, shape: shape.to_vec(), spacing, values, seed })
}

// Unnormalised n-d FFT, axis by axis.
fn fft_nd(data: &mut [Complex<f64>], shape: &[usize], planner: &mut FftPlanner<f64>, inverse: bool) {
    let st = strides(shape);
    let total = data.len();
    for (axis, &len) in shape.iter().enumerate() {
        let fft = if inverse { planner.plan_fft_inverse(len) } else { planner.plan_fft_forward(len) };
        let stride = st[axis];
        let mut line = vec![Complex::new(0.0, 0.0); len];
        for start in 0..total {
            // visit each line once, from its first element
            if !(start / stride).is_multiple_of(len) {
                continue;
            }
            for (i, v) in line.iter_mut().enumerate() {
                *v = data[start + i * stride];
            }
            fft.process(&mut line);
            for (i, v) in line.iter().enumerate() {
                data[start + i * stride] = *v;
            }
        }
    }
}

/// Jets harvested from a grid.
#[derive(Debug, Clone)]
pub struct GridJets {
    pub jets: Vec<PointJet>,
    /// Points dropped by the gradient degeneracy guard.
    pub skipped: usize,
}

const D1: [f64; 5] = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
const D2: [f64; 5] = [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0];

/// Gradient and Hessian at flat index `flat` by fourth-order central
/// differences, with periodic wrap.
pub fn jet_at(grid: &FieldGrid, flat: usize) -> PointJet {
    let n = grid.n;
    let st = grid.strides();
    let shape = &grid.shape;
    let h = grid.spacing;
    let idx = unravel(flat, shape);
    let at = |offsets: &[(usize, isize)]| -> f64 {
        let mut k = 0;
        for ax in 0..n {
            let mut i = idx[ax] as isize;
            for &(oax, o) in offsets {
                if oax == ax {
                    i += o;
                }
            }
            k += (i.rem_euclid(shape[ax] as isize) as usize) * st[ax];
        }
        grid.values[k]
    };

    let mut g = nalgebra::DVector::zeros(n);
    let mut hess = nalgebra::DMatrix::zeros(n, n);
    for a in 0..n {
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        for (k, o) in (-2isize..=2).enumerate() {
            let v = at(&[(a, o)]);
            d1 += D1[k] * v;
            d2 += D2[k] * v;
        }
        g[a] = d1 / h;
        hess[(a, a)] = d2 / (h * h);
        for b in 0..a {
            let mut m = 0.0;
            for (ka, oa) in (-2isize..=2).enumerate() {
                for (kb, ob) in (-2isize..=2).enumerate() {
                    if D1[ka] != 0.0 && D1[kb] != 0.0 {
                        m += D1[ka] * D1[kb] * at(&[(a, oa), (b, ob)]);
                    }
                }
            }
            hess[(a, b)] = m / (h * h);
            hess[(b, a)] = m / (h * h);
        }
    }
    PointJet::new(g, hess)
}

/// Jets at every grid point whose gradient clears the degeneracy guard
/// `GRADIENT_EPS * scale` (see [`crate::curvature::GRADIENT_EPS`]).
pub fn jets_from_grid(grid: &FieldGrid, scale: f64) -> GridJets {
    let threshold = crate::curvature::GRADIENT_EPS * scale;
    let results: Vec<Option<PointJet>> = (0..grid.len())
        .into_par_iter()
        .map(|flat| Some(jet_at(grid, flat)).filter(|j| j.gradient.norm() > threshold))
        .collect();
    let skipped = results.iter().filter(|r| r.is_none()).count();
    GridJets { jets: results.into_iter().flatten().collect(), skipped }
}

/// Principal curvatures pooled over `reals` independent realisations.
/// Realisation `r` uses seed `seed + r`. Returns the curvature vectors and
/// the number of skipped points.
pub fn sample_field_curvatures(
    model: &CorrelationModel,
    shape: &[usize],
    spacing: f64,
    reals: usize,
    seed: u64,
) -> Result<(Vec<Vec<f64>>, usize)> {
    let consts = model.constants()?;
    let scale = consts.grad_variance().sqrt();
    let per_real = (0..reals)
        .into_par_iter()
        .map(|r| {
            let grid = synthesize(model, shape, spacing, seed.wrapping_add(r as u64))?;
            Ok(curvatures_of_grid(&grid, scale))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut kappas = Vec::new();
    let mut skipped = 0;
    for (k, s) in per_real {
        kappas.extend(k);
        skipped += s;
    }
    Ok((kappas, skipped))
}

/// Curvatures at every non-degenerate point of one grid.
pub fn curvatures_of_grid(grid: &FieldGrid, scale: f64) -> (Vec<Vec<f64>>, usize) {
    let GridJets { jets, skipped } = jets_from_grid(grid, scale);
    let kappas: Vec<Vec<f64>> =
        jets.par_iter().filter_map(|j| principal_curvatures_scaled(j, scale).ok().map(|c| c.kappas)).collect();
    let dropped = jets.len() - kappas.len();
    (kappas, skipped + dropped)
}

/// JSON header written next to a raw field dump.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RawFieldHeader {
    pub shape: Vec<usize>,
    pub spacing: f64,
    pub endianness: String,
    pub dtype: String,
    /// Axis 0 varies fastest.
    pub order: String,
    pub seed: u64,
}

impl FieldGrid {
    pub fn raw_header(&self) -> RawFieldHeader {
        RawFieldHeader {
            shape: self.shape.clone(),
            spacing: self.spacing,
            endianness: "little".into(),
            dtype: "f64".into(),
            order: "axis0_fastest".into(),
            seed: self.seed,
        }
    }

    /// Values as little-endian `f64` bytes.
    pub fn raw_bytes(&self) -> Vec<u8> {
        self.values.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    pub fn from_raw(header: &RawFieldHeader, bytes: &[u8]) -> Result<FieldGrid> {
        let total: usize = header.shape.iter().product();
        if header.endianness != "little" || header.dtype != "f64" {
            return Err(Error::Unsupported(format!("{} {}", header.endianness, header.dtype)));
        }
        if bytes.len() != 8 * total {
            return Err(Error::DimensionMismatch { expected: 8 * total, got: bytes.len() });
        }
        let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(FieldGrid {
            n: header.shape.len(),
            shape: header.shape.clone(),
            spacing: header.spacing,
            values,
            seed: header.seed,
        })
    }
}
