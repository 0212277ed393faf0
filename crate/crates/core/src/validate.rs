//! Goodness-of-fit statistics and the validation suite.
//!
//! Every check produces a [`CheckRecord`]; the suite runs checks
//! concurrently and orders the report by check name. Statistics are reduced
//! sequentially from order-preserving parallel collections, so a report is
//! identical for any thread count once timings are stripped
//! ([`ValidationReport::without_timings`]).

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corrmodel::{CorrelationModel, DerivedConstants};
use crate::covariance::{sigma_det_closed_form, CovarianceBundle};
use crate::curvature::sample_curvatures;
use crate::density::DensitySpec;
use crate::ensemble::{JetSampler, PointJet};
use crate::error::{Error, Result};
use crate::fieldgrid::{curvatures_of_grid, synthesize};
use crate::matops::{commutation_matrix, dup_pinv, duplication_matrix, max_abs_diff, moore_penrose_residual, vech_len};
use crate::quadrature::{integrate_2d, integrate_real_line, Tolerance};

/// Asymptotic 1% critical value of the Kolmogorov distribution.
pub const KS_CRITICAL: f64 = 1.63;

/// Kolmogorov-Smirnov distance between the empirical CDF of `sorted` and
/// `cdf`. Ties are handled by the usual two-sided step formula.
pub fn ks_statistic<F: Fn(f64) -> f64>(sorted: &[f64], cdf: F) -> Result<f64> {
    check_sample(sorted)?;
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let c = cdf(x);
        d = d.max(c - i as f64 / n).max((i + 1) as f64 / n - c);
    }
    Ok(d)
}

/// Two-sample Kolmogorov-Smirnov distance; both inputs sorted.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    check_sample(a)?;
    check_sample(b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

fn check_sample(x: &[f64]) -> Result<()> {
    if x.len() < 10 {
        return Err(Error::TooFewSamples { needed: 10, got: x.len() });
    }
    // NaN fails the comparison and is reported as unsorted
    if !x.windows(2).all(|w| w[0] <= w[1]) || x.iter().any(|v| v.is_nan()) {
        return Err(Error::Unsorted);
    }
    Ok(())
}

/// Worst deviation, in standard-error units, of the empirical covariance of
/// `(g, vech H)` from `blockdiag(grad_cov, Sigma_n)`. The mean is known to be
/// zero, so raw second moments are used; the standard error of entry `(i, j)`
/// is `sqrt((S_ii S_jj + S_ij^2) / N)`.
pub fn empirical_cov_check(jets: &[PointJet], bundle: &CovarianceBundle) -> Result<f64> {
    const MIN_JETS: usize = 10_000;
    if jets.len() < MIN_JETS {
        return Err(Error::TooFewSamples { needed: MIN_JETS, got: jets.len() });
    }
    let n = bundle.n;
    let dim = n + vech_len(n);
    if let Some(j) = jets.iter().find(|j| j.dim() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: j.dim() });
    }
    let mut target = DMatrix::zeros(dim, dim);
    target.view_mut((0, 0), (n, n)).copy_from(&bundle.grad_cov);
    target.view_mut((n, n), (dim - n, dim - n)).copy_from(&bundle.sigma_n);

    let flats: Vec<Vec<f64>> = jets.par_iter().map(PointJet::flat).collect();
    let mut acc = DMatrix::<f64>::zeros(dim, dim);
    for x in &flats {
        for c in 0..dim {
            for r in c..dim {
                acc[(r, c)] += x[r] * x[c];
            }
        }
    }
    let count = jets.len() as f64;
    let mut worst: f64 = 0.0;
    for c in 0..dim {
        for r in c..dim {
            let se = ((target[(r, r)] * target[(c, c)] + target[(r, c)].powi(2)) / count).sqrt();
            worst = worst.max((acc[(r, c)] / count - target[(r, c)]).abs() / se);
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Reduced sample sizes, small grid; seconds.
    Fast,
    /// Stated sample sizes and the 256^2 grid check; minutes.
    #[default]
    Full,
}

impl std::str::FromStr for Profile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast" => Ok(Profile::Fast),
            "full" => Ok(Profile::Full),
            other => Err(Error::Unsupported(format!("unknown profile '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    pub profile: Profile,
    pub seed: u64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig { profile: Profile::Full, seed: 42 }
    }
}

/// Whether a check passes with its statistic below or above the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expect {
    Below,
    /// Negative controls: the statistic must exceed the threshold.
    Above,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    /// The result the check exercises.
    pub anchor: String,
    /// `None` when the check could not be evaluated; see `detail`.
    pub statistic: Option<f64>,
    pub threshold: f64,
    pub expect: Expect,
    pub passed: bool,
    pub sample_size: u64,
    pub seed: u64,
    pub budget_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub within_budget: Option<bool>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub profile: Profile,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<CheckRecord>,
}

impl ValidationReport {
    /// Copy with runtimes removed, for run-to-run comparison.
    pub fn without_timings(&self) -> ValidationReport {
        let mut r = self.clone();
        for c in &mut r.checks {
            c.runtime_s = None;
            c.within_budget = None;
        }
        r
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    pub fn from_json(s: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// What a check function returns before bookkeeping.
struct Outcome {
    statistic: Result<f64>,
    sample_size: u64,
    detail: String,
}

impl Outcome {
    fn exact(statistic: f64) -> Self {
        Outcome { statistic: Ok(statistic), sample_size: 0, detail: String::new() }
    }
}

type CheckFn = Box<dyn Fn(u64) -> Outcome + Send + Sync>;

struct Check {
    name: &'static str,
    anchor: &'static str,
    threshold: f64,
    expect: Expect,
    budget_s: f64,
    seed_offset: u64,
    run: CheckFn,
}

impl Check {
    fn execute(&self, base_seed: u64) -> CheckRecord {
        let seed = base_seed.wrapping_add(self.seed_offset);
        let t0 = Instant::now();
        let out = (self.run)(seed);
        let runtime = t0.elapsed().as_secs_f64();
        let (statistic, detail) = match out.statistic {
            Ok(v) => (Some(v), out.detail),
            Err(e) => (None, e.to_string()),
        };
        let passed = match (statistic, self.expect) {
            (Some(v), Expect::Below) => v < self.threshold,
            (Some(v), Expect::Above) => v > self.threshold,
            (None, _) => false,
        };
        CheckRecord {
            name: self.name.to_string(),
            anchor: self.anchor.to_string(),
            statistic,
            threshold: self.threshold,
            expect: self.expect,
            passed,
            sample_size: out.sample_size,
            seed,
            budget_s: self.budget_s,
            runtime_s: Some(runtime),
            within_budget: Some(runtime <= self.budget_s),
            detail,
        }
    }
}

struct Sizes {
    cov_jets: usize,
    ks_samples: usize,
    sigma_samples: usize,
    grid_reals: usize,
    grid_side: usize,
}

impl Sizes {
    fn of(profile: Profile) -> Self {
        match profile {
            Profile::Full => Sizes {
                cov_jets: 100_000,
                ks_samples: 1_000_000,
                sigma_samples: 100_000,
                grid_reals: 20,
                grid_side: 256,
            },
            Profile::Fast => {
                Sizes { cov_jets: 20_000, ks_samples: 100_000, sigma_samples: 20_000, grid_reals: 4, grid_side: 128 }
            }
        }
    }
}

fn unit_gaussian() -> CorrelationModel {
    CorrelationModel::gaussian(1.0, 1.0).expect("valid model")
}

/// Gaussian model with `alpha = 1/6`.
fn alpha_sixth_model() -> CorrelationModel {
    CorrelationModel::gaussian(1.0 / 3f64.sqrt(), 1.0).expect("valid model")
}

fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(rng)).qr().q()
}

fn linspace(a: f64, b: f64, k: usize) -> Vec<f64> {
    (0..k).map(|i| a + (b - a) * i as f64 / (k - 1) as f64).collect()
}

/// Sorted single curvatures (`n = 2`) from the point ensemble.
fn ensemble_kappas(consts: DerivedConstants, seed: u64, count: usize) -> (Vec<f64>, usize) {
    let sampler = JetSampler::new(2, consts, seed);
    let (samples, skipped) = sample_curvatures(&sampler, count);
    let mut k: Vec<f64> = samples.into_iter().map(|s| s.kappas[0]).collect();
    k.sort_by(f64::total_cmp);
    (k, skipped)
}

fn checks(profile: Profile) -> Vec<Check> {
    let sz = Sizes::of(profile);
    let mut out: Vec<Check> = Vec::new();

    out.push(Check {
        name: "01_duplication_identity",
        anchor: "D_n D_n^+ = (I + C_n)/2",
        threshold: 1e-14,
        expect: Expect::Below,
        budget_s: 1.0,
        seed_offset: 0,
        run: Box::new(|_| {
            let worst = (1..=6)
                .map(|n| {
                    let nn = n * n;
                    let lhs = duplication_matrix(n) * dup_pinv(n);
                    let rhs = (DMatrix::identity(nn, nn) + commutation_matrix(n)) * 0.5;
                    max_abs_diff(&lhs, &rhs)
                })
                .fold(0.0, f64::max);
            Outcome::exact(worst)
        }),
    });

    let cov_jets = sz.cov_jets;
    out.push(Check {
        name: "02_hessian_covariance",
        anchor: "lag-zero covariance of gradient and Hessian",
        threshold: 5.0,
        expect: Expect::Below,
        budget_s: 30.0,
        seed_offset: 2,
        run: Box::new(move |seed| {
            let consts = unit_gaussian().constants().expect("gaussian constants");
            let mut worst: f64 = 0.0;
            let mut detail = Vec::new();
            for n in [2, 3] {
                let jets = JetSampler::new(n, consts, seed.wrapping_add(n as u64)).jets(0, cov_jets);
                match empirical_cov_check(&jets, &CovarianceBundle::build(n, consts)) {
                    Ok(se) => {
                        detail.push(format!("n={n}: {se:.3} SE"));
                        worst = worst.max(se);
                    }
                    Err(e) => return Outcome { statistic: Err(e), sample_size: 0, detail: String::new() },
                }
            }
            Outcome { statistic: Ok(worst), sample_size: 2 * cov_jets as u64, detail: detail.join(", ") }
        }),
    });

    out.push(Check {
        name: "03a_hessian_pinv",
        anchor: "closed-form pseudoinverse of the Hessian covariance",
        threshold: 1e-12,
        expect: Expect::Below,
        budget_s: 1.0,
        seed_offset: 0,
        run: Box::new(|_| {
            let consts = unit_gaussian().constants().expect("gaussian constants");
            let worst = (1..=5)
                .map(|n| {
                    let b = CovarianceBundle::build(n, consts);
                    moore_penrose_residual(&b.hess_cov, &b.hess_cov_pinv())
                        .max(moore_penrose_residual(&duplication_matrix(n), &dup_pinv(n)))
                })
                .fold(0.0, f64::max);
            Outcome::exact(worst)
        }),
    });

    out.push(Check {
        name: "03b_sigma_determinant",
        anchor: "determinant of Sigma_n",
        threshold: 1e-9,
        expect: Expect::Below,
        budget_s: 1.0,
        seed_offset: 0,
        run: Box::new(|_| {
            let mut worst: f64 = 0.0;
            for consts in [
                unit_gaussian().constants().expect("constants"),
                DerivedConstants::new(-1.0, 3.0, 2.0).expect("constants"),
            ] {
                for n in 1..=5 {
                    let b = CovarianceBundle::build(n, consts);
                    let numeric = b.sigma_n.clone().lu().determinant();
                    let closed = sigma_det_closed_form(n, b.hess_scale());
                    worst = worst.max(((numeric - closed) / closed).abs());
                }
            }
            Outcome::exact(worst)
        }),
    });

    out.push(Check {
        name: "04_quadratic_form_reduction",
        anchor: "eigen-reduction of the vech(H) quadratic form",
        threshold: 1e-9,
        expect: Expect::Below,
        budget_s: 5.0,
        seed_offset: 4,
        run: Box::new(|seed| {
            let consts = unit_gaussian().constants().expect("gaussian constants");
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut worst: f64 = 0.0;
            for n in [2, 3, 4] {
                let b = CovarianceBundle::build(n, consts);
                for _ in 0..100 {
                    let r = random_orthogonal(n, &mut rng);
                    let lam: Vec<f64> = (0..n)
                        .map(|_| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            3.0 * z
                        })
                        .collect();
                    match b.quadratic_form_reduction(&r, &lam) {
                        Ok((lhs, rhs)) => worst = worst.max((lhs - rhs).abs() / (1.0 + rhs.abs())),
                        Err(e) => return Outcome { statistic: Err(e), sample_size: 0, detail: String::new() },
                    }
                }
            }
            Outcome { statistic: Ok(worst), sample_size: 300, detail: String::new() }
        }),
    });

    out.push(Check {
        name: "05a_eig_pdf_normalisation",
        anchor: "joint eigenvalue density, m = 2",
        threshold: 1e-6,
        expect: Expect::Below,
        budget_s: 10.0,
        seed_offset: 0,
        run: Box::new(|_| {
            let consts = unit_gaussian().constants().expect("gaussian constants");
            let s = DensitySpec::new(2, consts);
            let tol = Tolerance::new(1e-11, 1e-10);
            let r = integrate_real_line(
                |x| integrate_real_line(|y| s.eig_pdf(&[x, y]), &[x], tol).map(|r| r.value).unwrap_or(f64::NAN),
                &[],
                tol,
            );
            Outcome { statistic: r.map(|r| (r.value - 1.0).abs()), sample_size: 0, detail: String::new() }
        }),
    });

    out.push(Check {
        name: "05b_eig_pdf_one_dimensional",
        anchor: "joint eigenvalue density, m = 1",
        threshold: 1e-14,
        expect: Expect::Below,
        budget_s: 10.0,
        seed_offset: 0,
        run: Box::new(|_| {
            let consts = unit_gaussian().constants().expect("gaussian constants");
            let v = 3.0 * consts.hess_scale();
            let worst = linspace(-6.0, 6.0, 121)
                .into_iter()
                .map(|x| {
                    let normal = (-x * x / (2.0 * v)).exp() / (2.0 * PI * v).sqrt();
                    ((crate::density::eig_pdf(&consts, &[x]) - normal) / normal).abs()
                })
                .fold(0.0, f64::max);
            Outcome::exact(worst)
        }),
    });

    out.push(Check {
        name: "06a_curvature_pdf_normalisation_n2",
        anchor: "principal curvature density, n = 2",
        threshold: 1e-8,
        expect: Expect::Below,
        budget_s: 30.0,
        seed_offset: 0,
        run: Box::new(|_| {
            let s = DensitySpec::new(2, unit_gaussian().constants().expect("gaussian constants"));
            let r = integrate_real_line(|k| s.curvature_pdf(&[k]), &[], Tolerance::new(1e-13, 1e-12));
            Outcome { statistic: r.map(|r| (r.value - 1.0).abs()), sample_size: 0, detail: String::new() }
        }),
    });

    out.push(Check {
        name: "06b_curvature_pdf_normalisation_n3",
        anchor: "principal curvature density, n = 3",
        threshold: 1e-6,
        expect: Expect::Below,
        budget_s: 30.0,
        seed_offset: 0,
        run: Box::new(|_| {
            let s = DensitySpec::new(3, unit_gaussian().constants().expect("gaussian constants"));
            // integrate over the real plane in theta = atan(kappa) coordinates
            let h = std::f64::consts::FRAC_PI_2;
            let f = |t1: f64, t2: f64| {
                let (c1, c2) = (t1.cos(), t2.cos());
                if c1 <= 0.0 || c2 <= 0.0 {
                    return 0.0;
                }
                s.curvature_pdf(&[t1.tan(), t2.tan()]) / (c1 * c1 * c2 * c2)
            };
            let tol = Tolerance::new(1e-10, 1e-9);
            let r = integrate_2d(f, &[-h, 0.0, h], |t1| vec![-h, t1, h], tol, tol);
            Outcome { statistic: r.map(|r| (r.value - 1.0).abs()), sample_size: 0, detail: String::new() }
        }),
    });

    out.push(Check {
        name: "06c_curvature_pdf_hand_reduction",
        anchor: "n = 2 curvature density sqrt(alpha/6) (1 + 2 alpha k^2/3)^(-3/2)",
        threshold: 1e-12,
        expect: Expect::Below,
        budget_s: 30.0,
        seed_offset: 0,
        run: Box::new(|_| {
            let mut worst: f64 = 0.0;
            for l in [0.5, 1.0, 1.0 / 3f64.sqrt(), 2.0] {
                let consts = CorrelationModel::gaussian(l, 1.0).and_then(|m| m.constants()).expect("constants");
                let s = DensitySpec::new(2, consts);
                let a = consts.alpha;
                for k in linspace(-10.0, 10.0, 201) {
                    let hand = (a / 6.0).sqrt() * (1.0 + 2.0 * a * k * k / 3.0).powf(-1.5);
                    worst = worst.max(((s.curvature_pdf(&[k]) - hand) / hand).abs());
                }
            }
            Outcome::exact(worst)
        }),
    });

    out.push(Check {
        name: "07_ratio_integral",
        anchor: "curvature density as an integral over the gradient norm",
        threshold: 1e-6,
        expect: Expect::Below,
        budget_s: 60.0,
        seed_offset: 0,
        run: Box::new(|_| {
            let consts = unit_gaussian().constants().expect("gaussian constants");
            let s2 = DensitySpec::new(2, consts);
            let s3 = DensitySpec::new(3, consts);
            let mut points: Vec<(DensitySpec, Vec<f64>)> =
                linspace(-5.0, 5.0, 100).into_iter().map(|k| (s2, vec![k])).collect();
            let axis = linspace(-3.0, 3.0, 10);
            for &a in &axis {
                for &b in &axis {
                    points.push((s3, vec![a, b]));
                }
            }
            let diffs: Result<Vec<f64>> = points
                .par_iter()
                .map(|(s, k)| s.ratio_integral_pdf(k).map(|r| (r - s.curvature_pdf(k)).abs()))
                .collect();
            Outcome {
                statistic: diffs.map(|d| d.into_iter().fold(0.0, f64::max)),
                sample_size: 200,
                detail: String::new(),
            }
        }),
    });

    let ks_n = sz.ks_samples;
    let ks_threshold = 2.0 * KS_CRITICAL / (ks_n as f64).sqrt();
    out.push(Check {
        name: "08a_point_ensemble_ks",
        anchor: "principal curvature law, n = 2, alpha = 1/6",
        threshold: ks_threshold,
        expect: Expect::Below,
        budget_s: 120.0,
        seed_offset: 8,
        run: Box::new(move |seed| {
            let consts = alpha_sixth_model().constants().expect("constants");
            let (k, skipped) = ensemble_kappas(consts, seed, ks_n);
            let s = DensitySpec::new(2, consts);
            Outcome {
                statistic: ks_statistic(&k, |x| s.curvature_cdf_1d(x).unwrap_or(f64::NAN)),
                sample_size: k.len() as u64,
                detail: format!("alpha = {:.6}, skipped = {skipped}", consts.alpha),
            }
        }),
    });

    out.push(Check {
        name: "08b_negative_control",
        anchor: "principal curvature law with alpha perturbed by 20%",
        threshold: ks_threshold,
        expect: Expect::Above,
        budget_s: 120.0,
        seed_offset: 8,
        run: Box::new(move |seed| {
            let consts = alpha_sixth_model().constants().expect("constants");
            let (k, _) = ensemble_kappas(consts, seed, ks_n);
            // alpha = -rho2 / (2 rho4); dividing rho4 by 1.2 scales alpha by 1.2
            let wrong = DerivedConstants::new(consts.rho2_0, consts.rho4_0 / 1.2, consts.sigma2).expect("constants");
            let s = DensitySpec::new(2, wrong);
            Outcome {
                statistic: ks_statistic(&k, |x| s.curvature_cdf_1d(x).unwrap_or(f64::NAN)),
                sample_size: k.len() as u64,
                detail: format!("tested against alpha = {:.6}", wrong.alpha),
            }
        }),
    });

    out.push(Check {
        name: "09a_sigma_invariance_pdf",
        anchor: "curvature density does not depend on sigma^2",
        threshold: 1e-12,
        expect: Expect::Below,
        budget_s: 30.0,
        seed_offset: 0,
        run: Box::new(|_| {
            let spec = |v: f64| {
                DensitySpec::new(2, CorrelationModel::gaussian(1.0, v).and_then(|m| m.constants()).expect("constants"))
            };
            let reference = spec(1.0);
            let mut worst: f64 = 0.0;
            for v in [0.1, 10.0] {
                let s = spec(v);
                for k in linspace(-8.0, 8.0, 161) {
                    let r = reference.curvature_pdf(&[k]);
                    worst = worst.max(((s.curvature_pdf(&[k]) - r) / r).abs());
                }
            }
            let s3 = |v: f64| {
                DensitySpec::new(3, CorrelationModel::gaussian(1.0, v).and_then(|m| m.constants()).expect("constants"))
            };
            let r3 = s3(1.0);
            for v in [0.1, 10.0] {
                let s = s3(v);
                for k in [[-1.0, 0.5], [0.3, 2.0], [-2.0, -0.1]] {
                    let r = r3.curvature_pdf(&k);
                    worst = worst.max(((s.curvature_pdf(&k) - r) / r).abs());
                }
            }
            Outcome::exact(worst)
        }),
    });

    let sigma_n = sz.sigma_samples;
    out.push(Check {
        name: "09b_sigma_invariance_samples",
        anchor: "sampled curvatures do not depend on sigma^2",
        threshold: KS_CRITICAL * (2.0 / sigma_n as f64).sqrt(),
        expect: Expect::Below,
        budget_s: 30.0,
        seed_offset: 9,
        run: Box::new(move |seed| {
            let c = |v: f64| CorrelationModel::gaussian(1.0, v).and_then(|m| m.constants()).expect("constants");
            let (a, _) = ensemble_kappas(c(0.1), seed, sigma_n);
            let (b, _) = ensemble_kappas(c(10.0), seed.wrapping_add(1), sigma_n);
            Outcome { statistic: ks_two_sample(&a, &b), sample_size: (a.len() + b.len()) as u64, detail: String::new() }
        }),
    });

    let (reals, side) = (sz.grid_reals, sz.grid_side);
    let grid_label = format!("{reals} x {side}^2");
    let grid = move |seed: u64, factor: usize| -> Result<(Vec<f64>, usize)> {
        let model = unit_gaussian();
        let consts = model.constants()?;
        let scale = consts.grad_variance().sqrt();
        let per: Vec<(Vec<Vec<f64>>, usize)> = (0..reals as u64)
            .into_par_iter()
            .map(|r| {
                let g = synthesize(&model, &[side, side], 0.125, seed.wrapping_add(r))?;
                let g = if factor > 1 { g.subsample(factor) } else { g };
                Ok(curvatures_of_grid(&g, scale))
            })
            .collect::<Result<_>>()?;
        let mut k = Vec::new();
        let mut skipped = 0;
        for (ks, s) in per {
            k.extend(ks.into_iter().map(|v| v[0]));
            skipped += s;
        }
        k.sort_by(f64::total_cmp);
        Ok((k, skipped))
    };
    let grid_ks = move |seed: u64, factor: usize| -> Result<(f64, usize)> {
        let (k, _) = grid(seed, factor)?;
        let s = DensitySpec::new(2, unit_gaussian().constants()?);
        Ok((ks_statistic(&k, |x| s.curvature_cdf_1d(x).unwrap_or(f64::NAN))?, k.len()))
    };
    let label = grid_label.clone();
    out.push(Check {
        name: "10a_grid_ks",
        anchor: "principal curvature law on synthesised fields, n = 2",
        threshold: 0.05,
        expect: Expect::Below,
        budget_s: 600.0,
        seed_offset: 10,
        run: Box::new(move |seed| match grid_ks(seed, 1) {
            Ok((d, count)) => {
                Outcome { statistic: Ok(d), sample_size: count as u64, detail: format!("{label}, spacing l/8") }
            }
            Err(e) => Outcome { statistic: Err(e), sample_size: 0, detail: String::new() },
        }),
    });
    out.push(Check {
        name: "10b_grid_refinement",
        anchor: "finite-difference bias shrinks as spacing halves",
        threshold: 0.0,
        expect: Expect::Below,
        budget_s: 600.0,
        seed_offset: 10,
        run: Box::new(move |seed| {
            let both = grid_ks(seed, 1).and_then(|fine| grid_ks(seed, 2).map(|coarse| (fine, coarse)));
            match both {
                Ok(((fine, nf), (coarse, nc))) => Outcome {
                    statistic: Ok(fine - coarse),
                    sample_size: (nf + nc) as u64,
                    detail: format!("{grid_label}: KS {fine:.6} at l/8 vs {coarse:.6} at l/4"),
                },
                Err(e) => Outcome { statistic: Err(e), sample_size: 0, detail: String::new() },
            }
        }),
    });

    out
}

/// Runs the whole suite. Checks run concurrently; records come back sorted
/// by name.
pub fn run_full_validation(config: &ValidationConfig) -> ValidationReport {
    let mut records: Vec<CheckRecord> = checks(config.profile).par_iter().map(|c| c.execute(config.seed)).collect();
    records.sort_by(|a, b| a.name.cmp(&b.name));
    ValidationReport {
        profile: config.profile,
        seed: config.seed,
        passed: records.iter().all(|r| r.passed),
        checks: records,
    }
}

/// Names of the checks in a profile, in report order.
pub fn check_names(profile: Profile) -> Vec<&'static str> {
    let mut names: Vec<&'static str> = checks(profile).iter().map(|c| c.name).collect();
    names.sort();
    names
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn std_normal_cdf(x: f64) -> f64 {
        Normal::new(0.0, 1.0).unwrap().cdf(x)
    }

    #[test]
    fn ks_at_quantiles() {
        let n = 1000;
        let normal = Normal::new(0.0, 1.0).unwrap();
        let x: Vec<f64> = (1..=n).map(|i| normal.inverse_cdf(i as f64 / (n + 1) as f64)).collect();
        let d = ks_statistic(&x, std_normal_cdf).unwrap();
        assert!(d <= 1.0 / (n + 1) as f64 + 1e-12, "{d}");
    }

    #[test]
    fn ks_detects_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut x: Vec<f64> = (0..10_000)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                3.0 + z
            })
            .collect();
        x.sort_by(f64::total_cmp);
        assert!(ks_statistic(&x, std_normal_cdf).unwrap() > 0.5);
    }

    #[test]
    fn ks_with_ties() {
        // five copies of 0 and five of 1 against uniform(0, 1): the
        // empirical CDF jumps to 1/2 at 0 and to 1 at 1
        let x = [0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        let d = ks_statistic(&x, |v: f64| v.clamp(0.0, 1.0)).unwrap();
        assert!((d - 0.5).abs() < 1e-15);
        let d2 = ks_two_sample(&x, &[0.0; 10]).unwrap();
        assert!((d2 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ks_rejects_bad_input() {
        assert_eq!(ks_statistic(&[1.0; 5], std_normal_cdf), Err(Error::TooFewSamples { needed: 10, got: 5 }));
        let mut x: Vec<f64> = (0..20).map(f64::from).collect();
        x.swap(3, 4);
        assert_eq!(ks_statistic(&x, std_normal_cdf), Err(Error::Unsorted));
        x.swap(3, 4);
        x[19] = f64::NAN;
        assert_eq!(ks_statistic(&x, std_normal_cdf), Err(Error::Unsorted));
    }

    #[test]
    fn two_sample_identical_and_disjoint() {
        let a: Vec<f64> = (0..100).map(f64::from).collect();
        assert_eq!(ks_two_sample(&a, &a).unwrap(), 0.0);
        let b: Vec<f64> = (200..300).map(f64::from).collect();
        assert_eq!(ks_two_sample(&a, &b).unwrap(), 1.0);
    }

    fn consts() -> DerivedConstants {
        unit_gaussian().constants().unwrap()
    }

    #[test]
    fn covariance_self_test_and_negative_control() {
        let c = consts();
        let bundle = CovarianceBundle::build(2, c);
        let jets = JetSampler::new(2, c, 11).jets(0, 100_000);
        assert!(empirical_cov_check(&jets, &bundle).unwrap() < 5.0);

        let corrupted: Vec<PointJet> = jets
            .iter()
            .map(|j| {
                let mut g = j.gradient.clone();
                g[0] += 0.3 * j.hessian[(0, 0)];
                PointJet::new(g, j.hessian.clone())
            })
            .collect();
        assert!(empirical_cov_check(&corrupted, &bundle).unwrap() > 10.0);
        assert!(empirical_cov_check(&jets[..100], &bundle).is_err());
    }

    #[test]
    fn one_dimensional_hessian_variance() {
        let c = consts();
        let jets = JetSampler::new(1, c, 12).jets(0, 100_000);
        assert!(empirical_cov_check(&jets, &CovarianceBundle::build(1, c)).unwrap() < 5.0);
        let var = jets.iter().map(|j| j.hessian[(0, 0)].powi(2)).sum::<f64>() / jets.len() as f64;
        let target = 3.0 * c.hess_scale();
        assert!((var - target).abs() < 5.0 * target * (2.0 / jets.len() as f64).sqrt());
    }

    #[test]
    fn record_bookkeeping() {
        let above = Check {
            name: "x",
            anchor: "a",
            threshold: 1.0,
            expect: Expect::Above,
            budget_s: 10.0,
            seed_offset: 3,
            run: Box::new(|seed| Outcome::exact(seed as f64)),
        };
        let r = above.execute(5);
        assert_eq!(r.seed, 8);
        assert_eq!(r.statistic, Some(8.0));
        assert!(r.passed);
        assert_eq!(r.within_budget, Some(true));

        let failing = Check {
            name: "y",
            anchor: "a",
            threshold: 1.0,
            expect: Expect::Below,
            budget_s: 10.0,
            seed_offset: 0,
            run: Box::new(|_| Outcome { statistic: Err(Error::Unsorted), sample_size: 0, detail: String::new() }),
        };
        let r = failing.execute(0);
        assert!(!r.passed);
        assert_eq!(r.statistic, None);
        assert!(!r.detail.is_empty());
    }

    #[test]
    fn fast_profile_passes_and_is_deterministic() {
        let config = ValidationConfig { profile: Profile::Fast, seed: 42 };
        let one =
            rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| run_full_validation(&config));
        let four =
            rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(|| run_full_validation(&config));
        let failed: Vec<String> = one
            .failures()
            .map(|c| format!("{}: {:?} vs {} ({})", c.name, c.statistic, c.threshold, c.detail))
            .collect();
        assert!(failed.is_empty(), "{failed:?}");
        assert_eq!(one.without_timings().to_json(), four.without_timings().to_json());
        let names: Vec<&str> = one.checks.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, check_names(Profile::Fast));
        let back = ValidationReport::from_json(&one.to_json()).unwrap();
        assert_eq!(back, one);
    }
}
