//! Principal curvatures of isosurfaces in isotropic Gaussian random fields.
//!
//! The crate is organised bottom-up:
//!
//! - [`matops`]: vec/vech operators, commutation and duplication matrices.
//! - [`corrmodel`]: radial correlation families and the constants
//!   `rho2_0`, `rho4_0`, `alpha` that parameterise every closed form.
//! - [`covariance`]: lag-zero covariance of gradient and Hessian, and the
//!   matrices derived from it.
//! - [`ensemble`]: seeded Monte Carlo sampler of derivative jets.
//! - [`curvature`]: principal curvatures of the level set through a jet.
//! - [`density`]: closed-form densities of Hessian eigenvalues, gradient
//!   norm and principal curvatures, plus a numeric ratio-integral oracle.
//! - [`fieldgrid`]: spectral synthesis of periodic field realisations and
//!   finite-difference jets.
//! - [`validate`]: goodness-of-fit statistics and the validation report.

// NaN must fail positivity checks, so `!(x > 0.0)` is deliberate
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corrmodel;
pub mod covariance;
pub mod curvature;
pub mod density;
pub mod ensemble;
mod error;
pub mod fieldgrid;
pub mod matops;
pub mod quadrature;
pub mod validate;

pub use corrmodel::{CorrelationKind, CorrelationModel, DerivedConstants};
pub use covariance::CovarianceBundle;
pub use curvature::{principal_curvatures, CurvatureSample};
pub use density::DensitySpec;
pub use ensemble::{JetSampler, PointJet, SamplerConfig};
pub use error::{Error, Result};
pub use fieldgrid::FieldGrid;
pub use validate::{CheckRecord, Profile, ValidationConfig, ValidationReport};
