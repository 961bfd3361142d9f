//! Spatial sign covariance matrices and the eigenvalue map to elliptical shape.
//!
//! The crate covers four layers:
//!
//! * [`geometry`]: spatial signs, the spatial median, the sample spatial sign
//!   covariance matrix (SSCM) and the spatial Kendall's tau matrix.
//! * [`eigenmap`]: the map from trace-normalized shape eigenvalues to SSCM
//!   eigenvalues, the second-order `eta` table, the `Gamma` matrix and the
//!   asymptotic covariance of the sample SSCM, all evaluated with
//!   one-dimensional adaptive quadrature.
//! * [`inversemap`]: Newton inversion of that map and a consistent shape
//!   estimator built from the SSCM alone (works for `p > n`).
//! * [`oracle`]: elliptical samplers and Monte Carlo estimators used as
//!   independent ground truth.
//!
//! The [`cli`] module backs the `signshape` binary.

// NaN-rejecting negated comparisons and index loops over matrix storage are deliberate.
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::excessive_precision
)]

pub mod cli;
pub mod eigenmap;
mod error;
pub mod geometry;
pub mod inversemap;
mod linalg;
pub mod oracle;
pub mod quadrature;
mod spectrum;

pub use eigenmap::{asymptotic_cov, eta_table, gamma_matrix, phi, AsymptoticCov, EtaTable};
pub use error::{Error, Result};
pub use geometry::{
    sample_kendall_tau, sample_sscm, spatial_median, spatial_sign, Center, DataMatrix, EstimatorKind, MedianConfig,
    SpatialMedian, SscmEstimate,
};
pub use inversemap::{estimate_shape, invert_phi, InversionConfig, InversionResult, JacobianMethod, ShapeEstimate};
pub use quadrature::QuadratureConfig;
pub use spectrum::Spectrum;
