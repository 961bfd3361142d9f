//! Newton inversion of the eigenvalue map and the SSCM-based shape estimator.
//!
//! The unknowns are the distinct nonzero shape eigenvalues, written as
//! `λ_g ∝ exp(θ_g)` with the last `θ` pinned at zero. The map is invariant
//! under rescaling of `λ`, so this removes the sum constraint while keeping
//! every iterate strictly positive. Zero targets are fixed at zero and equal
//! targets share one unknown.
//!
//! With multiplicities `m_h`, the derivatives are
//!
//! ```text
//! ∂δ_g/∂θ_h = -m_h η_gh                  (h ≠ g)
//! ∂δ_g/∂θ_g =  Σ_{h≠g} m_h η_gh
//! ```
//!
//! so one extra quadrature pass over the `η` integrals yields the Jacobian.
//! A central-difference Jacobian is available for comparison.

use nalgebra::{DMatrix, DVector};

use crate::eigenmap::{group_moments, phi};
use crate::error::{invalid, Error, Result};
use crate::geometry::SscmEstimate;
use crate::linalg::sym_eigen_desc;
use crate::quadrature::QuadratureConfig;
use crate::spectrum::Spectrum;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JacobianMethod {
    /// Derivatives from the `η` integrals.
    Analytic,
    /// Central differences in `θ` with the given step, quadrature tightened to `rel_tol = 1e-12`.
    CentralDifference,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionConfig {
    /// Bound on `‖φ(λ) - δ‖_∞`.
    pub tol: f64,
    pub max_iter: usize,
    pub jacobian: JacobianMethod,
    /// Step for [`JacobianMethod::CentralDifference`].
    pub fd_step: f64,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 100,
            jacobian: JacobianMethod::Analytic,
            fd_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InversionResult {
    pub lambda: Spectrum,
    pub iterations: usize,
    /// `‖φ(λ) - δ_target‖_∞` at the returned `λ`.
    pub residual: f64,
    pub converged: bool,
}

/// Distinct nonzero target values and multiplicities.
struct Problem {
    targets: Vec<f64>,
    mult: Vec<usize>,
}

impl Problem {
    fn lambda_from_theta(&self, theta: &[f64]) -> Vec<f64> {
        let top = theta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let raw: Vec<f64> = theta.iter().map(|t| (t - top).exp()).collect();
        let total: f64 = raw.iter().zip(&self.mult).map(|(v, &m)| v * m as f64).sum();
        raw.into_iter().map(|v| v / total).collect()
    }

    /// `φ` per group, normalized to sum to one.
    fn delta(&self, lambda: &[f64], cfg: &QuadratureConfig) -> Result<Vec<f64>> {
        let gm = group_moments(lambda, &self.mult, false, cfg)?;
        let s = gm.delta_sum(&self.mult);
        Ok(gm.delta.into_iter().map(|d| d / s).collect())
    }

    fn residual(&self, delta: &[f64]) -> f64 {
        delta
            .iter()
            .zip(&self.targets)
            .map(|(d, t)| (d - t).abs())
            .fold(0.0, f64::max)
    }

    /// Reduced `(k-1) x (k-1)` Jacobian of `δ_1..δ_{k-1}` in `θ_1..θ_{k-1}`.
    fn jacobian(
        &self,
        theta: &[f64],
        lambda: &[f64],
        inv: &InversionConfig,
        cfg: &QuadratureConfig,
    ) -> Result<DMatrix<f64>> {
        let k = self.targets.len();
        let mut jac = DMatrix::zeros(k - 1, k - 1);
        match inv.jacobian {
            JacobianMethod::Analytic => {
                let gm = group_moments(lambda, &self.mult, true, cfg)?;
                let s = gm.delta_sum(&self.mult);
                for g in 0..k - 1 {
                    let mut diag = 0.0;
                    for h in 0..k {
                        if h == g {
                            continue;
                        }
                        let v = self.mult[h] as f64 * gm.cross(g, h) / s;
                        diag += v;
                        if h < k - 1 {
                            jac[(g, h)] = -v;
                        }
                    }
                    jac[(g, g)] = diag;
                }
            }
            JacobianMethod::CentralDifference => {
                let fine = cfg.with_rel_tol(cfg.rel_tol.min(1e-12));
                let h = inv.fd_step;
                let mut shifted = theta.to_vec();
                for col in 0..k - 1 {
                    shifted[col] = theta[col] + h;
                    let plus = self.delta(&self.lambda_from_theta(&shifted), &fine)?;
                    shifted[col] = theta[col] - h;
                    let minus = self.delta(&self.lambda_from_theta(&shifted), &fine)?;
                    shifted[col] = theta[col];
                    for row in 0..k - 1 {
                        jac[(row, col)] = (plus[row] - minus[row]) / (2.0 * h);
                    }
                }
            }
        }
        Ok(jac)
    }
}

/// Finds `λ ∈ Φ_p` with `‖φ(λ) - δ‖_∞ ≤ tol`.
///
/// Starts from `λ = δ` and takes damped Newton steps, halving the step until
/// the residual decreases. When the iteration budget runs out the best
/// iterate is returned with `converged = false`.
pub fn invert_phi(delta: &Spectrum, inv: &InversionConfig, cfg: &QuadratureConfig) -> Result<InversionResult> {
    cfg.validate()?;
    if !(inv.tol > 0.0) {
        return invalid(format!("inversion tolerance must be positive, got {}", inv.tol));
    }
    let groups = delta.groups();
    let index = delta.group_index();
    let assemble = |per_group: &[f64]| -> Spectrum {
        let v: Vec<f64> = index.iter().map(|g| g.map_or(0.0, |g| per_group[g])).collect();
        Spectrum::from_raw(v)
    };
    if groups.len() == 1 {
        let m = groups[0].1 as f64;
        return Ok(InversionResult {
            lambda: assemble(&[1.0 / m]),
            iterations: 0,
            residual: 0.0,
            converged: true,
        });
    }

    let (targets, mult): (Vec<f64>, Vec<usize>) = groups.into_iter().unzip();
    let problem = Problem { targets, mult };
    let k = problem.targets.len();
    let mut theta: Vec<f64> = problem.targets.iter().map(|t| t.ln()).collect();
    let pin = theta[k - 1];
    theta.iter_mut().for_each(|t| *t -= pin);

    let mut lambda = problem.lambda_from_theta(&theta);
    let mut current = problem.delta(&lambda, cfg)?;
    let mut residual = problem.residual(&current);
    let mut iterations = 0;

    while residual > inv.tol && iterations < inv.max_iter {
        iterations += 1;
        let jac = problem.jacobian(&theta, &lambda, inv, cfg)?;
        let rhs = DVector::from_iterator(k - 1, (0..k - 1).map(|g| problem.targets[g] - current[g]));
        let Some(step) = jac.lu().solve(&rhs) else {
            break;
        };

        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = theta
                .iter()
                .enumerate()
                .map(|(g, t)| if g < k - 1 { t + scale * step[g] } else { *t })
                .collect();
            let trial_lambda = problem.lambda_from_theta(&trial);
            if trial_lambda.iter().all(|v| *v > 0.0) {
                if let Ok(d) = problem.delta(&trial_lambda, cfg) {
                    let r = problem.residual(&d);
                    if r < residual {
                        theta = trial;
                        lambda = trial_lambda;
                        current = d;
                        residual = r;
                        accepted = true;
                        break;
                    }
                }
            }
            scale *= 0.5;
        }
        if !accepted {
            break;
        }
    }

    // order is guaranteed at a solution; repair one-ulp inversions only
    let mut per_group = lambda;
    for g in 1..k {
        if per_group[g] > per_group[g - 1] {
            per_group[g] = per_group[g - 1];
        }
    }
    Ok(InversionResult {
        lambda: assemble(&per_group),
        iterations,
        residual,
        converged: residual <= inv.tol,
    })
}

/// A trace-one shape matrix recovered from an SSCM.
#[derive(Debug, Clone)]
pub struct ShapeEstimate {
    pub matrix: DMatrix<f64>,
    pub eigenvectors: DMatrix<f64>,
    /// Eigenvalues of the SSCM after clamping and renormalization.
    pub delta: Spectrum,
    pub source: SscmEstimate,
    pub inversion: InversionResult,
    /// Whether negative SSCM eigenvalues had to be clamped to zero.
    pub clamped: bool,
}

/// Eigendecomposes the SSCM, inverts its eigenvalues and reassembles
/// `O diag(λ) O^T` with the same eigenvectors.
pub fn estimate_shape(sscm: &SscmEstimate, inv: &InversionConfig, cfg: &QuadratureConfig) -> Result<ShapeEstimate> {
    let m = &sscm.matrix;
    if !m.is_square() || m.nrows() == 0 {
        return invalid("SSCM must be a non-empty square matrix");
    }
    let asym = crate::linalg::max_abs_diff(m, &m.transpose());
    if asym > 1e-12 {
        return invalid(format!("SSCM is not symmetric (asymmetry {asym:.3e})"));
    }
    let (values, vectors) = sym_eigen_desc(m);
    let clamped = values.iter().any(|v| *v < 0.0);
    let values: Vec<f64> = values.into_iter().map(|v| v.max(0.0)).collect();
    let delta = Spectrum::new(values)?;
    let inversion = invert_phi(&delta, inv, cfg)?;
    let diag = DMatrix::from_diagonal(&DVector::from_column_slice(inversion.lambda.values()));
    let matrix = &vectors * diag * vectors.transpose();
    let matrix = 0.5 * (&matrix + matrix.transpose());
    let estimate = ShapeEstimate {
        matrix,
        eigenvectors: vectors,
        delta,
        source: sscm.clone(),
        inversion,
        clamped,
    };
    if estimate.inversion.converged {
        Ok(estimate)
    } else {
        Err(Error::InversionFailed(Box::new(estimate)))
    }
}

/// Convenience: `φ` followed by [`invert_phi`], returning the recovered spectrum.
pub fn round_trip(lambda: &Spectrum, inv: &InversionConfig, cfg: &QuadratureConfig) -> Result<InversionResult> {
    invert_phi(&phi(lambda, cfg)?, inv, cfg)
}
