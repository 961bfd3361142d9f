//! The eigenvalue map from a trace-normalized shape matrix to its SSCM.
//!
//! For shape eigenvalues `λ` the SSCM eigenvalues are
//!
//! ```text
//! δ_i = (λ_i / 2) ∫_0^∞ dx / [ (1 + λ_i x) Π_j (1 + λ_j x)^{1/2} ]
//! ```
//!
//! and the second-order terms `η_ij = E{λ_i Y_i² λ_j Y_j² / (Σ_k λ_k Y_k²)²}`
//! have the companion representations
//!
//! ```text
//! η_ij = (λ_i λ_j / 4) ∫_0^∞ x dx / [ (1 + λ_i x)(1 + λ_j x) Π_k (1 + λ_k x)^{1/2} ],  i ≠ j
//! η_ii = (3 λ_i² / 4) ∫_0^∞ x dx / [ (1 + λ_i x)² Π_k (1 + λ_k x)^{1/2} ]
//! ```
//!
//! Equal eigenvalues are grouped so each distinct value costs one integral,
//! and all integrals share one adaptive subdivision of the half line. The
//! product is accumulated as `exp(-½ Σ m_g log1p(λ_g x))` so it neither
//! overflows nor underflows prematurely in thousands of dimensions.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::linalg::orthogonality_defect;
use crate::quadrature::{integrate_semi_infinite, QuadratureConfig};
use crate::spectrum::Spectrum;

/// Largest dimension for which the dense `p² x p²` matrices are assembled.
pub const MAX_DENSE_DIM: usize = 64;

/// Integrals for a spectrum given as distinct values `λ_g` with multiplicities `m_g`.
#[derive(Debug, Clone)]
pub(crate) struct GroupMoments {
    /// `δ_g` for a single coordinate of group `g` (not normalized).
    pub delta: Vec<f64>,
    /// `(λ_g² / 4) ∫ x / (1 + λ_g x)² Π ...`: `η` between two distinct
    /// coordinates of the same group; the diagonal `η_ii` is three times this.
    pub same: Vec<f64>,
    /// `η_gh` for `g < h`, packed row by row.
    pub cross: Vec<f64>,
}

impl GroupMoments {
    pub fn cross(&self, g: usize, h: usize) -> f64 {
        let k = self.delta.len();
        let (a, b) = if g < h { (g, h) } else { (h, g) };
        self.cross[a * (2 * k - a - 1) / 2 + (b - a - 1)]
    }

    /// `Σ_g m_g δ_g`, equal to one up to quadrature error.
    pub fn delta_sum(&self, mult: &[usize]) -> f64 {
        self.delta.iter().zip(mult).map(|(d, &m)| d * m as f64).sum()
    }
}

/// Evaluates the grouped integrals. Values need not be sorted or normalized,
/// but must be positive.
pub(crate) fn group_moments(
    values: &[f64],
    mult: &[usize],
    with_eta: bool,
    cfg: &QuadratureConfig,
) -> Result<GroupMoments> {
    let k = values.len();
    debug_assert_eq!(k, mult.len());
    let n_cross = if with_eta { k * (k - 1) / 2 } else { 0 };
    let n_same = if with_eta { k } else { 0 };
    let dim = k + n_same + n_cross;
    let half_mult: Vec<f64> = mult.iter().map(|&m| 0.5 * m as f64).collect();
    let mut c = vec![0.0; k];

    let result = integrate_semi_infinite(
        |x, jac, out| {
            let log_prod: f64 = values
                .iter()
                .zip(&half_mult)
                .map(|(&l, &hm)| hm * (l * x).ln_1p())
                .sum();
            let base = jac * (-log_prod).exp();
            for (cg, &l) in c.iter_mut().zip(values) {
                *cg = l / (1.0 + l * x);
            }
            for g in 0..k {
                out[g] = 0.5 * c[g] * base;
            }
            if with_eta {
                let xb = 0.25 * x * base;
                for g in 0..k {
                    out[k + g] = xb * c[g] * c[g];
                }
                let mut idx = 2 * k;
                for g in 0..k {
                    let cg = xb * c[g];
                    for h in g + 1..k {
                        out[idx] = cg * c[h];
                        idx += 1;
                    }
                }
            }
        },
        dim,
        cfg,
    )?;

    let mut v = result.values;
    let cross = if with_eta { v.split_off(2 * k) } else { Vec::new() };
    let same = if with_eta { v.split_off(k) } else { Vec::new() };
    Ok(GroupMoments { delta: v, same, cross })
}

/// Errors when `Σ δ` is further from one than `10 · rel_tol`.
fn check_sum(sum: f64, cfg: &QuadratureConfig) -> Result<()> {
    let defect = (sum - 1.0).abs();
    let allowed = 10.0 * cfg.rel_tol;
    if defect > allowed || !defect.is_finite() {
        return Err(Error::SumDefect { defect, allowed });
    }
    Ok(())
}

/// Expands per-group values to coordinates (zero for zero eigenvalues) and
/// repairs one-ulp order inversions between adjacent groups.
fn expand(lambda: &Spectrum, per_group: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = lambda
        .group_index()
        .iter()
        .map(|g| g.map_or(0.0, |g| per_group[g]))
        .collect();
    for i in 1..out.len() {
        if out[i] > out[i - 1] {
            out[i] = out[i - 1];
        }
    }
    out
}

/// Maps shape eigenvalues `λ` to SSCM eigenvalues `δ`.
///
/// The result is renormalized to sum to one; a pre-normalization defect above
/// `10 · rel_tol` is reported as an error.
pub fn phi(lambda: &Spectrum, cfg: &QuadratureConfig) -> Result<Spectrum> {
    cfg.validate()?;
    let groups = lambda.groups();
    if groups.len() == 1 {
        let m = groups[0].1 as f64;
        return Ok(Spectrum::from_raw(expand(lambda, &[1.0 / m])));
    }
    let (values, mult): (Vec<f64>, Vec<usize>) = groups.into_iter().unzip();
    let gm = group_moments(&values, &mult, false, cfg)?;
    let sum = gm.delta_sum(&mult);
    check_sum(sum, cfg)?;
    let delta: Vec<f64> = gm.delta.iter().map(|d| d / sum).collect();
    Ok(Spectrum::from_raw(expand(lambda, &delta)))
}

/// Symmetric `p x p` table of the expectations `η_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaTable {
    pub entries: DMatrix<f64>,
}

impl EtaTable {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// `Σ_j η_ij`, which equals `δ_i`.
    pub fn row_sums(&self) -> Vec<f64> {
        self.entries.row_iter().map(|r| r.sum()).collect()
    }
}

/// Computes the `η` table, scaled so that `Σ_ij η_ij = 1`. The row sums
/// reproduce [`phi`] up to quadrature error.
pub fn eta_table(lambda: &Spectrum, cfg: &QuadratureConfig) -> Result<EtaTable> {
    cfg.validate()?;
    let p = lambda.len();
    let groups = lambda.groups();
    let index = lambda.group_index();
    let mut entries = DMatrix::zeros(p, p);
    if groups.len() == 1 && groups[0].1 == 1 {
        // a single nonzero eigenvalue: the ratio is identically one
        let i = index.iter().position(Option::is_some).unwrap_or(0);
        entries[(i, i)] = 1.0;
        return Ok(EtaTable { entries });
    }
    let (values, mult): (Vec<f64>, Vec<usize>) = groups.into_iter().unzip();
    let gm = group_moments(&values, &mult, true, cfg)?;
    check_sum(gm.delta_sum(&mult), cfg)?;
    for i in 0..p {
        let Some(gi) = index[i] else { continue };
        for j in 0..p {
            let Some(gj) = index[j] else { continue };
            entries[(i, j)] = if i == j {
                3.0 * gm.same[gi]
            } else if gi == gj {
                gm.same[gi]
            } else {
                gm.cross(gi, gj)
            };
        }
    }
    // Σ_ij η_ij = 1 exactly in theory
    let total = entries.sum();
    check_sum(total, cfg)?;
    entries /= total;
    Ok(EtaTable { entries })
}

fn check_dense_dim(p: usize) -> Result<()> {
    if p > MAX_DENSE_DIM {
        return invalid(format!(
            "dense {0}x{0} asymptotic matrices are limited to p <= {MAX_DENSE_DIM}, got p = {p}",
            p * p
        ));
    }
    Ok(())
}

/// Places an `η` table into the `p² x p²` matrix
/// `Γ = E{vec(M) vec(M)^T}`, `M = Λ^{1/2} Y Y^T Λ^{1/2} / (Y^T Λ Y)`.
///
/// `vec` stacks columns, so entry `(i, j)` of `M` sits at `i + j p`. Every
/// position not listed below is structurally zero.
pub fn gamma_from_eta(eta: &EtaTable) -> DMatrix<f64> {
    let p = eta.dim();
    let at = |i: usize, j: usize| i + j * p;
    let mut gamma = DMatrix::zeros(p * p, p * p);
    for i in 0..p {
        gamma[(at(i, i), at(i, i))] = eta.get(i, i);
        for j in 0..p {
            if i == j {
                continue;
            }
            let v = eta.get(i, j);
            gamma[(at(i, j), at(i, j))] = v;
            gamma[(at(i, i), at(j, j))] = v;
            gamma[(at(i, j), at(j, i))] = v;
        }
    }
    gamma
}

pub fn gamma_matrix(lambda: &Spectrum, cfg: &QuadratureConfig) -> Result<DMatrix<f64>> {
    check_dense_dim(lambda.len())?;
    Ok(gamma_from_eta(&eta_table(lambda, cfg)?))
}

/// `W_S = (O ⊗ O) {Γ - vec(Δ) vec(Δ)^T} (O ⊗ O)^T` together with its parts.
#[derive(Debug, Clone)]
pub struct AsymptoticCov {
    pub gamma: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub eigenvectors: DMatrix<f64>,
    pub delta: Spectrum,
}

/// Asymptotic covariance of `√n vec(S_n)` at an elliptical distribution whose
/// trace-normalized shape matrix is `O diag(λ) O^T`.
pub fn asymptotic_cov(eigenvectors: &DMatrix<f64>, lambda: &Spectrum, cfg: &QuadratureConfig) -> Result<AsymptoticCov> {
    let p = lambda.len();
    if eigenvectors.nrows() != p || eigenvectors.ncols() != p {
        return invalid(format!(
            "eigenvector matrix is {}x{}, spectrum has {p} values",
            eigenvectors.nrows(),
            eigenvectors.ncols()
        ));
    }
    let defect = orthogonality_defect(eigenvectors);
    if !(defect <= 1e-10) {
        return invalid(format!("eigenvector matrix is not orthogonal (defect {defect:.3e})"));
    }
    check_dense_dim(p)?;
    let eta = eta_table(lambda, cfg)?;
    let delta = phi(lambda, cfg)?;
    let gamma = gamma_from_eta(&eta);

    let mut vec_delta = DVector::zeros(p * p);
    for (i, &d) in delta.values().iter().enumerate() {
        vec_delta[i + i * p] = d;
    }
    let centered = &gamma - &vec_delta * vec_delta.transpose();
    let kron = eigenvectors.kronecker(eigenvectors);
    let w = &kron * centered * kron.transpose();
    let w = 0.5 * (&w + w.transpose());
    Ok(AsymptoticCov {
        gamma,
        w,
        eigenvectors: eigenvectors.clone(),
        delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    fn spectrum(v: &[f64]) -> Spectrum {
        Spectrum::new(v.to_vec()).unwrap()
    }

    #[test]
    fn uniform_is_fixed_point() {
        for p in [1, 2, 3, 7, 50] {
            let d = phi(&Spectrum::uniform(p).unwrap(), &cfg()).unwrap();
            assert!(d.values().iter().all(|&v| (v - 1.0 / p as f64).abs() < 1e-15));
        }
    }

    #[test]
    fn degenerate_direction_carries_all_mass() {
        let d = phi(&spectrum(&[1.0, 0.0, 0.0]), &cfg()).unwrap();
        assert_eq!(d.values(), &[1.0, 0.0, 0.0]);
        let e = eta_table(&spectrum(&[1.0, 0.0]), &cfg()).unwrap();
        assert_eq!(e.entries, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        assert_eq!(eta_table(&spectrum(&[1.0]), &cfg()).unwrap().entries[(0, 0)], 1.0);
    }

    #[test]
    fn two_dimensional_closed_form() {
        let d = phi(&spectrum(&[0.9, 0.1]), &cfg()).unwrap();
        assert!((d.values()[0] - 0.75).abs() < 1e-12, "{:?}", d);
        assert!((d.values()[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn zero_eigenvalues_map_to_zero() {
        let d = phi(&spectrum(&[0.6, 0.4, 0.0]), &cfg()).unwrap();
        assert_eq!(d.values()[2], 0.0);
        // support of size two behaves like p = 2
        let r = (0.6f64 / 0.4).sqrt();
        assert!((d.values()[0] - r / (1.0 + r)).abs() < 1e-12);
        let e = eta_table(&spectrum(&[0.6, 0.4, 0.0]), &cfg()).unwrap();
        assert!(e.entries.row(2).iter().all(|&v| v == 0.0));
        assert!(e.entries.column(2).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn uniform_eta_through_quadrature() {
        // the quadrature path, not a shortcut, must give the sphere moments
        for p in [2usize, 3, 6] {
            let e = eta_table(&Spectrum::uniform(p).unwrap(), &cfg()).unwrap();
            let pf = p as f64;
            let diag = 3.0 / (pf * (pf + 2.0));
            let off = 1.0 / (pf * (pf + 2.0));
            for i in 0..p {
                for j in 0..p {
                    let want = if i == j { diag } else { off };
                    assert!((e.get(i, j) - want).abs() < 1e-12, "p={p} ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn ties_map_to_identical_values() {
        let l = spectrum(&[0.4, 0.2, 0.2, 0.1, 0.1]);
        let d = phi(&l, &cfg()).unwrap();
        assert_eq!(d.values()[1], d.values()[2]);
        assert_eq!(d.values()[3], d.values()[4]);
        let e = eta_table(&l, &cfg()).unwrap();
        assert_eq!(e.get(1, 1), e.get(2, 2));
        assert_eq!(e.get(0, 1), e.get(0, 2));
        assert_eq!(e.get(1, 2), e.get(2, 1));
    }

    #[test]
    fn eta_matches_partial_fraction_identity() {
        // for λ_i ≠ λ_j the cross integral reduces to
        // η_ij = (λ_i δ_j - λ_j δ_i) / (2 (λ_i - λ_j))
        let l = spectrum(&[0.45, 0.3, 0.15, 0.1]);
        let d = phi(&l, &cfg()).unwrap();
        let e = eta_table(&l, &cfg()).unwrap();
        let (lv, dv) = (l.values(), d.values());
        for i in 0..4 {
            for j in 0..4 {
                if i == j {
                    continue;
                }
                let want = (lv[i] * dv[j] - lv[j] * dv[i]) / (2.0 * (lv[i] - lv[j]));
                assert!(
                    (e.get(i, j) - want).abs() < 1e-10,
                    "({i},{j}) {} vs {want}",
                    e.get(i, j)
                );
            }
        }
    }

    #[test]
    fn gamma_two_dimensional_uniform() {
        let g = gamma_matrix(&Spectrum::uniform(2).unwrap(), &cfg()).unwrap();
        let (a, b) = (3.0 / 8.0, 1.0 / 8.0);
        let want = DMatrix::from_row_slice(4, 4, &[a, 0., 0., b, 0., b, b, 0., 0., b, b, 0., b, 0., 0., a]);
        assert!(crate::linalg::max_abs_diff(&g, &want) < 1e-12);
        assert_eq!(g.iter().filter(|v| **v == 0.0).count(), 8);
    }

    #[test]
    fn gamma_degenerate_single_entry() {
        let g = gamma_matrix(&spectrum(&[1.0, 0.0]), &cfg()).unwrap();
        assert_eq!(g[(0, 0)], 1.0);
        assert_eq!(g.iter().filter(|v| **v != 0.0).count(), 1);
    }

    #[test]
    fn gamma_structural_zero_count() {
        for (p, l) in [
            (3, vec![0.5, 0.3, 0.2]),
            (4, vec![0.4, 0.3, 0.2, 0.1]),
            (5, vec![0.3, 0.25, 0.2, 0.15, 0.1]),
        ] {
            let g = gamma_matrix(&spectrum(&l), &cfg()).unwrap();
            let zeros = g.iter().filter(|v| **v == 0.0).count();
            assert_eq!(zeros, p * (p * p * p - 3 * p + 2));
            assert_eq!(g, g.transpose());
        }
    }

    #[test]
    fn asymptotic_cov_uniform_identity_basis() {
        let a = asymptotic_cov(&DMatrix::identity(2, 2), &Spectrum::uniform(2).unwrap(), &cfg()).unwrap();
        // vec(Δ) vec(Δ)^T has entries 1/4 at the diagonal positions
        let (d, o, x) = (3.0 / 8.0 - 0.25, 1.0 / 8.0, 1.0 / 8.0 - 0.25);
        let want = DMatrix::from_row_slice(4, 4, &[d, 0., 0., x, 0., o, o, 0., 0., o, o, 0., x, 0., 0., d]);
        assert!(crate::linalg::max_abs_diff(&a.w, &want) < 1e-12);
    }

    #[test]
    fn asymptotic_cov_trace_direction_and_rotation() {
        let theta: f64 = 0.7;
        let (c, s) = (theta.cos(), theta.sin());
        let o = DMatrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0]);
        let a = asymptotic_cov(&o, &spectrum(&[0.5, 0.3, 0.2]), &cfg()).unwrap();
        let vec_i = DVector::from_fn(9, |k, _| if k % 4 == 0 { 1.0 } else { 0.0 });
        let q = (vec_i.transpose() * &a.w * &vec_i)[(0, 0)];
        assert!(q.abs() < 1e-14, "{q}");
        let min_eig = a.w.clone().symmetric_eigenvalues().min();
        assert!(min_eig > -1e-8);
        assert_eq!(a.w, a.w.transpose());
    }

    #[test]
    fn asymptotic_cov_input_checks() {
        let l = spectrum(&[0.5, 0.5]);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(asymptotic_cov(&bad, &l, &cfg()).is_err());
        assert!(asymptotic_cov(&DMatrix::identity(3, 3), &l, &cfg()).is_err());
        let big = Spectrum::uniform(MAX_DENSE_DIM + 1).unwrap();
        assert!(gamma_matrix(&big, &cfg()).is_err());
    }

    #[test]
    fn strict_tolerance_failure_is_reported() {
        let tight = QuadratureConfig {
            rel_tol: 1e-15,
            abs_tol: 1e-300,
            max_subdivisions: 3,
        };
        let err = phi(&spectrum(&[0.98, 0.015, 0.005]), &tight).unwrap_err();
        assert!(matches!(err, Error::Quadrature { .. }), "{err}");
    }
}
