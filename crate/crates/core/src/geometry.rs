//! Spatial signs, the spatial median and the two sign-based scatter estimators.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};

/// An `n x p` table of finite observations stored row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    n: usize,
    p: usize,
    values: Vec<f64>,
}

impl DataMatrix {
    pub fn from_row_major(n: usize, p: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || p == 0 {
            return invalid(format!("data must have at least one row and one column, got {n}x{p}"));
        }
        if values.len() != n * p {
            return invalid(format!(
                "expected {} values for a {n}x{p} matrix, got {}",
                n * p,
                values.len()
            ));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return invalid(format!(
                "non-finite value at row {}, column {}",
                pos / p + 1,
                pos % p + 1
            ));
        }
        Ok(Self { n, p, values })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let p = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * p);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != p {
                return invalid(format!("row {} has {} columns, expected {p}", i + 1, r.len()));
            }
            values.extend_from_slice(r);
        }
        Self::from_row_major(rows.len(), p, values)
    }

    pub fn from_dmatrix(m: &DMatrix<f64>) -> Result<Self> {
        let values = m.transpose().as_slice().to_vec();
        Self::from_row_major(m.nrows(), m.ncols(), values)
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.p, &self.values)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.p)
    }

    pub fn as_row_major(&self) -> &[f64] {
        &self.values
    }
}

/// `x / |x|`, or the zero vector when `x = 0`.
pub fn spatial_sign(x: &[f64]) -> Result<Vec<f64>> {
    if x.iter().any(|v| !v.is_finite()) {
        return invalid("spatial sign of a non-finite vector");
    }
    let mut out = x.to_vec();
    normalize_in_place(&mut out);
    Ok(out)
}

/// Scales `v` to unit length; returns false (leaving zeros) when `v = 0`.
fn normalize_in_place(v: &mut [f64]) -> bool {
    let norm = euclidean_norm(v);
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
        true
    } else {
        false
    }
}

/// Below this a plain sum of squares may have lost precision to underflow.
const SAFE_SUM_OF_SQUARES: f64 = 1e-280;

/// Overflow-safe Euclidean norm.
fn euclidean_norm(v: &[f64]) -> f64 {
    let ss: f64 = v.iter().map(|x| x * x).sum();
    if ss.is_finite() && ss > SAFE_SUM_OF_SQUARES {
        return ss.sqrt();
    }
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    let ss: f64 = v.iter().map(|x| (x / scale) * (x / scale)).sum();
    scale * ss.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MedianConfig {
    /// Bound on the norm of the averaged subgradient `(1/n) Σ s(μ - X_i)`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for MedianConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpatialMedian {
    pub location: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub residual_gradient_norm: f64,
}

/// Minimizes `μ ↦ Σ |X_i - μ|` by the Weiszfeld iteration with the
/// Vardi–Zhang correction for iterates that land on data points. A Newton
/// step replaces the Weiszfeld step whenever it lowers the objective further.
///
/// Starts at the coordinate-wise median. When the iteration budget runs out
/// the best iterate seen is returned with `converged = false`.
pub fn spatial_median(data: &DataMatrix, cfg: &MedianConfig) -> Result<SpatialMedian> {
    if !(cfg.tol > 0.0) {
        return invalid(format!("median tolerance must be positive, got {}", cfg.tol));
    }
    let (n, p) = (data.n(), data.p());
    let mut y = coordinatewise_median(data);
    let mut best = (f64::INFINITY, y.clone());
    let mut pull = vec![0.0; p];
    let mut diff = vec![0.0; p];
    let mut scratch = vec![0.0; p];

    for it in 0..=cfg.max_iter {
        pull.iter_mut().for_each(|v| *v = 0.0);
        let mut weight_sum = 0.0;
        let mut coincident = 0usize;
        let mut nearest = (f64::INFINITY, 0usize);
        for (i, x) in data.rows().enumerate() {
            for k in 0..p {
                diff[k] = x[k] - y[k];
            }
            let d = euclidean_norm(&diff);
            if d < nearest.0 {
                nearest = (d, i);
            }
            if d == 0.0 {
                coincident += 1;
                continue;
            }
            let w = 1.0 / d;
            weight_sum += w;
            for k in 0..p {
                pull[k] += diff[k] * w;
            }
        }
        let pull_norm = euclidean_norm(&pull);
        // subgradient norm; a data point of multiplicity m absorbs up to m
        let residual = (pull_norm - coincident as f64).max(0.0) / n as f64;
        if residual < best.0 {
            best = (residual, y.clone());
        }
        if residual <= cfg.tol || weight_sum == 0.0 {
            return Ok(SpatialMedian {
                location: y,
                converged: true,
                iterations: it,
                residual_gradient_norm: residual,
            });
        }
        // Iterates creep towards an optimal data point without reaching it.
        if nearest.0 > 0.0 {
            let vertex = data.row(nearest.1);
            let r = residual_at(data, vertex, &mut diff, &mut scratch);
            if r <= cfg.tol {
                return Ok(SpatialMedian {
                    location: vertex.to_vec(),
                    converged: true,
                    iterations: it,
                    residual_gradient_norm: r,
                });
            }
        }
        if it == cfg.max_iter {
            break;
        }
        let gamma = if coincident > 0 {
            (coincident as f64 / pull_norm).min(1.0)
        } else {
            0.0
        };
        let mut next: Vec<f64> = (0..p).map(|k| y[k] + (1.0 - gamma) * pull[k] / weight_sum).collect();
        if coincident == 0 && p <= NEWTON_MAX_DIM {
            if let Some(step) = newton_step(data, &y, &pull) {
                // objective differences near the optimum drown in rounding
                let target = objective(data, &next) * (1.0 + 8.0 * f64::EPSILON);
                let mut t = 1.0;
                for _ in 0..NEWTON_HALVINGS {
                    let candidate: Vec<f64> = y.iter().zip(&step).map(|(a, s)| a + t * s).collect();
                    if objective(data, &candidate) <= target {
                        next = candidate;
                        break;
                    }
                    t *= 0.5;
                }
            }
        }
        let moved = next != y;
        y = next;
        if !moved {
            break;
        }
    }
    Ok(SpatialMedian {
        location: best.1,
        converged: false,
        iterations: cfg.max_iter,
        residual_gradient_norm: best.0,
    })
}

/// Above this dimension the median uses plain Weiszfeld steps.
const NEWTON_MAX_DIM: usize = 100;
const NEWTON_HALVINGS: usize = 12;

fn objective(data: &DataMatrix, y: &[f64]) -> f64 {
    data.rows()
        .map(|x| euclidean_norm(&x.iter().zip(y).map(|(a, b)| a - b).collect::<Vec<_>>()))
        .sum()
}

/// Newton direction `H⁻¹ g` for the objective, where `g = Σ s(X_i - y)` and
/// `H = Σ (I - u_i u_iᵀ) / |X_i - y|`. Used only when it beats the Weiszfeld
/// step, which is what makes convergence near a data point fast.
fn newton_step(data: &DataMatrix, y: &[f64], pull: &[f64]) -> Option<Vec<f64>> {
    let p = y.len();
    let mut h = DMatrix::<f64>::zeros(p, p);
    let mut u = vec![0.0; p];
    for x in data.rows() {
        for k in 0..p {
            u[k] = x[k] - y[k];
        }
        let d = euclidean_norm(&u);
        u.iter_mut().for_each(|v| *v /= d);
        let w = 1.0 / d;
        for a in 0..p {
            h[(a, a)] += w;
            for b in 0..p {
                h[(a, b)] -= w * u[a] * u[b];
            }
        }
    }
    let step = h.cholesky()?.solve(&nalgebra::DVector::from_column_slice(pull));
    step.iter().all(|v| v.is_finite()).then(|| step.as_slice().to_vec())
}

/// Norm of the averaged minimal subgradient of `Σ |X_i - y|` at `y`.
fn residual_at(data: &DataMatrix, y: &[f64], diff: &mut [f64], pull: &mut [f64]) -> f64 {
    pull.iter_mut().for_each(|v| *v = 0.0);
    let mut coincident = 0usize;
    for x in data.rows() {
        for k in 0..y.len() {
            diff[k] = x[k] - y[k];
        }
        let d = euclidean_norm(diff);
        if d == 0.0 {
            coincident += 1;
            continue;
        }
        for k in 0..y.len() {
            pull[k] += diff[k] / d;
        }
    }
    (euclidean_norm(pull) - coincident as f64).max(0.0) / data.n() as f64
}

fn coordinatewise_median(data: &DataMatrix) -> Vec<f64> {
    let mut column = Vec::with_capacity(data.n());
    (0..data.p())
        .map(|k| {
            column.clear();
            column.extend(data.rows().map(|r| r[k]));
            column.sort_by(f64::total_cmp);
            let m = column.len();
            if m % 2 == 1 {
                column[m / 2]
            } else {
                0.5 * (column[m / 2 - 1] + column[m / 2])
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Sscm,
    KendallTau,
}

/// Where the observations are centred before taking signs.
#[derive(Debug, Clone, PartialEq)]
pub enum Center {
    /// Compute the spatial median of the data.
    SpatialMedian(MedianConfig),
    Fixed(Vec<f64>),
}

impl Default for Center {
    fn default() -> Self {
        Center::SpatialMedian(MedianConfig::default())
    }
}

/// A sample SSCM or spatial Kendall's tau matrix.
///
/// The trace equals `nonzero_terms / total_terms`: every sign that is the
/// zero vector contributes nothing.
#[derive(Debug, Clone)]
pub struct SscmEstimate {
    pub matrix: DMatrix<f64>,
    pub kind: EstimatorKind,
    /// Number of observations.
    pub n_used: usize,
    /// Number of outer products averaged (`n`, or `n(n-1)/2` for Kendall's tau).
    pub total_terms: usize,
    pub nonzero_terms: usize,
    /// Centre used for the SSCM; `None` for Kendall's tau.
    pub center: Option<Vec<f64>>,
    /// Solver report when the centre was computed internally.
    pub median: Option<SpatialMedian>,
}

/// Packed upper-triangle accumulator for sums of `u u^T`.
struct OuterSum {
    p: usize,
    acc: Vec<f64>,
    nonzero: usize,
}

impl OuterSum {
    fn new(p: usize) -> Self {
        Self {
            p,
            acc: vec![0.0; p * (p + 1) / 2],
            nonzero: 0,
        }
    }

    /// Adds `s(d) s(d)^T`, which equals `d d^T / |d|²`. May overwrite `d`.
    fn add_sign_of(&mut self, d: &mut [f64]) {
        let ss: f64 = d.iter().map(|x| x * x).sum();
        let w = if ss.is_finite() && ss > SAFE_SUM_OF_SQUARES {
            1.0 / ss
        } else if normalize_in_place(d) {
            1.0
        } else {
            return;
        };
        self.nonzero += 1;
        let mut idx = 0;
        for k in 0..self.p {
            let uk = w * d[k];
            for l in k..self.p {
                self.acc[idx] += uk * d[l];
                idx += 1;
            }
        }
    }

    fn merge(mut self, other: &OuterSum) -> Self {
        self.acc.iter_mut().zip(&other.acc).for_each(|(a, b)| *a += b);
        self.nonzero += other.nonzero;
        self
    }

    fn into_matrix(self, divisor: f64) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.p, self.p);
        let mut idx = 0;
        for k in 0..self.p {
            for l in k..self.p {
                let v = self.acc[idx] / divisor;
                m[(k, l)] = v;
                m[(l, k)] = v;
                idx += 1;
            }
        }
        m
    }
}

/// `(1/n) Σ s(X_i - μ) s(X_i - μ)^T` with `μ` supplied or the spatial median.
pub fn sample_sscm(data: &DataMatrix, center: &Center) -> Result<SscmEstimate> {
    let (location, median) = match center {
        Center::Fixed(c) => {
            if c.len() != data.p() {
                return invalid(format!("center has {} coordinates, data has {}", c.len(), data.p()));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return invalid("center must be finite");
            }
            (c.clone(), None)
        }
        Center::SpatialMedian(cfg) => {
            let m = spatial_median(data, cfg)?;
            (m.location.clone(), Some(m))
        }
    };
    let mut sum = OuterSum::new(data.p());
    let mut d = vec![0.0; data.p()];
    for x in data.rows() {
        for (dk, (xk, ck)) in d.iter_mut().zip(x.iter().zip(&location)) {
            *dk = xk - ck;
        }
        sum.add_sign_of(&mut d);
    }
    let nonzero = sum.nonzero;
    Ok(SscmEstimate {
        matrix: sum.into_matrix(data.n() as f64),
        kind: EstimatorKind::Sscm,
        n_used: data.n(),
        total_terms: data.n(),
        nonzero_terms: nonzero,
        center: Some(location),
        median,
    })
}

const KENDALL_BLOCK: usize = 128;

/// `(1 / C(n,2)) Σ_{i<j} s(X_i - X_j) s(X_i - X_j)^T`.
///
/// Rows are processed in fixed blocks that are reduced in block order, so the
/// result does not depend on the thread count.
pub fn sample_kendall_tau(data: &DataMatrix) -> Result<SscmEstimate> {
    let (n, p) = (data.n(), data.p());
    if n < 2 {
        return invalid(format!("Kendall's tau needs at least two observations, got {n}"));
    }
    let blocks: Vec<OuterSum> = (0..n.div_ceil(KENDALL_BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut sum = OuterSum::new(p);
            let mut d = vec![0.0; p];
            let all = data.as_row_major();
            for i in b * KENDALL_BLOCK..((b + 1) * KENDALL_BLOCK).min(n) {
                let xi = data.row(i);
                for xj in all[(i + 1) * p..].chunks_exact(p) {
                    d.iter_mut().zip(xi.iter().zip(xj)).for_each(|(dk, (a, b))| *dk = a - b);
                    sum.add_sign_of(&mut d);
                }
            }
            sum
        })
        .collect();
    let total = blocks.iter().fold(OuterSum::new(p), |acc, b| acc.merge(b));
    let pairs = n * (n - 1) / 2;
    let nonzero = total.nonzero;
    Ok(SscmEstimate {
        matrix: total.into_matrix(pairs as f64),
        kind: EstimatorKind::KendallTau,
        n_used: n,
        total_terms: pairs,
        nonzero_terms: nonzero,
        center: None,
        median: None,
    })
}
