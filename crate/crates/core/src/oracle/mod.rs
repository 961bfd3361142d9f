//! Brute-force ground truth: elliptical samplers and Monte Carlo estimates of
//! the quantities the quadrature computes.
//!
//! Draws are generated in fixed-size chunks. Chunk `c` uses a ChaCha8 stream
//! `c` keyed by the master seed and the chunk moments are merged in chunk
//! order, so results are bit-identical for any thread count.

mod fixtures;

pub use fixtures::{parse_fixtures, pin_fixtures, render_fixtures, Fixture, FixtureKind};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::geometry::{sample_sscm, Center, DataMatrix, MedianConfig};
use crate::spectrum::Spectrum;

const CHUNK: usize = 1 << 16;

/// RNG for stream `stream` under master seed `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform draw from the ordered simplex: sorted Dirichlet(1, ..., 1).
pub fn random_spectrum<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Spectrum {
    let mut v: Vec<f64> = (0..p).map(|_| Exp1.sample(rng)).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    Spectrum::new(v).expect("exponential draws are positive")
}

/// Per-coordinate sample means and standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct McMean {
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
    pub draws: usize,
}

/// Running count, mean and centred sum of squares, mergeable across chunks.
#[derive(Debug, Clone)]
struct Moments {
    n: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    fn from_sums(n: usize, sum: &[f64], sumsq: &[f64]) -> Self {
        let nf = n as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / nf).collect();
        let m2 = sumsq
            .iter()
            .zip(&mean)
            .map(|(q, m)| (q - nf * m * m).max(0.0))
            .collect();
        Self { n: nf, mean, m2 }
    }

    fn merge(self, other: Moments) -> Moments {
        if self.n == 0.0 {
            return other;
        }
        let n = self.n + other.n;
        let mut mean = self.mean;
        let mut m2 = self.m2;
        for c in 0..mean.len() {
            let d = other.mean[c] - mean[c];
            mean[c] += d * other.n / n;
            m2[c] += other.m2[c] + d * d * self.n * other.n / n;
        }
        Moments { n, mean, m2 }
    }

    fn finish(self, draws: usize) -> McMean {
        let se = self
            .m2
            .iter()
            .map(|m2| (m2 / (self.n - 1.0)).sqrt() / self.n.sqrt())
            .collect();
        McMean {
            mean: self.mean,
            se,
            draws,
        }
    }
}

/// Averages a `dim`-valued statistic over `draws` draws. `stat` receives the
/// chunk RNG and a scratch buffer of length `scratch` and writes one draw's values.
fn mc_average<F>(draws: usize, seed: u64, dim: usize, scratch: usize, stat: F) -> McMean
where
    F: Fn(&mut ChaCha8Rng, &mut [f64], &mut [f64]) + Sync,
{
    let chunks = draws.div_ceil(CHUNK);
    let parts: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let len = CHUNK.min(draws - c * CHUNK);
            let mut sum = vec![0.0; dim];
            let mut sumsq = vec![0.0; dim];
            let mut out = vec![0.0; dim];
            let mut buf = vec![0.0; scratch];
            for _ in 0..len {
                stat(&mut rng, &mut buf, &mut out);
                for k in 0..dim {
                    sum[k] += out[k];
                    sumsq[k] += out[k] * out[k];
                }
            }
            Moments::from_sums(len, &sum, &sumsq)
        })
        .collect();
    let empty = Moments {
        n: 0.0,
        mean: vec![0.0; dim],
        m2: vec![0.0; dim],
    };
    parts.into_iter().fold(empty, Moments::merge).finish(draws)
}

fn check_draws(draws: usize) -> Result<()> {
    if draws < 1000 {
        return invalid(format!("Monte Carlo needs at least 1000 draws, got {draws}"));
    }
    Ok(())
}

/// `count` points uniform on the unit sphere in `R^p`, one per row.
pub fn sample_spherical_direction(p: usize, count: usize, seed: u64) -> Result<DMatrix<f64>> {
    if p == 0 {
        return invalid("dimension must be at least 1");
    }
    let mut out = DMatrix::zeros(count, p);
    let mut rng = stream_rng(seed, 0);
    let mut z = vec![0.0; p];
    for i in 0..count {
        unit_direction(&mut rng, &mut z);
        for k in 0..p {
            out[(i, k)] = z[k];
        }
    }
    Ok(out)
}

fn standard_normal<R: Rng + ?Sized>(rng: &mut R, z: &mut [f64]) {
    for v in z.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
}

fn unit_direction<R: Rng + ?Sized>(rng: &mut R, z: &mut [f64]) {
    loop {
        standard_normal(rng, z);
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            z.iter_mut().for_each(|v| *v /= norm);
            return;
        }
    }
}

/// Radial part `R` of `X = A R U + μ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Radial {
    /// `R ~ chi_p`, which makes `R U` standard normal.
    Chi,
    /// `R = c`: a purely angular law.
    Constant(f64),
    /// `R = 1 + |U_1|`: radius depends on direction (generalized elliptical).
    OnePlusAbsFirst,
}

impl Radial {
    /// Writes one draw of `Y = R U` into `y`.
    pub fn draw<R: Rng + ?Sized>(self, rng: &mut R, y: &mut [f64]) {
        match self {
            Radial::Chi => standard_normal(rng, y),
            Radial::Constant(c) => {
                unit_direction(rng, y);
                y.iter_mut().for_each(|v| *v *= c);
            }
            Radial::OnePlusAbsFirst => {
                unit_direction(rng, y);
                let r = 1.0 + y[0].abs();
                y.iter_mut().for_each(|v| *v *= r);
            }
        }
    }
}

/// Draws `X = A R U + μ`.
#[derive(Debug, Clone)]
pub struct EllipticalSampler {
    pub shape_root: DMatrix<f64>,
    pub radial: Radial,
    pub location: DVector<f64>,
    pub seed: u64,
}

impl EllipticalSampler {
    pub fn new(shape_root: DMatrix<f64>, radial: Radial, location: DVector<f64>, seed: u64) -> Result<Self> {
        if !shape_root.is_square() || shape_root.nrows() != location.len() {
            return invalid("shape root must be square and match the location dimension");
        }
        if shape_root.iter().all(|v| *v == 0.0) {
            return invalid("shape root must be nonzero");
        }
        Ok(Self {
            shape_root,
            radial,
            location,
            seed,
        })
    }

    /// Centred sampler with `A = diag(√λ)`, so the shape matrix is `diag(λ)`.
    pub fn diagonal(lambda: &[f64], radial: Radial, seed: u64) -> Result<Self> {
        let root = DMatrix::from_diagonal(&DVector::from_iterator(lambda.len(), lambda.iter().map(|v| v.sqrt())));
        Self::new(root, radial, DVector::zeros(lambda.len()), seed)
    }

    pub fn dim(&self) -> usize {
        self.location.len()
    }

    /// `n` observations from stream `stream` of the sampler's seed.
    pub fn sample(&self, n: usize, stream: u64) -> Result<DataMatrix> {
        let p = self.dim();
        let mut rng = stream_rng(self.seed, stream);
        let mut y = vec![0.0; p];
        let mut values = Vec::with_capacity(n * p);
        for _ in 0..n {
            self.radial.draw(&mut rng, &mut y);
            for i in 0..p {
                let mut x = self.location[i];
                for j in 0..p {
                    x += self.shape_root[(i, j)] * y[j];
                }
                values.push(x);
            }
        }
        DataMatrix::from_row_major(n, p, values)
    }
}

/// Fills `w` with `λ_i Y_i² / Σ_j λ_j Y_j²` for one spherical draw.
fn weight_draw<R: Rng + ?Sized>(rng: &mut R, lambda: &[f64], radial: Radial, y: &mut [f64], w: &mut [f64]) {
    radial.draw(rng, y);
    let mut total = 0.0;
    for k in 0..lambda.len() {
        w[k] = lambda[k] * y[k] * y[k];
        total += w[k];
    }
    w.iter_mut().for_each(|v| *v /= total);
}

/// Monte Carlo estimate of `δ_i = E{λ_i Y_i² / Σ_j λ_j Y_j²}` with `Y` standard normal.
pub fn mc_delta(lambda: &Spectrum, draws: usize, seed: u64) -> Result<McMean> {
    mc_delta_with(lambda, draws, seed, Radial::Chi)
}

/// [`mc_delta`] under any spherical law for `Y = R U`.
pub fn mc_delta_with(lambda: &Spectrum, draws: usize, seed: u64, radial: Radial) -> Result<McMean> {
    check_draws(draws)?;
    let l = lambda.values();
    let p = l.len();
    Ok(mc_average(draws, seed, p, p, |rng, y, out| {
        weight_draw(rng, l, radial, y, out);
    }))
}

/// Monte Carlo `η` table (`mean` and `se` are `p x p`, row-major).
pub fn mc_eta(lambda: &Spectrum, draws: usize, seed: u64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_draws(draws)?;
    let l = lambda.values();
    let p = l.len();
    let r = mc_average(draws, seed, p * p, 2 * p, |rng, buf, out| {
        let (y, w) = buf.split_at_mut(p);
        weight_draw(rng, l, Radial::Chi, y, w);
        for i in 0..p {
            for j in 0..p {
                out[i * p + j] = w[i] * w[j];
            }
        }
    });
    Ok((
        DMatrix::from_row_slice(p, p, &r.mean),
        DMatrix::from_row_slice(p, p, &r.se),
    ))
}

/// Monte Carlo `Γ = E{vec(M) vec(M)^T}` for `M = Λ^{1/2} Y Y^T Λ^{1/2} / (Y^T Λ Y)`,
/// with `vec` stacking columns. Returns the mean and standard errors.
pub fn mc_gamma(lambda: &Spectrum, draws: usize, seed: u64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_draws(draws)?;
    let l = lambda.values();
    let p = l.len();
    let q = p * p;
    let r = mc_average(draws, seed, q * q, p + q, |rng, buf, out| {
        let (scaled, m) = buf.split_at_mut(p);
        standard_normal(rng, scaled);
        scaled.iter_mut().zip(l).for_each(|(v, li)| *v *= li.sqrt());
        let denom: f64 = scaled.iter().map(|v| v * v).sum();
        for j in 0..p {
            for i in 0..p {
                m[i + j * p] = scaled[i] * scaled[j] / denom;
            }
        }
        for a in 0..q {
            for b in 0..q {
                out[a * q + b] = m[a] * m[b];
            }
        }
    });
    Ok((
        DMatrix::from_row_slice(q, q, &r.mean),
        DMatrix::from_row_slice(q, q, &r.se),
    ))
}

/// Replicate summary of the sample SSCM.
#[derive(Debug, Clone)]
pub struct SamplingSummary {
    pub mean_sscm: DMatrix<f64>,
    /// Empirical covariance of `√n vec(S_n - mean)` across replicates.
    pub emp_cov: DMatrix<f64>,
    /// Standard error of each entry of `emp_cov`.
    pub emp_cov_se: DMatrix<f64>,
    pub n: usize,
    pub replicates: usize,
}

/// Simulates `replicates` samples of size `n`, computing the SSCM (centred at
/// the re-estimated spatial median) for each. Replicate `r` uses stream `r`.
pub fn mc_sampling_distribution(sampler: &EllipticalSampler, n: usize, replicates: usize) -> Result<SamplingSummary> {
    if replicates < 100 {
        return invalid(format!("at least 100 replicates are required, got {replicates}"));
    }
    if n == 0 {
        return invalid("sample size must be positive");
    }
    let p = sampler.dim();
    let q = p * p;
    let center = Center::SpatialMedian(MedianConfig::default());
    let vecs: Vec<Vec<f64>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let data = sampler.sample(n, r as u64)?;
            let s = sample_sscm(&data, &center)?;
            Ok(s.matrix.as_slice().to_vec())
        })
        .collect::<Result<_>>()?;

    let rf = replicates as f64;
    let mut mean = vec![0.0; q];
    for v in &vecs {
        mean.iter_mut().zip(v).for_each(|(m, x)| *m += x / rf);
    }
    let scale = (n as f64).sqrt();
    let centered: Vec<Vec<f64>> = vecs
        .iter()
        .map(|v| v.iter().zip(&mean).map(|(x, m)| scale * (x - m)).collect())
        .collect();
    let mut cov = DMatrix::zeros(q, q);
    let mut se = DMatrix::zeros(q, q);
    for a in 0..q {
        for b in a..q {
            let prods: Vec<f64> = centered.iter().map(|z| z[a] * z[b]).collect();
            let c = prods.iter().sum::<f64>() / (rf - 1.0);
            let m = prods.iter().sum::<f64>() / rf;
            let var = prods.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (rf - 1.0);
            let s = (var / rf).sqrt();
            cov[(a, b)] = c;
            cov[(b, a)] = c;
            se[(a, b)] = s;
            se[(b, a)] = s;
        }
    }
    Ok(SamplingSummary {
        mean_sscm: DMatrix::from_column_slice(p, p, &mean),
        emp_cov: cov,
        emp_cov_se: se,
        n,
        replicates,
    })
}

/// Standard errors of `v_k^T S_n v_k` for the columns `v_k` of `directions`,
/// from the per-observation terms `(v_k^T s(X_i - μ))²`.
pub fn sscm_direction_se(data: &DataMatrix, center: &[f64], directions: &DMatrix<f64>) -> Vec<f64> {
    let p = data.p();
    let kdir = directions.ncols();
    let mut sums = vec![0.0; kdir];
    let mut sumsq = vec![0.0; kdir];
    let mut d = vec![0.0; p];
    for x in data.rows() {
        for k in 0..p {
            d[k] = x[k] - center[k];
        }
        let norm2: f64 = d.iter().map(|v| v * v).sum();
        if norm2 == 0.0 {
            continue;
        }
        for c in 0..kdir {
            let dot: f64 = (0..p).map(|k| directions[(k, c)] * d[k]).sum();
            let t = dot * dot / norm2;
            sums[c] += t;
            sumsq[c] += t * t;
        }
    }
    let nf = data.n() as f64;
    sums.iter()
        .zip(&sumsq)
        .map(|(s, q)| {
            let var = (q - s * s / nf) / (nf - 1.0);
            (var.max(0.0) / nf).sqrt()
        })
        .collect()
}

/// Standard errors of `v_k^T K_n v_k` from the Hájek projection of the
/// Kendall U-statistic: `SE = 2 sd_i(h_i) / √n`, where `h_i` averages
/// `(v_k^T s(X_i - X_j))²` over `j ≠ i`.
pub fn kendall_direction_se(data: &DataMatrix, directions: &DMatrix<f64>) -> Vec<f64> {
    let (n, p) = (data.n(), data.p());
    let kdir = directions.ncols();
    // v^T (X_i - X_j) is a difference of projections
    let mut proj = vec![0.0; n * kdir];
    for (i, x) in data.rows().enumerate() {
        for c in 0..kdir {
            proj[i * kdir + c] = (0..p).map(|k| directions[(k, c)] * x[k]).sum();
        }
    }
    let mut h = vec![0.0; n * kdir];
    for i in 0..n {
        let xi = data.row(i);
        let (head, tail) = h.split_at_mut((i + 1) * kdir);
        let hi = &mut head[i * kdir..];
        for j in i + 1..n {
            let xj = data.row(j);
            let norm2: f64 = xi.iter().zip(xj).map(|(a, b)| (a - b) * (a - b)).sum();
            if norm2 == 0.0 {
                continue;
            }
            let inv = 1.0 / norm2;
            let hj = &mut tail[(j - i - 1) * kdir..(j - i) * kdir];
            for c in 0..kdir {
                let dot = proj[i * kdir + c] - proj[j * kdir + c];
                let t = dot * dot * inv;
                hi[c] += t;
                hj[c] += t;
            }
        }
    }
    let nf = n as f64;
    (0..kdir)
        .map(|c| {
            let vals: Vec<f64> = (0..n).map(|i| h[i * kdir + c] / (nf - 1.0)).collect();
            let m = vals.iter().sum::<f64>() / nf;
            let var = vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (nf - 1.0);
            2.0 * (var / nf).sqrt()
        })
        .collect()
}
