//! Vector-valued adaptive Gauss–Kronrod quadrature.
//!
//! All components of the integrand share one subdivision of the domain, so a
//! kernel that is expensive to evaluate (a product over thousands of factors)
//! is evaluated once per node no matter how many integrals it feeds. The
//! interval with the largest error relative to its component tolerance is
//! bisected next.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Tolerances for the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Maximum number of intervals the domain may be split into.
    pub max_subdivisions: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_subdivisions: 200,
        }
    }
}

impl QuadratureConfig {
    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return crate::error::invalid(format!("rel_tol must be positive, got {}", self.rel_tol));
        }
        if !(self.abs_tol > 0.0 && self.abs_tol.is_finite()) {
            return crate::error::invalid(format!("abs_tol must be positive, got {}", self.abs_tol));
        }
        if self.max_subdivisions == 0 {
            return crate::error::invalid("max_subdivisions must be at least 1");
        }
        Ok(())
    }
}

/// Integral values and error estimates, one per component.
#[derive(Debug, Clone)]
pub struct VecIntegral {
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    pub subdivisions: usize,
}

// 15-point Kronrod abscissae (non-negative half) and weights, 7-point Gauss weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

struct Segment {
    a: f64,
    b: f64,
    values: Vec<f64>,
    errors: Vec<f64>,
    score: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut err = err.abs();
    if res_asc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / res_asc).powf(1.5);
        err = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    err
}

/// Scratch buffers reused across interval evaluations.
struct Workspace {
    fvals: Vec<Vec<f64>>, // 15 node values, each of length `dim`
}

impl Workspace {
    fn new(dim: usize) -> Self {
        Self {
            fvals: vec![vec![0.0; dim]; 15],
        }
    }
}

fn gauss_kronrod_15<F>(f: &mut F, a: f64, b: f64, ws: &mut Workspace) -> (Vec<f64>, Vec<f64>)
where
    F: FnMut(f64, &mut [f64]),
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    // node order: 0 = center, 2k+1 / 2k+2 = center -/+ half*XGK[k]
    f(center, &mut ws.fvals[0]);
    for k in 0..7 {
        let dx = half * XGK[k];
        let (lo, hi) = ws.fvals.split_at_mut(2 * k + 2);
        f(center - dx, &mut lo[2 * k + 1]);
        f(center + dx, &mut hi[0]);
    }

    let dim = ws.fvals[0].len();
    let mut values = vec![0.0; dim];
    let mut errors = vec![0.0; dim];
    for c in 0..dim {
        let fc = ws.fvals[0][c];
        let mut kronrod = fc * WGK[7];
        let mut gauss = fc * WG[3];
        let mut res_abs = kronrod.abs();
        for k in 0..7 {
            let f1 = ws.fvals[2 * k + 1][c];
            let f2 = ws.fvals[2 * k + 2][c];
            kronrod += WGK[k] * (f1 + f2);
            res_abs += WGK[k] * (f1.abs() + f2.abs());
            if k % 2 == 1 {
                gauss += WG[k / 2] * (f1 + f2);
            }
        }
        let mean = 0.5 * kronrod;
        let mut res_asc = WGK[7] * (fc - mean).abs();
        for k in 0..7 {
            res_asc += WGK[k] * ((ws.fvals[2 * k + 1][c] - mean).abs() + (ws.fvals[2 * k + 2][c] - mean).abs());
        }
        let h = half.abs();
        values[c] = kronrod * half;
        errors[c] = rescale_error((kronrod - gauss) * half, res_abs * h, res_asc * h);
    }
    (values, errors)
}

fn tolerances(cfg: &QuadratureConfig, totals: &[f64], tol: &mut [f64]) {
    for (t, v) in tol.iter_mut().zip(totals) {
        *t = cfg.abs_tol.max(cfg.rel_tol * v.abs());
    }
}

fn score(errors: &[f64], tol: &[f64]) -> f64 {
    errors.iter().zip(tol).map(|(e, t)| e / t).fold(0.0, f64::max)
}

/// Integrates a `dim`-component function over `[a, b]`.
///
/// Every component must satisfy `error <= max(abs_tol, rel_tol * |value|)`.
pub fn integrate_vec<F>(mut f: F, dim: usize, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<VecIntegral>
where
    F: FnMut(f64, &mut [f64]),
{
    cfg.validate()?;
    let mut ws = Workspace::new(dim);
    let (values, errors) = gauss_kronrod_15(&mut f, a, b, &mut ws);
    let mut totals = values.clone();
    let mut total_err = errors.clone();
    let mut tol = vec![0.0; dim];
    tolerances(cfg, &totals, &mut tol);

    let mut heap = BinaryHeap::new();
    let mut frozen: Vec<Segment> = Vec::new();
    heap.push(Segment {
        a,
        b,
        score: score(&errors, &tol),
        values,
        errors,
    });

    loop {
        tolerances(cfg, &totals, &mut tol);
        let worst = total_err.iter().zip(&tol).map(|(e, t)| e / t).fold(0.0, f64::max);
        if worst <= 1.0 {
            break;
        }
        let count = heap.len() + frozen.len();
        let Some(seg) = heap.pop() else {
            return Err(Error::Quadrature {
                subdivisions: count,
                worst_ratio: worst,
            });
        };
        if count >= cfg.max_subdivisions {
            return Err(Error::Quadrature {
                subdivisions: count,
                worst_ratio: worst,
            });
        }
        let mid = 0.5 * (seg.a + seg.b);
        if !(mid > seg.a && mid < seg.b) || (seg.b - seg.a) < 4.0 * f64::EPSILON * seg.b.abs() {
            // interval cannot be split further in floating point
            frozen.push(seg);
            continue;
        }
        let (lv, le) = gauss_kronrod_15(&mut f, seg.a, mid, &mut ws);
        let (rv, re) = gauss_kronrod_15(&mut f, mid, seg.b, &mut ws);
        for c in 0..dim {
            totals[c] += lv[c] + rv[c] - seg.values[c];
            total_err[c] = (total_err[c] + le[c] + re[c] - seg.errors[c]).max(0.0);
        }
        tolerances(cfg, &totals, &mut tol);
        heap.push(Segment {
            a: seg.a,
            b: mid,
            score: score(&le, &tol),
            values: lv,
            errors: le,
        });
        heap.push(Segment {
            a: mid,
            b: seg.b,
            score: score(&re, &tol),
            values: rv,
            errors: re,
        });
    }

    let mut segments: Vec<Segment> = heap.into_vec();
    segments.extend(frozen);
    segments.sort_by(|x, y| x.a.total_cmp(&y.a));
    let mut values = vec![0.0; dim];
    let mut errors = vec![0.0; dim];
    for seg in &segments {
        for c in 0..dim {
            values[c] += seg.values[c];
            errors[c] += seg.errors[c];
        }
    }
    Ok(VecIntegral {
        values,
        errors,
        subdivisions: segments.len(),
    })
}

/// Integrates over `[0, ∞)` through the substitution `x = t / (1 - t)`.
///
/// The kernel receives `x` and the Jacobian `dx/dt = 1/(1-t)^2` and must
/// write the already-weighted integrand values into the output slice.
pub fn integrate_semi_infinite<F>(mut f: F, dim: usize, cfg: &QuadratureConfig) -> Result<VecIntegral>
where
    F: FnMut(f64, f64, &mut [f64]),
{
    integrate_vec(
        |t, out| {
            let s = 1.0 - t;
            if s > 0.0 {
                f(t / s, 1.0 / (s * s), out)
            } else {
                // node rounded onto the point at infinity
                out.iter_mut().for_each(|v| *v = 0.0);
            }
        },
        dim,
        0.0,
        1.0,
        cfg,
    )
}
