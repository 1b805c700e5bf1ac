//! Numerical range `W(A) = {x*Ax : ‖x‖ = 1}`.
//!
//! `W(A)` is convex and is the intersection of the half-planes
//! `Re(e^{-iθ} z) ≤ h(θ)`, where the support function `h(θ)` is the largest
//! eigenvalue of the Hermitian part of `e^{-iθ} A`. The top eigenvector `x`
//! gives a boundary point `x*Ax` on each supporting line, so a sampled
//! profile yields an inscribed polygon. The two predicates used by the
//! classifier are built on that:
//!
//! * 0 is interior iff `min_θ h(θ) > 0`;
//! * `W(A)` meets `(0, ∞)` iff the inscribed polygon does (one-sided: a
//!   positive answer is always backed by a point of `W(A)`).

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::complex_serde;
use crate::linalg::{c, hermitian_eigen_block, hermitian_part, CMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RangeConfig {
    /// Uniform grid size on `[0, 2π)`.
    pub samples: usize,
    /// Golden-section steps refining the grid minimum of `h`.
    pub refine_iters: usize,
    /// Interior threshold relative to `max(1, ‖A‖_F)`.
    pub interior_margin: f64,
    /// Positive-axis threshold relative to `max(1, ‖A‖_F)`.
    pub positive_margin: f64,
}

impl Default for RangeConfig {
    fn default() -> Self {
        RangeConfig {
            samples: 1024,
            refine_iters: 60,
            interior_margin: 1e-7,
            positive_margin: 1e-9,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SupportPoint {
    pub h: f64,
    pub boundary_point: Complex64,
    /// Unit vector `x` with `x*Ax = boundary_point`.
    pub vector: DVector<Complex64>,
}

/// `h(θ) = λ_max((e^{-iθ}A + e^{iθ}A*)/2)` and the boundary point `x*Ax` of the
/// corresponding unit eigenvector.
pub fn support_value(a: &CMatrix, theta: f64) -> Result<SupportPoint> {
    let rot = a.as_block() * Complex64::from_polar(1.0, -theta);
    let (vals, vecs) = hermitian_eigen_block(&hermitian_part(&rot));
    let n = a.n();
    let x = vecs.column(n - 1).into_owned();
    let point = (x.adjoint() * a.as_block() * &x)[(0, 0)];
    Ok(SupportPoint {
        h: vals[n - 1],
        boundary_point: point,
        vector: x,
    })
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RangeProfile {
    pub angles: Vec<f64>,
    pub support_values: Vec<f64>,
    #[serde(serialize_with = "complex_serde::many")]
    pub boundary_points: Vec<Complex64>,
    pub samples: usize,
}

impl RangeProfile {
    /// `theta,h,re,im` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("theta,h,re,im\n");
        for ((t, h), z) in self.angles.iter().zip(&self.support_values).zip(&self.boundary_points) {
            out.push_str(&format!("{t:?},{h:?},{:?},{:?}\n", z.re, z.im));
        }
        out
    }
}

/// Support values and boundary points on a uniform grid of `samples` angles.
pub fn range_profile(a: &CMatrix, samples: usize) -> Result<RangeProfile> {
    if samples < 16 {
        return Err(Error::InvalidInput(format!(
            "range profile needs at least 16 samples, got {samples}"
        )));
    }
    let angles: Vec<f64> = (0..samples).map(|k| 2.0 * PI * k as f64 / samples as f64).collect();
    let mut support_values = Vec::with_capacity(samples);
    let mut boundary_points = Vec::with_capacity(samples);
    for &t in &angles {
        let sp = support_value(a, t)?;
        support_values.push(sp.h);
        boundary_points.push(sp.boundary_point);
    }
    Ok(RangeProfile {
        angles,
        support_values,
        boundary_points,
        samples,
    })
}

/// Outcome of a range predicate.
///
/// `value` is the raw quantity the predicate thresholds (the minimum of `h`,
/// or the right end of the positive real cut), `margin = value − threshold`,
/// so `verdict ⇔ margin > 0`.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RangeDecision {
    pub verdict: bool,
    pub margin: f64,
    pub value: f64,
    pub threshold: f64,
    #[serde(serialize_with = "complex_serde::option")]
    pub witness_point: Option<Complex64>,
    pub borderline: bool,
}

impl RangeDecision {
    fn new(value: f64, threshold: f64, witness_point: Option<Complex64>, borderline: bool) -> Self {
        let margin = value - threshold;
        RangeDecision {
            verdict: margin > 0.0,
            margin,
            value,
            threshold,
            witness_point,
            borderline,
        }
    }
}

/// Whether 0 lies in the interior of `W(A)`: grid scan of `h`, then
/// golden-section refinement around the smallest sample.
pub fn contains_zero_interior(a: &CMatrix, cfg: &RangeConfig) -> Result<RangeDecision> {
    let profile = range_profile(a, cfg.samples)?;
    let (mut best, mut best_idx) = (f64::INFINITY, 0);
    for (k, &h) in profile.support_values.iter().enumerate() {
        if h < best {
            best = h;
            best_idx = k;
        }
    }
    let step = 2.0 * PI / cfg.samples as f64;
    let centre = profile.angles[best_idx];
    let (theta, refined) = golden_section(|t| support_value(a, t).map(|s| s.h), centre - step, centre + step, cfg.refine_iters)?;
    let (min_h, witness) = if refined < best {
        (refined, support_value(a, theta)?.boundary_point)
    } else {
        (best, profile.boundary_points[best_idx])
    };
    let threshold = cfg.interior_margin * a.scale();
    let borderline = min_h.abs() <= 10.0 * threshold;
    Ok(RangeDecision::new(min_h, threshold, Some(witness), borderline))
}

fn golden_section(
    f: impl Fn(f64) -> Result<f64>,
    mut lo: f64,
    mut hi: f64,
    iters: usize,
) -> Result<(f64, f64)> {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    for _ in 0..iters {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 <= f2 { (x1, f1) } else { (x2, f2) })
}

/// Whether `W(A)` contains a number `t > positive_margin · max(1, ‖A‖_F)`.
///
/// Uses the convex hull of the sampled boundary points. When the hull is
/// degenerate (area ≤ 1e-10 · diameter²) the range is treated as the segment
/// between its two farthest points.
pub fn intersects_positive_axis(a: &CMatrix, cfg: &RangeConfig) -> Result<RangeDecision> {
    let profile = range_profile(a, cfg.samples)?;
    let threshold = cfg.positive_margin * a.scale();
    let hull = convex_hull(&profile.boundary_points);
    let cut = real_axis_cut(&hull);
    Ok(match cut {
        Some((lo, hi)) => {
            let borderline = (hi - threshold).abs() <= 10.0 * threshold;
            let witness = (hi > threshold).then(|| c(0.5 * (lo.max(threshold) + hi), 0.0));
            RangeDecision::new(hi, threshold, witness, borderline)
        }
        None => {
            let gap = hull.iter().map(|z| z.im.abs()).fold(f64::INFINITY, f64::min);
            // Negative value: distance from the inscribed polygon to the real axis.
            RangeDecision::new(-gap, threshold, None, gap <= 10.0 * threshold)
        }
    })
}

/// Andrew's monotone chain; counter-clockwise, no repeated closing vertex.
pub(crate) fn convex_hull(points: &[Complex64]) -> Vec<Complex64> {
    let mut pts: Vec<Complex64> = points.to_vec();
    pts.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let cross = |o: Complex64, a: Complex64, b: Complex64| {
        (a.re - o.re) * (b.im - o.im) - (a.im - o.im) * (b.re - o.re)
    };
    let mut hull: Vec<Complex64> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Complex64>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

pub(crate) fn polygon_area(hull: &[Complex64]) -> f64 {
    let k = hull.len();
    if k < 3 {
        return 0.0;
    }
    0.5 * (0..k)
        .map(|i| {
            let (p, q) = (hull[i], hull[(i + 1) % k]);
            p.re * q.im - q.re * p.im
        })
        .sum::<f64>()
        .abs()
}

fn farthest_pair(hull: &[Complex64]) -> (Complex64, Complex64) {
    let mut best = (hull[0], hull[0], 0.0);
    for (i, &p) in hull.iter().enumerate() {
        for &q in &hull[i + 1..] {
            let d = (p - q).norm();
            if d > best.2 {
                best = (p, q, d);
            }
        }
    }
    (best.0, best.1)
}

/// The interval `W ∩ ℝ` of the hull (or of its segment hull when degenerate).
pub(crate) fn real_axis_cut(hull: &[Complex64]) -> Option<(f64, f64)> {
    if hull.is_empty() {
        return None;
    }
    let (p, q) = farthest_pair(hull);
    let diameter = (p - q).norm();
    if hull.len() < 3 || polygon_area(hull) <= 1e-10 * diameter * diameter {
        let eps = 1e-12 * diameter.max(p.norm()).max(q.norm()).max(1.0);
        return segment_cut(p, q, eps);
    }
    let mut xs: Vec<f64> = Vec::new();
    let k = hull.len();
    for i in 0..k {
        let (a, b) = (hull[i], hull[(i + 1) % k]);
        if a.im == 0.0 {
            xs.push(a.re);
        }
        if (a.im < 0.0 && b.im > 0.0) || (a.im > 0.0 && b.im < 0.0) {
            let t = a.im / (a.im - b.im);
            xs.push(a.re + t * (b.re - a.re));
        }
    }
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo <= hi).then_some((lo, hi))
}

fn segment_cut(p: Complex64, q: Complex64, eps: f64) -> Option<(f64, f64)> {
    let (pa, qa) = (p.im.abs() <= eps, q.im.abs() <= eps);
    if pa && qa {
        return Some((p.re.min(q.re), p.re.max(q.re)));
    }
    if pa {
        return Some((p.re, p.re));
    }
    if qa {
        return Some((q.re, q.re));
    }
    if (p.im < 0.0) != (q.im < 0.0) {
        let t = p.im / (p.im - q.im);
        let x = p.re + t * (q.re - p.re);
        return Some((x, x));
    }
    None
}
