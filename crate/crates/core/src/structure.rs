//! Structural predicates on a single matrix and the block split
//! `U* A U = [[T1, R], [0, T2]]` with `T1` invertible and `T2` nilpotent.
//!
//! All thresholds are relative: with `tol` the caller's tolerance, a quantity
//! is zero when it is at most `tol · max(1, ‖A‖_F)` (the *tol-scale*).

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::Result;
use crate::io::complex_serde;
use crate::linalg::{
    c, condition_number, hermitian_part, is_strictly_lower_zero, min_hermitian_eigenvalue,
    null_space, ordered_schur, partition_diagonal, singular_values, svd_block, asymmetry, Block,
    CMatrix, UnitaryPair, ZERO,
};

/// `A = U [[T1, R], [0, T2]] U*`, `T1` upper triangular and invertible, `T2`
/// strictly upper triangular.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TriangularSplit {
    #[serde(skip)]
    pub u: UnitaryPair,
    #[serde(skip)]
    pub t1: Block,
    #[serde(skip)]
    pub r: Block,
    #[serde(skip)]
    pub t2: Block,
    pub m: usize,
    pub p: usize,
    pub zero_threshold: f64,
    /// Magnitudes discarded when forcing `T2` (and the block below `T1`) to zero.
    pub diag_residuals: Vec<f64>,
    pub r_norm: f64,
    pub t2_norm: f64,
}

impl TriangularSplit {
    /// `[[T1, R], [0, T2]]`.
    pub fn triangular(&self) -> Block {
        crate::linalg::block2x2(&self.t1, &self.r, &DMatrix::zeros(self.p, self.m), &self.t2)
    }

    /// `U [[T1, R], [0, T2]] U*`.
    pub fn reassemble(&self) -> Block {
        self.u.q.as_block() * self.triangular() * self.u.q.adjoint().as_block()
    }

    pub fn r_is_zero(&self) -> bool {
        self.r_norm <= self.zero_threshold
    }

    pub fn t2_is_zero(&self) -> bool {
        self.t2_norm <= self.zero_threshold
    }
}

/// Splits `A` into an invertible and a nilpotent part.
///
/// Upper triangular input is reordered in place (so matrices already in
/// split form come back unchanged). Otherwise the nilpotent part is peeled
/// off by repeated deflation of the numerical left null space (singular
/// values `≤` tol-scale) and the remaining block is brought to Schur form.
/// Deflating by singular values keeps defective zero eigenvalues, whose
/// computed eigenvalues scatter far beyond the tolerance, on the nilpotent
/// side.
pub fn triangular_split(a: &CMatrix, tol: f64) -> Result<TriangularSplit> {
    let n = a.n();
    let thr = tol * a.scale();
    let (u, t, m, residuals) = if is_strictly_lower_zero(a) {
        let mut t = a.as_block().clone();
        let mut u = DMatrix::identity(n, n);
        let m = partition_diagonal(&mut t, &mut u, |z| z.norm() > thr);
        let residuals = (m..n).map(|i| t[(i, i)].norm()).collect();
        (u, t, m, residuals)
    } else {
        deflate_nilpotent(a.as_block(), thr)?
    };
    let mut t = t;
    for j in 0..n {
        for i in j + 1..n {
            t[(i, j)] = ZERO;
        }
    }
    for i in m..n {
        t[(i, i)] = ZERO;
    }
    let p = n - m;
    let t1 = t.view((0, 0), (m, m)).into_owned();
    let r = t.view((0, m), (m, p)).into_owned();
    let t2 = t.view((m, m), (p, p)).into_owned();
    let err = (a.as_block() - &u * &t * u.adjoint()).norm();
    Ok(TriangularSplit {
        u: UnitaryPair {
            q: CMatrix::from_block(u),
            reconstruction_error: err,
        },
        r_norm: r.norm(),
        t2_norm: t2.norm(),
        t1,
        r,
        t2,
        m,
        p,
        zero_threshold: thr,
        diag_residuals: residuals,
    })
}

fn deflate_nilpotent(a: &Block, thr: f64) -> Result<(Block, Block, usize, Vec<f64>)> {
    let n = a.nrows();
    let mut work = a.clone();
    let mut q: Block = DMatrix::identity(n, n);
    let mut m = n;
    let mut residuals = Vec::new();
    while m > 0 {
        let top = work.view((0, 0), (m, m)).into_owned();
        let (w, s, _) = svd_block(&top)?;
        let k = s.iter().filter(|&&x| x <= thr).count();
        if k == 0 {
            break;
        }
        residuals.extend(s[m - k..].iter().copied());
        // Full unitary whose trailing k columns span the left null space of `top`.
        let mut embed: Block = DMatrix::identity(n, n);
        embed.view_mut((0, 0), (m, m)).copy_from(&w);
        work = embed.adjoint() * &work * &embed;
        q = &q * &embed;
        m -= k;
        for i in m..m + k {
            for j in 0..m + k {
                work[(i, j)] = ZERO;
            }
        }
    }
    // Schur form of the invertible block.
    if m > 0 {
        let t1 = CMatrix::from_block(work.view((0, 0), (m, m)).into_owned());
        let schur = ordered_schur(&t1, thr)?;
        let mut embed: Block = DMatrix::identity(n, n);
        embed.view_mut((0, 0), (m, m)).copy_from(schur.u.q.as_block());
        work = embed.adjoint() * &work * &embed;
        q = &q * &embed;
    }
    Ok((q, work, m, residuals))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PsdTest {
    pub verdict: bool,
    pub min_eigenvalue: f64,
    pub asymmetry: f64,
}

/// Hermitian within tol-scale and `λ_min ≥ −tol-scale`.
pub fn is_psd(a: &CMatrix, tol: f64) -> PsdTest {
    let thr = tol * a.scale();
    let asym = asymmetry(a);
    let min_eigenvalue = min_hermitian_eigenvalue(&hermitian_part(a));
    PsdTest {
        verdict: asym <= thr && min_eigenvalue >= -thr,
        min_eigenvalue,
        asymmetry: asym,
    }
}

/// `α = tr(A)/n` when `‖A − αI‖_F ≤ tol-scale`.
pub fn scalar_of(a: &CMatrix, tol: f64) -> Option<Complex64> {
    let n = a.n();
    let alpha = a.trace() / c(n as f64, 0.0);
    let dev = (a.as_block() - DMatrix::<Complex64>::identity(n, n) * alpha).norm();
    (dev <= tol * a.scale()).then_some(alpha)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DetClass {
    Positive,
    Zero,
    NegativeOrNonreal,
}

#[derive(Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DetInfo {
    pub class: DetClass,
    #[serde(serialize_with = "complex_serde::one")]
    pub value: Complex64,
    pub log2_abs: f64,
    pub smallest_singular_value: f64,
}

/// Determinant as `mantissa · 2^exponent` so long products neither overflow
/// nor underflow.
pub(crate) fn scaled_product(values: &[Complex64]) -> (Complex64, i64) {
    let mut mant = c(1.0, 0.0);
    let mut exp = 0i64;
    for &z in values {
        mant *= z;
        let r = mant.norm();
        if r == 0.0 {
            return (ZERO, 0);
        }
        let e = r.log2().floor() as i64;
        mant /= 2f64.powi(e as i32);
        exp += e;
    }
    (mant, exp)
}

/// Sign class of the determinant.
///
/// `Zero` when the matrix is numerically singular (smallest singular value
/// `≤` tol-scale) or `|det| ≤ (tol-scale)^n`; `Positive` when real within
/// `tol · |det|` with positive real part.
pub fn determinant_class(a: &CMatrix, tol: f64) -> Result<DetInfo> {
    let eig = schur_eigenvalues(a)?;
    determinant_from_eigenvalues(a, &eig, tol)
}

fn determinant_from_eigenvalues(a: &CMatrix, eig: &[Complex64], tol: f64) -> Result<DetInfo> {
    let n = a.n();
    let thr = tol * a.scale();
    let (mant, exp) = scaled_product(eig);
    let log2_abs = if mant == ZERO { f64::NEG_INFINITY } else { mant.norm().log2() + exp as f64 };
    let value = mant * 2f64.powf(exp as f64);
    let smin = singular_values(a)?.last().copied().unwrap_or(0.0);
    let class = if smin <= thr || log2_abs <= n as f64 * thr.log2() {
        DetClass::Zero
    } else if mant.im.abs() <= tol * mant.norm() && mant.re > 0.0 {
        DetClass::Positive
    } else {
        DetClass::NegativeOrNonreal
    };
    Ok(DetInfo {
        class,
        value,
        log2_abs,
        smallest_singular_value: smin,
    })
}

/// Eigenvalues read off the (complex) Schur diagonal.
pub fn schur_eigenvalues(a: &CMatrix) -> Result<Vec<Complex64>> {
    let t = if is_strictly_lower_zero(a) {
        a.as_block().clone()
    } else {
        ordered_schur(a, 0.0)?.t.into_block()
    };
    Ok((0..a.n()).map(|i| t[(i, i)]).collect())
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SpectralSummary {
    #[serde(serialize_with = "complex_serde::many")]
    pub eigenvalues: Vec<Complex64>,
    /// Index groups of eigenvalues within tol-scale of each other (single linkage).
    pub clusters: Vec<Vec<usize>>,
    /// Sum of principal arguments, each in `(−π, π]`, with multiplicity.
    pub argument_sum: f64,
    pub has_negative_real_eigenvalue: bool,
    /// Some eigenvalue lies within 10× the angle tolerance of the negative axis.
    pub negative_real_borderline: bool,
    #[serde(serialize_with = "complex_serde::one")]
    pub det_value: Complex64,
}

pub fn spectral_summary(a: &CMatrix, tol: f64) -> Result<SpectralSummary> {
    let eig = schur_eigenvalues(a)?;
    Ok(summarize(a, eig, tol))
}

fn summarize(a: &CMatrix, eigenvalues: Vec<Complex64>, tol: f64) -> SpectralSummary {
    let thr = tol * a.scale();
    let mut has_neg = false;
    let mut near_neg = false;
    for z in &eigenvalues {
        let r = z.norm();
        if r <= thr {
            continue;
        }
        let angle_tol = 1e-8f64.max(thr / r);
        let gap = std::f64::consts::PI - z.arg().abs();
        has_neg |= gap <= angle_tol;
        near_neg |= gap <= 10.0 * angle_tol;
    }
    let (mant, exp) = scaled_product(&eigenvalues);
    SpectralSummary {
        clusters: cluster(&eigenvalues, thr),
        argument_sum: eigenvalues.iter().map(|z| z.arg()).sum(),
        has_negative_real_eigenvalue: has_neg,
        negative_real_borderline: near_neg,
        det_value: mant * 2f64.powf(exp as f64),
        eigenvalues,
    }
}

/// Single-linkage clusters of radius `radius`, each sorted, ordered by first index.
pub(crate) fn cluster(values: &[Complex64], radius: f64) -> Vec<Vec<usize>> {
    let n = values.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if (values[i] - values[j]).norm() <= radius {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    groups
}

/// Eigenvector basis `S` with `S⁻¹ A S = diag(d)`, `d ≥ 0`.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Diagonalizer {
    #[serde(skip)]
    pub s: CMatrix,
    pub d: Vec<f64>,
    pub condition: f64,
    /// `cond(S) > 1e8`; the diagonalizer is still returned.
    pub ill_conditioned: bool,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct NonnegDiagTest {
    pub verdict: bool,
    pub summary: SpectralSummary,
    pub diagonalizer: Option<Diagonalizer>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

/// Whether `A` is similar to a nonnegative diagonal matrix, i.e. its minimal
/// polynomial has only simple nonnegative roots.
///
/// Eigenvalues are grouped with radius `√tol · max(1, ‖A‖_F)`, the spread a
/// defective double eigenvalue shows after rounding. For every group with
/// centre `λ` (required real and nonnegative within that radius) and size
/// `μ`, `A − λI` must have `μ` singular values `≤` tol-scale. The matching
/// right singular vectors form the diagonalizer.
pub fn similar_to_nonneg_diag(a: &CMatrix, tol: f64) -> Result<NonnegDiagTest> {
    let n = a.n();
    let thr = tol * a.scale();
    let radius = tol.sqrt() * a.scale();
    let summary = spectral_summary(a, tol)?;
    let reject = |summary: SpectralSummary, why: String| NonnegDiagTest {
        verdict: false,
        summary,
        diagonalizer: None,
        reason: Some(why),
    };
    let mut columns = Vec::with_capacity(n);
    let mut d = Vec::with_capacity(n);
    for group in cluster(&summary.eigenvalues, radius) {
        let mu = group.len();
        let centre = group.iter().map(|&i| summary.eigenvalues[i]).sum::<Complex64>() / c(mu as f64, 0.0);
        if centre.im.abs() > radius || centre.re < -radius {
            let why = format!("eigenvalue {centre} is not real and nonnegative");
            return Ok(reject(summary, why));
        }
        let lambda = centre.re.max(0.0);
        let shifted = a.as_block() - DMatrix::<Complex64>::identity(n, n) * c(lambda, 0.0);
        let kernel = null_space(&shifted, thr)?;
        if kernel.ncols() < mu {
            let why = format!(
                "eigenvalue {lambda:e} has algebraic multiplicity {mu} but geometric multiplicity {}",
                kernel.ncols()
            );
            return Ok(reject(summary, why));
        }
        let start = kernel.ncols() - mu;
        for j in start..kernel.ncols() {
            columns.push(kernel.column(j).into_owned());
            d.push(lambda);
        }
    }
    let s = DMatrix::from_columns(&columns);
    let condition = condition_number(&s)?;
    if !condition.is_finite() || condition > 1e15 {
        return Ok(reject(summary, "eigenvector basis is singular".into()));
    }
    Ok(NonnegDiagTest {
        verdict: true,
        summary,
        diagonalizer: Some(Diagonalizer {
            s: CMatrix::from_block(s),
            d,
            condition,
            ill_conditioned: condition > 1e8,
        }),
        reason: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{product_chain, ONE};
    use crate::sample;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    const TOL: f64 = 1e-9;

    fn real(n: usize, d: &[f64]) -> CMatrix {
        CMatrix::from_real(n, d).unwrap()
    }

    #[test]
    fn split_examples() {
        let s = triangular_split(&real(2, &[-9., -9., 0., 0.]), TOL).unwrap();
        assert_eq!((s.m, s.p), (1, 1));
        assert_eq!(s.t1[(0, 0)], c(-9., 0.));
        assert_eq!(s.r[(0, 0)], c(-9., 0.));
        assert_eq!(s.t2[(0, 0)], ZERO);

        let s = triangular_split(&CMatrix::identity(3), TOL).unwrap();
        assert_eq!((s.m, s.p), (3, 0));
        assert_eq!(s.r.shape(), (3, 0));
        assert_eq!(s.t2.shape(), (0, 0));

        let nil = real(2, &[0., 1., 0., 0.]);
        let s = triangular_split(&nil, TOL).unwrap();
        assert_eq!((s.m, s.p), (0, 2));
        assert_eq!(s.t2, nil.into_block());
    }

    #[test]
    fn split_of_rotated_jordan_block() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        // Eigenvalue 0 with a 2x2 Jordan block next to the invertible part diag(2, 3i).
        let t = CMatrix::from_rows(&[
            vec![c(2., 0.), c(1., 0.), c(0., 1.), c(0., 0.)],
            vec![ZERO, c(0., 3.), ZERO, c(1., 1.)],
            vec![ZERO, ZERO, ZERO, ONE],
            vec![ZERO, ZERO, ZERO, ZERO],
        ])
        .unwrap();
        let v = sample::unitary(&mut rng, 4);
        let a = product_chain(&[v.clone(), t, v.adjoint()]).unwrap();
        let s = triangular_split(&a, TOL).unwrap();
        assert_eq!((s.m, s.p), (2, 2));
        assert!(!s.t2_is_zero());
        let err = (a.as_block() - s.reassemble()).norm();
        assert!(err <= (1e-8 + 4.0 * s.zero_threshold) * a.scale());
        let t2 = &s.t2;
        assert_eq!(t2[(0, 0)], ZERO);
        assert_eq!(t2[(1, 0)], ZERO);
        assert_eq!(t2 * t2, DMatrix::zeros(2, 2));
    }

    #[test]
    fn psd_examples() {
        assert!(is_psd(&real(2, &[9., 3., 3., 2.]), TOL).verdict);
        let t = is_psd(&real(2, &[0., 1., 1., 0.]), TOL);
        assert!(!t.verdict && (t.min_eigenvalue + 1.0).abs() < 1e-14);
        assert!(!is_psd(&real(2, &[1., 1., 0., 2.]), TOL).verdict);
    }

    #[test]
    fn scalar_examples() {
        assert_eq!(scalar_of(&CMatrix::scalar(2, c(-1., 0.)), TOL), Some(c(-1., 0.)));
        assert_eq!(scalar_of(&CMatrix::scalar(2, c(-9., 0.)), TOL), Some(c(-9., 0.)));
        assert_eq!(scalar_of(&real(2, &[-9., -9., 0., 0.]), TOL), None);
    }

    #[test]
    fn nonneg_diag_examples() {
        let a = real(2, &[1., 1., 0., 2.]);
        let t = similar_to_nonneg_diag(&a, TOL).unwrap();
        assert!(t.verdict);
        let dz = t.diagonalizer.unwrap();
        let mut sorted = dz.d.clone();
        sorted.sort_by(f64::total_cmp);
        assert!((sorted[0] - 1.0).abs() < 1e-12 && (sorted[1] - 2.0).abs() < 1e-12);
        let s = dz.s.as_block();
        let dm = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(2, dz.d.iter().map(|&x| c(x, 0.))));
        assert!((a.as_block() * s - s * dm).norm() < 1e-7 * a.scale());

        let t = similar_to_nonneg_diag(&real(2, &[0., 1., 0., 0.]), TOL).unwrap();
        assert!(!t.verdict);

        let t = similar_to_nonneg_diag(&real(2, &[1., 1., 1., 1.]), TOL).unwrap();
        assert!(t.verdict);
        let mut d = t.diagonalizer.unwrap().d;
        d.sort_by(f64::total_cmp);
        assert!(d[0].abs() < 1e-12 && (d[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rotated_defects_are_not_diagonalizable() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for base in [real(2, &[0., 1., 0., 0.]), real(2, &[1., 1., 0., 1.]), real(3, &[2., 1., 0., 0., 2., 1., 0., 0., 2.])] {
            let v = sample::unitary(&mut rng, base.n());
            let a = product_chain(&[v.clone(), base, v.adjoint()]).unwrap();
            assert!(!similar_to_nonneg_diag(&a, TOL).unwrap().verdict);
        }
    }

    #[test]
    fn determinant_examples() {
        assert_eq!(determinant_class(&real(1, &[-9.]), TOL).unwrap().class, DetClass::NegativeOrNonreal);
        assert_eq!(determinant_class(&real(2, &[-9., -9., 0., 0.]), TOL).unwrap().class, DetClass::Zero);
        let d = determinant_class(&CMatrix::diag(&[c(0., 1.), c(0., -1.)]), TOL).unwrap();
        assert_eq!(d.class, DetClass::Positive);
        assert!((d.value - ONE).norm() < 1e-14);
        assert_eq!(
            determinant_class(&CMatrix::diag(&[c(0., 1.), c(0., 1.)]), TOL).unwrap().class,
            DetClass::NegativeOrNonreal
        );
    }

    #[test]
    fn scaled_product_survives_extreme_magnitudes() {
        let vals = vec![c(1e200, 0.); 4];
        let (m, e) = scaled_product(&vals);
        let log2 = m.norm().log2() + e as f64;
        assert!((log2 - 800.0 * 10f64.log2()).abs() < 1e-6);
    }

    #[test]
    fn spectral_examples() {
        let w = Complex64::from_polar(1.0, 2.0 * PI / 3.0);
        let s = spectral_summary(&CMatrix::diag(&[ONE, w, w.conj()]), TOL).unwrap();
        assert!(s.argument_sum.abs() < 1e-15);
        assert!(!s.has_negative_real_eigenvalue);

        let s = spectral_summary(&CMatrix::scalar(2, c(-9., 0.)), TOL).unwrap();
        assert!(s.has_negative_real_eigenvalue);
        assert_eq!(s.clusters, vec![vec![0, 1]]);

        let s = spectral_summary(&CMatrix::diag(&[c(0., 1.), c(0., 1.)]), TOL).unwrap();
        assert!((s.argument_sum - PI).abs() < 1e-15);
    }

    #[test]
    fn clustering_is_single_linkage() {
        let v = [c(0., 0.), c(1., 0.), c(2., 0.), c(5., 0.)];
        assert_eq!(cluster(&v, 1.0), vec![vec![0, 1, 2], vec![3]]);
        assert_eq!(cluster(&v, 0.5).len(), 4);
    }
}
