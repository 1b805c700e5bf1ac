//! Explicit PSD factorizations for `k ∈ {1, 2, 3}` and an independent verifier.
//!
//! The three-factor construction follows the reduction
//! `A = U [[T1, R], [0, T2]] U*` and works on the triangular form:
//!
//! * `T2 = 0`, `R ≠ 0`: a shift `S` with `T1 + RS` a product of three
//!   positive definite matrices, a lift of that core to `[[T1 + RS, R], [0, 0]]`,
//!   and the congruence by `[[I, 0], [S, I]]` back to `T`;
//! * `R = 0`, `T2 ≠ 0`: a congruence that moves the first row of `T2` into `R`;
//! * `R ≠ 0`, `T2 ≠ 0`: one trailing index at a time is bordered onto a
//!   factorization of the leading block (column or row variant);
//! * `R = T2 = 0`, or no nilpotent part: the core itself;
//! * `T1` empty (nilpotent `A`): a congruence that creates an invertible part.
//!
//! Cores come from [`search_factors`] with a positive definite floor.
//! Transports between equivalent forms use *-congruence of odd-length
//! factor lists: if `A = P1 P2 P3` then `S*AS = (S*P1S)(S⁻¹P2S⁻*)(S*P3S)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::classify::{classify, ClassifyConfig, MinFactors};
use crate::error::{Error, Result};
use crate::io::{FactorsDocument, MatrixDocument};
use crate::linalg::{
    block2x2, c, direct_sum, hermitian_eigen_block, hermitian_part, inverse_block,
    min_hermitian_eigenvalue, permutation, product_of_blocks, singular_values, solve_block,
    svd_block, Block, CMatrix, UnitaryPair, ONE, ZERO,
};
use crate::numrange::{contains_zero_interior, RangeConfig, RangeDecision};
use crate::search::{search_factors, SearchConfig};
use crate::structure::{
    determinant_class, is_psd, similar_to_nonneg_diag, DetClass, TriangularSplit,
};

/// Ordered PSD factors of a target matrix with their measured quality.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FactorList {
    pub method: String,
    /// `‖P1⋯Pk − A‖_F / ‖A‖_F` (absolute when `A = 0`).
    #[serde(rename = "residual")]
    pub product_residual: f64,
    pub min_factor_eigenvalues: Vec<f64>,
    pub factors: Vec<CMatrix>,
}

impl FactorList {
    pub fn measured(a: &CMatrix, factors: Vec<CMatrix>, method: impl Into<String>) -> Self {
        let blocks: Vec<Block> = factors.iter().map(|f| f.as_block().clone()).collect();
        FactorList {
            method: method.into(),
            product_residual: relative_residual(a.as_block(), &product_of_blocks(&blocks)),
            min_factor_eigenvalues: blocks.iter().map(min_hermitian_eigenvalue).collect(),
            factors,
        }
    }

    pub fn to_document(&self) -> FactorsDocument {
        FactorsDocument {
            factors: self.factors.iter().map(|f| MatrixDocument::from_matrix(f, None)).collect(),
            method: self.method.clone(),
            residual: self.product_residual,
        }
    }
}

fn relative_residual(a: &Block, product: &Block) -> f64 {
    let err = (product - a).norm();
    let norm = a.norm();
    if norm > 0.0 {
        err / norm
    } else {
        err
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct VerifyReport {
    pub verdict: bool,
    #[serde(rename = "residual")]
    pub product_residual: f64,
    pub per_factor_min_eig: Vec<f64>,
    pub per_factor_psd: Vec<bool>,
}

/// Checks `A ≈ P1⋯Pk`: every `Pj` passes [`is_psd`] at `tol` and the
/// relative product residual is at most `tol`.
pub fn verify_factorization(a: &CMatrix, factors: &[CMatrix], tol: f64) -> Result<VerifyReport> {
    if factors.is_empty() {
        return Err(Error::DimensionMismatch("empty factor list".into()));
    }
    if let Some(f) = factors.iter().find(|f| f.n() != a.n()) {
        return Err(Error::DimensionMismatch(format!(
            "factor of size {} for a matrix of size {}",
            f.n(),
            a.n()
        )));
    }
    let blocks: Vec<Block> = factors.iter().map(|f| f.as_block().clone()).collect();
    let residual = relative_residual(a.as_block(), &product_of_blocks(&blocks));
    let tests: Vec<_> = factors.iter().map(|f| is_psd(f, tol)).collect();
    Ok(VerifyReport {
        verdict: residual <= tol && tests.iter().all(|t| t.verdict),
        product_residual: residual,
        per_factor_min_eig: tests.iter().map(|t| t.min_eigenvalue).collect(),
        per_factor_psd: tests.iter().map(|t| t.verdict).collect(),
    })
}

/// `[A]` for PSD `A`.
pub fn factor_one(a: &CMatrix, tol: f64) -> Result<FactorList> {
    let t = is_psd(a, tol);
    if !t.verdict {
        return Err(Error::NotPsd {
            min_eigenvalue: t.min_eigenvalue,
        });
    }
    Ok(FactorList::measured(a, vec![a.clone()], "psd"))
}

/// `A = V D V⁻¹` with `D ≥ 0` diagonal gives `A = (V V*)(V⁻* D V⁻¹)`; the
/// first factor is positive definite.
pub fn factor_two(a: &CMatrix, tol: f64) -> Result<FactorList> {
    let test = similar_to_nonneg_diag(a, tol)?;
    let dz = test.diagonalizer.ok_or(Error::NotDiagonalizableNonneg)?;
    let v = dz.s.as_block();
    let vinv = inverse_block(v)?;
    let d = DMatrix::from_diagonal(&DVector::from_iterator(dz.d.len(), dz.d.iter().map(|&x| c(x, 0.0))));
    let b = hermitian_part(&(v * v.adjoint()));
    let cm = hermitian_part(&(vinv.adjoint() * d * &vinv));
    let method = if dz.ill_conditioned { "eigenbasis (ill-conditioned)" } else { "eigenbasis" };
    Ok(FactorList::measured(
        a,
        vec![CMatrix::from_block(b), CMatrix::from_block(cm)],
        method,
    ))
}

/// `P̃r = S*PrS` at odd positions and `S⁻¹PrS⁻*` at even positions (1-based),
/// so that `P̃1⋯P̃k = S*(P1⋯Pk)S`.
pub fn congruence_transport(factors: &[CMatrix], s: &CMatrix) -> Result<Vec<CMatrix>> {
    if factors.is_empty() || factors.len().is_multiple_of(2) {
        return Err(Error::Precondition(format!(
            "congruence transport needs an odd number of factors, got {}",
            factors.len()
        )));
    }
    if factors.iter().any(|f| f.n() != s.n()) {
        return Err(Error::DimensionMismatch("factor and congruence sizes differ".into()));
    }
    let blocks: Vec<Block> = factors.iter().map(|f| f.as_block().clone()).collect();
    Ok(transport_blocks(&blocks, s.as_block())?
        .into_iter()
        .map(|b| CMatrix::from_block(hermitian_part(&b)))
        .collect())
}

fn transport_blocks(factors: &[Block], s: &Block) -> Result<Vec<Block>> {
    let sinv = inverse_block(s)?;
    Ok(factors
        .iter()
        .enumerate()
        .map(|(j, p)| {
            if j % 2 == 0 {
                s.adjoint() * p * s
            } else {
                &sinv * p * sinv.adjoint()
            }
        })
        .collect())
}

fn require_pd(p: &Block, index: usize) -> Result<()> {
    let floor = 1e-12 * p.norm().max(1.0);
    if min_hermitian_eigenvalue(p) > floor {
        Ok(())
    } else {
        Err(Error::NotInvertibleFactor { index })
    }
}

/// Appends one trailing index: from `P1P2P3 = M` (with `P1`, `P2` positive
/// definite) builds factors of `[[M, X], [0, 0]]`:
/// `Q1 = P1 ⊕ 0`, `Q2 = [[P2, εv], [εv*, 1]]`, `Q3 = P3 ⊕ ε⁻¹`, `v = P1⁻¹X`,
/// `ε = 1/(1 + √(v*P2⁻¹v))`.
pub fn border_column(p1: &CMatrix, p2: &CMatrix, p3: &CMatrix, x: &Block) -> Result<Vec<CMatrix>> {
    check_triple(p1, p2, p3)?;
    if x.shape() != (p1.n(), 1) {
        return Err(Error::DimensionMismatch(format!("X must be {}x1", p1.n())));
    }
    let q = border_column_blocks(p1.as_block(), p2.as_block(), p3.as_block(), x)?;
    Ok(q.into_iter().map(CMatrix::from_block).collect())
}

fn border_column_blocks(p1: &Block, p2: &Block, p3: &Block, x: &Block) -> Result<Vec<Block>> {
    require_pd(p1, 0)?;
    require_pd(p2, 1)?;
    let v = solve_block(p1, x).map_err(|_| Error::NotInvertibleFactor { index: 0 })?;
    let q = (v.adjoint() * solve_block(p2, &v).map_err(|_| Error::NotInvertibleFactor { index: 1 })?)[(0, 0)].re;
    let eps = 1.0 / (1.0 + q.max(0.0).sqrt());
    let ev = &v * c(eps, 0.0);
    Ok(vec![
        direct_sum(p1, &DMatrix::zeros(1, 1)),
        hermitian_part(&block2x2(p2, &ev, &ev.adjoint(), &DMatrix::from_element(1, 1, ONE))),
        direct_sum(p3, &DMatrix::from_element(1, 1, c(1.0 / eps, 0.0))),
    ])
}

/// Row variant: from `P1P2P3 = M` (with `P2`, `P3` positive definite)
/// builds factors of `[[M, 0], [Y, 0]]`:
/// `Q1 = P1 ⊕ ε⁻¹`, `Q2 = [[P2, εw*], [εw, 1]]`, `Q3 = P3 ⊕ 0`, `w = YP3⁻¹`,
/// `ε = 1/(1 + √(wP2⁻¹w*))`.
pub fn border_row(p1: &CMatrix, p2: &CMatrix, p3: &CMatrix, y: &Block) -> Result<Vec<CMatrix>> {
    check_triple(p1, p2, p3)?;
    if y.shape() != (1, p1.n()) {
        return Err(Error::DimensionMismatch(format!("Y must be 1x{}", p1.n())));
    }
    let q = border_row_blocks(p1.as_block(), p2.as_block(), p3.as_block(), y)?;
    Ok(q.into_iter().map(CMatrix::from_block).collect())
}

fn border_row_blocks(p1: &Block, p2: &Block, p3: &Block, y: &Block) -> Result<Vec<Block>> {
    require_pd(p2, 1)?;
    require_pd(p3, 2)?;
    // w = Y P3⁻¹, i.e. w* = P3⁻¹ Y* for Hermitian P3.
    let w_adj = solve_block(p3, &y.adjoint()).map_err(|_| Error::NotInvertibleFactor { index: 2 })?;
    let q = (w_adj.adjoint() * solve_block(p2, &w_adj).map_err(|_| Error::NotInvertibleFactor { index: 1 })?)[(0, 0)].re;
    let eps = 1.0 / (1.0 + q.max(0.0).sqrt());
    let ew_adj = &w_adj * c(eps, 0.0);
    Ok(vec![
        direct_sum(p1, &DMatrix::from_element(1, 1, c(1.0 / eps, 0.0))),
        hermitian_part(&block2x2(p2, &ew_adj, &ew_adj.adjoint(), &DMatrix::from_element(1, 1, ONE))),
        direct_sum(p3, &DMatrix::zeros(1, 1)),
    ])
}

fn check_triple(p1: &CMatrix, p2: &CMatrix, p3: &CMatrix) -> Result<()> {
    if p1.n() != p2.n() || p2.n() != p3.n() {
        return Err(Error::DimensionMismatch("factor sizes differ".into()));
    }
    Ok(())
}

/// Shift data for `T1 + RS`.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ShiftParameters {
    #[serde(skip)]
    pub u: UnitaryPair,
    #[serde(serialize_with = "crate::io::complex_serde::many")]
    pub v: Vec<Complex64>,
    pub epsilon: f64,
    pub r: f64,
    pub theta: f64,
    /// `p × m`.
    #[serde(skip)]
    pub s: Block,
    /// `T1 + RS`.
    #[serde(skip)]
    pub shifted: Block,
    pub doublings: usize,
    pub zero_interior: Option<RangeDecision>,
}

/// Finds `S` (`p × m`) with `det(T1 + RS) > 0` and `0` interior to
/// `W(T1 + RS)`, so that `T1 + RS` is a product of three positive definite
/// matrices.
///
/// For `m = 1`, `S = R*(|t| − t)/‖R‖²` makes `T1 + RS = |t|`. Otherwise, with
/// `(s1, x1, y1)` the top singular triple of `R`, `U` unitary with `Ux1 = e1`,
/// `T̂1 = UT1U*` and `t̂1` the conjugated first row of `T̂1`,
/// `S = s1⁻¹ r e^{iθ} y1 v* U` with `v = t̂1 + εe2` adds `r e^{iθ} e1 v*` to `T̂1`.
/// The determinant is affine in that rank-one term, `d0 + r e^{iθ} d1` with
/// `d1 = det T̂1(ε)` (first row replaced by `v*`), and `θ` is solved so it is
/// positive; `r` doubles until the numerical range test passes.
pub fn lemma_shift(t1: &CMatrix, r: &Block, range: &RangeConfig, tol: f64) -> Result<ShiftParameters> {
    if r.nrows() != t1.n() || r.ncols() == 0 {
        return Err(Error::DimensionMismatch("R must be m x p with p ≥ 1".into()));
    }
    lemma_shift_blocks(t1.as_block(), r, range, tol, None)
}

/// [`lemma_shift`] with a prescribed perturbation size `ε` (still reduced
/// tenfold while `T̂1(ε)` is singular).
pub fn lemma_shift_with_epsilon(t1: &CMatrix, r: &Block, range: &RangeConfig, tol: f64, epsilon: f64) -> Result<ShiftParameters> {
    if r.nrows() != t1.n() || r.ncols() == 0 {
        return Err(Error::DimensionMismatch("R must be m x p with p ≥ 1".into()));
    }
    lemma_shift_blocks(t1.as_block(), r, range, tol, Some(epsilon))
}

fn lemma_shift_blocks(t1: &Block, r: &Block, range: &RangeConfig, tol: f64, epsilon: Option<f64>) -> Result<ShiftParameters> {
    let m = t1.nrows();
    let rnorm = r.norm();
    let scale = t1.norm().max(1.0);
    if rnorm <= tol * scale {
        return Err(Error::Precondition("lemma_shift needs R ≠ 0".into()));
    }
    if m == 1 {
        let t = t1[(0, 0)];
        let gap = c(t.norm(), 0.0) - t;
        let s = r.adjoint() * (gap / c(rnorm * rnorm, 0.0));
        let shifted = t1 + r * &s;
        return Ok(ShiftParameters {
            u: UnitaryPair::identity(1),
            v: vec![ONE],
            epsilon: 0.0,
            r: gap.norm() / rnorm,
            theta: gap.arg(),
            s,
            shifted,
            doublings: 0,
            zero_interior: None,
        });
    }

    let (left, sv, right) = svd_block(r)?;
    let s1 = sv[0];
    let x1: Block = left.columns(0, 1).into_owned();
    let y1: Block = right.columns(0, 1).into_owned();
    let u = unitary_to_e1(&x1);
    let that = &u * t1 * u.adjoint();
    let d0 = that.determinant();
    let row: Block = that.rows(0, 1).into_owned();

    let mut eps = epsilon.unwrap_or(1e-2f64.max(0.1 * row.norm()));
    let mut chosen = None;
    for _ in 0..12 {
        let mut vrow = row.clone();
        vrow[(0, 1)] += c(eps, 0.0);
        let mut te = that.clone();
        te.rows_mut(0, 1).copy_from(&vrow);
        let sing = singular_values(&te)?;
        let invertible = sing[m - 1] > 1e-10 * sing[0];
        let not_e1 = vrow.columns(1, m - 1).norm() > 1e-12 * vrow.norm();
        if invertible && not_e1 {
            chosen = Some((vrow, te.determinant()));
            break;
        }
        eps *= 0.1;
    }
    let (vrow, d1) = chosen.ok_or_else(|| Error::ShiftFailure("no admissible ε for the perturbed row".into()))?;

    let mut radius = 2.0 * d0.norm() / d1.norm();
    for doublings in 0..=60 {
        let big = radius * d1.norm();
        let cval = d0.re + (big * big - d0.im * d0.im).max(0.0).sqrt();
        let phase = (c(cval, 0.0) - d0) / d1;
        let theta = phase.arg();
        let rot = Complex64::from_polar(radius, theta);
        // S = s1⁻¹ r e^{iθ} y1 v* U, where v* is the row `vrow`.
        let s = &y1 * (&vrow * &u) * (rot / c(s1, 0.0));
        let shifted = t1 + r * &s;
        let sm = CMatrix::from_block(shifted.clone());
        let interior = contains_zero_interior(&sm, range)?;
        if interior.verdict && determinant_class(&sm, tol)?.class == DetClass::Positive {
            return Ok(ShiftParameters {
                u: UnitaryPair {
                    q: CMatrix::from_block(u),
                    reconstruction_error: 0.0,
                },
                v: vrow.iter().map(|z| z.conj()).collect(),
                epsilon: eps,
                r: radius,
                theta,
                s,
                shifted,
                doublings,
                zero_interior: Some(interior),
            });
        }
        radius *= 2.0;
    }
    Err(Error::ShiftFailure("zero-interior test still fails after 60 doublings".into()))
}

/// Unitary `U` with `U x = e1` for a unit vector `x` (phase-corrected Householder).
fn unitary_to_e1(x: &Block) -> Block {
    let m = x.nrows();
    let x0 = x[(0, 0)];
    let phi = if x0.norm() > 0.0 { x0 / x0.norm() } else { ONE };
    let mut w = x.clone();
    w[(0, 0)] += phi;
    let wn = w.norm_squared();
    let mut h: Block = DMatrix::identity(m, m);
    if wn > 0.0 {
        h -= &w * w.adjoint() * c(2.0 / wn, 0.0);
    }
    // H x = −φ e1; fix the phase of the first row.
    let scale = -phi.conj();
    for j in 0..m {
        h[(0, j)] *= scale;
    }
    h
}

/// From `A1A2A3 = T1` (positive definite factors, `T1` invertible) builds
/// factors of `[[T1, R], [0, 0]]`: `Q1 = A1 ⊕ 0`, `Q2 = A2 ⊕ I`,
/// `Q3 = [[A3, A3C], [C*A3, C*A3C + I]]` with `C = T1⁻¹R`.
pub fn lift_zero_block(a1: &CMatrix, a2: &CMatrix, a3: &CMatrix, r: &Block) -> Result<Vec<CMatrix>> {
    check_triple(a1, a2, a3)?;
    if r.nrows() != a1.n() {
        return Err(Error::DimensionMismatch("R must have m rows".into()));
    }
    let q = lift_blocks(a1.as_block(), a2.as_block(), a3.as_block(), r)?;
    Ok(q.into_iter().map(CMatrix::from_block).collect())
}

fn lift_blocks(a1: &Block, a2: &Block, a3: &Block, r: &Block) -> Result<Vec<Block>> {
    let p = r.ncols();
    let core = a1 * a2 * a3;
    let cm = solve_block(&core, r).map_err(|_| Error::NotInvertibleCore)?;
    let a3c = a3 * &cm;
    let eye: Block = DMatrix::identity(p, p);
    Ok(vec![
        direct_sum(a1, &DMatrix::zeros(p, p)),
        direct_sum(a2, &eye),
        hermitian_part(&block2x2(a3, &a3c, &a3c.adjoint(), &(cm.adjoint() * &a3c + eye))),
    ])
}

/// For a split with `R = 0` and `T2 ≠ 0`, returns `S` and the split of
/// `S*TS = [[T1', R'], [0, T2']]` with `R' ≠ 0`, where `T = [[T1, R], [0, T2]]`.
///
/// Leading indices of `T2` with zero rows are isolated (their columns vanish
/// too), so they are first permuted to the end; then
/// `S = P [[I, 0], [Z, I]]` with `Z = e1 e1ᵀ` copies the first row of `T2`
/// into `R`.
pub fn case2_congruence(split: &TriangularSplit, tol: f64) -> Result<(CMatrix, TriangularSplit)> {
    let thr = tol * CMatrix::from_block(split.triangular()).scale();
    if split.r.norm() > thr {
        return Err(Error::Precondition("case 2 needs R = 0".into()));
    }
    if split.t2.norm() <= thr {
        return Err(Error::Precondition("case 2 needs T2 ≠ 0".into()));
    }
    let (s, t1, r, t2) = case2_blocks(&split.t1, &split.r, &split.t2, thr);
    let (m, p) = (t1.nrows(), t2.nrows());
    let reduced = TriangularSplit {
        u: UnitaryPair::identity(m + p),
        r_norm: r.norm(),
        t2_norm: t2.norm(),
        t1,
        r,
        t2,
        m,
        p,
        zero_threshold: thr,
        diag_residuals: vec![0.0; p],
    };
    Ok((CMatrix::from_block(s), reduced))
}

fn case2_blocks(t1: &Block, r: &Block, t2: &Block, thr: f64) -> (Block, Block, Block, Block) {
    let (m, p) = (t1.nrows(), t2.nrows());
    let lead = (0..p).find(|&i| t2.row(i).norm() > thr).unwrap_or(0);
    let nil_order: Vec<usize> = (lead..p).chain(0..lead).collect();
    let mut t2p = DMatrix::from_fn(p, p, |i, j| t2[(nil_order[i], nil_order[j])]);
    for j in 0..p {
        for i in j..p {
            t2p[(i, j)] = ZERO;
        }
    }
    let rp = DMatrix::from_fn(m, p, |i, j| r[(i, nil_order[j])]);
    let order: Vec<usize> = (0..m).chain(nil_order.iter().map(|&j| m + j)).collect();
    let perm = permutation(&order);

    let mut z: Block = DMatrix::zeros(p, m);
    z[(0, 0)] = ONE;
    let new_t1 = t1 + &rp * &z;
    let new_r = &rp + z.adjoint() * &t2p;
    let s2 = block2x2(&DMatrix::identity(m, m), &DMatrix::zeros(m, p), &z, &DMatrix::identity(p, p));
    (perm * s2, new_t1, new_r, t2p)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ConstructConfig {
    pub tol: f64,
    pub range: RangeConfig,
    pub seed: u64,
    pub core_restarts: usize,
    /// Relative residual demanded of the 3-PD cores.
    pub core_residual: f64,
    /// PD floor of core factors, relative to `‖core‖_F^{1/3}`.
    pub core_floor: f64,
    /// Acceptance bound on the final relative residual.
    pub residual_limit: f64,
    /// PSD tolerance of final factors, relative to `max(1, ‖P‖_F)`.
    pub psd_tol: f64,
}

impl Default for ConstructConfig {
    fn default() -> Self {
        ConstructConfig {
            tol: crate::classify::DEFAULT_TOL,
            range: RangeConfig::default(),
            seed: 0,
            core_restarts: 16,
            core_residual: 1e-11,
            core_floor: 1e-6,
            residual_limit: 1e-6,
            psd_tol: 1e-7,
        }
    }
}

impl ConstructConfig {
    pub fn classify_config(&self) -> ClassifyConfig {
        ClassifyConfig {
            tol: self.tol,
            range: self.range,
        }
    }
}

struct Ctx<'a> {
    cfg: &'a ConstructConfig,
    next_seed: u64,
    stages: Vec<&'static str>,
}

impl Ctx<'_> {
    fn seed(&mut self) -> u64 {
        let s = self.next_seed;
        self.next_seed = self.next_seed.wrapping_add(1_000_003);
        s
    }

    fn note(&mut self, stage: &'static str) {
        if self.stages.last() != Some(&stage) {
            self.stages.push(stage);
        }
    }
}

/// Three PSD factors of a matrix with `k = 3`.
pub fn factor_three(a: &CMatrix, cfg: &ConstructConfig) -> Result<FactorList> {
    let cls = classify(a, &cfg.classify_config())?;
    if cls.k != MinFactors::Count(3) {
        return Err(Error::Precondition(format!("factor_three needs k = 3, classified k = {}", cls.k)));
    }
    let mut ctx = Ctx {
        cfg,
        next_seed: cfg.seed,
        stages: Vec::new(),
    };
    let blocks = factor_matrix(a.as_block(), &mut ctx)?;
    let factors: Vec<CMatrix> = blocks.iter().map(|b| CMatrix::from_block(hermitian_part(b))).collect();
    let list = FactorList::measured(a, factors, ctx.stages.join("+"));
    if list.product_residual > cfg.residual_limit {
        return Err(Error::ConstructionFailure {
            stage: "verify",
            reason: format!("relative residual {:e} exceeds {:e}", list.product_residual, cfg.residual_limit),
        });
    }
    if let Some(j) = list.factors.iter().position(|f| !is_psd(f, cfg.psd_tol).verdict) {
        return Err(Error::ConstructionFailure {
            stage: "verify",
            reason: format!("factor {j} is not PSD (min eigenvalue {:e})", list.min_factor_eigenvalues[j]),
        });
    }
    Ok(list)
}

/// Splits `t` unitarily and transports the factors of the triangular form back.
fn factor_matrix(t: &Block, ctx: &mut Ctx) -> Result<Vec<Block>> {
    let split = crate::structure::triangular_split(&CMatrix::from_block(t.clone()), ctx.cfg.tol)?;
    let inner = solve_form1(&split.t1, &split.r, &split.t2, split.zero_threshold, ctx)?;
    if *split.u.q.as_block() == DMatrix::identity(t.nrows(), t.nrows()) {
        return Ok(inner);
    }
    transport_blocks(&inner, split.u.q.adjoint().as_block())
}

/// Three PSD factors of `[[T1, R], [0, T2]]`.
fn solve_form1(t1: &Block, r: &Block, t2: &Block, thr: f64, ctx: &mut Ctx) -> Result<Vec<Block>> {
    let (m, p) = (t1.nrows(), t2.nrows());
    if m == 0 {
        return nilpotent(t2, thr, ctx);
    }
    if p == 0 {
        ctx.note("core");
        return core(t1, ctx);
    }
    match (r.norm() <= thr, t2.norm() <= thr) {
        (true, true) => {
            ctx.note("direct-sum");
            let q = core(t1, ctx)?;
            lift_blocks(&q[0], &q[1], &q[2], r)
        }
        (false, true) => {
            ctx.note("shift");
            let (shift, q) = shifted_core(t1, r, ctx)?;
            let lifted = lift_blocks(&q[0], &q[1], &q[2], r)?;
            // [[T1 + RS, R], [0, 0]] = E*TE with E = [[I, 0], [S, I]].
            let e_inv = block2x2(&DMatrix::identity(m, m), &DMatrix::zeros(m, p), &(-&shift.s), &DMatrix::identity(p, p));
            transport_blocks(&lifted, &e_inv)
        }
        (true, false) => {
            ctx.note("case2");
            let (s, nt1, nr, nt2) = case2_blocks(t1, r, t2, thr);
            let inner = solve_form1(&nt1, &nr, &nt2, thr, ctx)?;
            transport_blocks(&inner, &inverse_block(&s)?)
        }
        (false, false) => bordered(t1, r, t2, thr, ctx),
    }
}

/// Shift and 3-PD core of `T1 + RS`. The default `ε` comes first; a thin
/// numerical range (interior margin below 1% of `‖T1 + RS‖_F`) or a failed
/// core search moves to a tenfold larger `ε`, which fattens the range.
fn shifted_core(t1: &Block, r: &Block, ctx: &mut Ctx) -> Result<(ShiftParameters, Vec<Block>)> {
    const ATTEMPTS: usize = 4;
    let mut epsilon = None;
    let mut last = None;
    for attempt in 0..ATTEMPTS {
        let shift = lemma_shift_blocks(t1, r, &ctx.cfg.range, ctx.cfg.tol, epsilon)
            .map_err(|e| stage_error("shift", e))?;
        epsilon = Some(shift.epsilon.max(1e-2) * 10.0);
        let rel = shift.zero_interior.as_ref().map_or(1.0, |z| z.value / shift.shifted.norm());
        if rel < 1e-2 && attempt + 1 < ATTEMPTS {
            continue;
        }
        match core(&shift.shifted, ctx) {
            Ok(q) => return Ok((shift, q)),
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap_or(Error::ShiftFailure("no usable shift".into())))
}

/// Peels the last index (`p ≥ 2`, `R ≠ 0`, `T2 ≠ 0`).
fn bordered(t1: &Block, r: &Block, t2: &Block, thr: f64, ctx: &mut Ctx) -> Result<Vec<Block>> {
    let (m, p) = (t1.nrows(), t2.nrows());
    let n = m + p;
    let r1 = r.columns(0, p - 1).into_owned();
    if r1.norm() > thr {
        ctx.note("border-column");
        let t21 = t2.view((0, 0), (p - 1, p - 1)).into_owned();
        let inner = solve_form1(t1, &r1, &t21, thr, ctx)?;
        let q = leading_pd(inner)?;
        let mut x: Block = DMatrix::zeros(n - 1, 1);
        x.view_mut((0, 0), (m, 1)).copy_from(&r.column(p - 1));
        x.view_mut((m, 0), (p - 1, 1)).copy_from(&t2.view((0, p - 1), (p - 1, 1)));
        border_column_blocks(&q[0], &q[1], &q[2], &x).map_err(|e| stage_error("border-column", e))
    } else {
        // R1 = 0: the first nilpotent index has a zero column, so moving it
        // last gives [[T', 0], [Y, 0]] with T' again in split form.
        ctx.note("border-row");
        let r_rest = r.columns(1, p - 1).into_owned();
        let t2_rest = t2.view((1, 1), (p - 1, p - 1)).into_owned();
        let inner = solve_form1(t1, &r_rest, &t2_rest, thr, ctx)?;
        let q = trailing_pd(inner)?;
        let mut y: Block = DMatrix::zeros(1, n - 1);
        y.view_mut((0, m), (1, p - 1)).copy_from(&t2.view((0, 1), (1, p - 1)));
        let f = border_row_blocks(&q[0], &q[1], &q[2], &y).map_err(|e| stage_error("border-row", e))?;
        let order: Vec<usize> = (0..m).chain(m + 1..n).chain([m]).collect();
        transport_blocks(&f, &permutation(&order).transpose())
    }
}

/// `T2` nilpotent and nonzero. With `(i, j)` the largest entry of `N = T2`,
/// `S = I + t e_j e_iᵀ` puts `‖N‖_F` on the diagonal of `S*NS`, which is then
/// no longer nilpotent.
fn nilpotent(nmat: &Block, thr: f64, ctx: &mut Ctx) -> Result<Vec<Block>> {
    let n = nmat.nrows();
    let mag = nmat.norm();
    if mag <= thr {
        return Err(Error::ConstructionFailure {
            stage: "nilpotent",
            reason: "matrix vanishes at this tolerance".into(),
        });
    }
    ctx.note("nilpotent-congruence");
    let (mut bi, mut bj, mut best) = (0, 1, 0.0);
    for i in 0..n {
        for j in 0..n {
            if nmat[(i, j)].norm() > best {
                (bi, bj, best) = (i, j, nmat[(i, j)].norm());
            }
        }
    }
    let nij = nmat[(bi, bj)];
    let t = nij.conj() / c(best, 0.0) * c(mag / best, 0.0);
    let mut s: Block = DMatrix::identity(n, n);
    s[(bj, bi)] = t;
    let congruent = s.adjoint() * nmat * &s;
    let inner = factor_matrix(&congruent, ctx)?;
    let mut s_inv: Block = DMatrix::identity(n, n);
    s_inv[(bj, bi)] = -t;
    transport_blocks(&inner, &s_inv)
}

/// Three positive definite factors of an invertible core.
fn core(t1: &Block, ctx: &mut Ctx) -> Result<Vec<Block>> {
    let m = t1.nrows();
    let target = CMatrix::from_block(t1.clone());
    if m == 1 {
        let z = t1[(0, 0)];
        if z.re > 0.0 && z.im.abs() <= 1e-12 * z.norm() {
            let root = DMatrix::from_element(1, 1, c(z.re.cbrt(), 0.0));
            return Ok(vec![root.clone(), root.clone(), root]);
        }
    }
    let h = hermitian_part(t1);
    if (t1 - &h).norm() <= 1e-14 * t1.norm() && min_hermitian_eigenvalue(&h) > 0.0 {
        let root = crate::linalg::hermitian_function(&h, f64::cbrt);
        return Ok(vec![root.clone(), root.clone(), root]);
    }
    let scale = target.fro_norm();
    let cfg = SearchConfig {
        pd_floor: ctx.cfg.core_floor * scale.cbrt(),
        success_residual: ctx.cfg.core_residual,
        seed: ctx.seed(),
        restarts: ctx.cfg.core_restarts,
        ..SearchConfig::new(3)
    };
    let res = search_factors(&target, &cfg)?;
    match res.factors {
        Some(list) if res.found => Ok(list.factors.into_iter().map(CMatrix::into_block).collect()),
        _ => Err(Error::ConstructionFailure {
            stage: "core",
            reason: format!(
                "no verified 3-PD factorization of the {m}x{m} core (best residual {:e})",
                res.best_residual
            ),
        }),
    }
}

fn stage_error(stage: &'static str, e: Error) -> Error {
    match e {
        Error::ConstructionFailure { .. } => e,
        other => Error::ConstructionFailure {
            stage,
            reason: other.to_string(),
        },
    }
}

fn is_pd(p: &Block) -> bool {
    let (vals, _) = hermitian_eigen_block(p);
    let top = vals.last().copied().unwrap_or(0.0);
    vals.first().is_some_and(|&lo| lo > 1e-10 * top.max(f64::MIN_POSITIVE))
}

/// Rewrites `P1P2P3` so that `P1` and `P2` are positive definite.
fn leading_pd(q: Vec<Block>) -> Result<Vec<Block>> {
    if is_pd(&q[0]) && is_pd(&q[1]) {
        return Ok(q);
    }
    let (b1, c1) = rewrite_pair(&q[0], &q[1], true)?;
    let (b2, c2) = rewrite_pair(&c1, &q[2], true)?;
    Ok(vec![b1, b2, c2])
}

/// Rewrites `P1P2P3` so that `P2` and `P3` are positive definite.
fn trailing_pd(q: Vec<Block>) -> Result<Vec<Block>> {
    if is_pd(&q[1]) && is_pd(&q[2]) {
        return Ok(q);
    }
    let (b1, c1) = rewrite_pair(&q[1], &q[2], false)?;
    let (b2, c2) = rewrite_pair(&q[0], &b1, false)?;
    Ok(vec![b2, c2, c1])
}

/// For PSD `B`, `C` returns PSD `B'`, `C'` with `B'C' = BC`, `B'` positive
/// definite when `first` holds and `C'` positive definite otherwise.
///
/// With `B = U(B0 ⊕ 0)U*` and `U*CU = [[C11, C12], [C21, C22]]`, the range
/// of `C12` lies in that of `C11`, so `G = C11⁺C12` satisfies `C11G = C12`.
/// `B0^{1/2}C11B0^{1/2} = QΛQ*` then gives `BC = VDV⁻¹` with
/// `V = U[[F, −G], [0, I]]`, `F = B0^{1/2}Q`, `D = Λ ⊕ 0`, and the pairs
/// `(VV*, V⁻*DV⁻¹)` and `(VDV*, V⁻*V⁻¹)`.
fn rewrite_pair(b: &Block, cm: &Block, first: bool) -> Result<(Block, Block)> {
    let n = b.nrows();
    let (vals, vecs) = hermitian_eigen_block(b);
    let top = vals.last().copied().unwrap_or(0.0).max(0.0);
    let cut = 1e-10 * top;
    let pos: Vec<usize> = (0..n).filter(|&i| vals[i] > cut && top > 0.0).collect();
    let zero: Vec<usize> = (0..n).filter(|i| !pos.contains(i)).collect();
    let rk = pos.len();
    if rk == 0 {
        let eye = DMatrix::identity(n, n);
        return Ok(if first { (eye, DMatrix::zeros(n, n)) } else { (DMatrix::zeros(n, n), eye) });
    }
    let order: Vec<usize> = pos.iter().chain(&zero).copied().collect();
    let u = DMatrix::from_fn(n, n, |i, j| vecs[(i, order[j])]);
    let chat = hermitian_part(&(u.adjoint() * cm * &u));
    let c11 = chat.view((0, 0), (rk, rk)).into_owned();
    let c12 = chat.view((0, rk), (rk, n - rk)).into_owned();
    let c11_top = hermitian_eigen_block(&c11).0.last().copied().unwrap_or(0.0).max(0.0);
    let c11_pinv = crate::linalg::hermitian_function(&c11, |x| {
        if x > 1e-12 * c11_top && x > 0.0 { 1.0 / x } else { 0.0 }
    });
    let g = c11_pinv * c12;
    let root: Vec<f64> = pos.iter().map(|&i| vals[i].sqrt()).collect();
    let droot = DMatrix::from_diagonal(&DVector::from_iterator(rk, root.iter().map(|&x| c(x, 0.0))));
    let dinv = DMatrix::from_diagonal(&DVector::from_iterator(rk, root.iter().map(|&x| c(1.0 / x, 0.0))));
    let (lam, q) = hermitian_eigen_block(&(&droot * &c11 * &droot));
    let f = &droot * &q;
    let f_inv = q.adjoint() * &dinv;
    let eye_k: Block = DMatrix::identity(n - rk, n - rk);
    let v = &u * block2x2(&f, &(-&g), &DMatrix::zeros(n - rk, rk), &eye_k);
    let v_inv = block2x2(&f_inv, &(&f_inv * &g), &DMatrix::zeros(n - rk, rk), &eye_k) * u.adjoint();
    let mut dvals = vec![ZERO; n];
    for (i, &l) in lam.iter().enumerate() {
        dvals[i] = c(l.max(0.0), 0.0);
    }
    let d = DMatrix::from_diagonal(&DVector::from_vec(dvals));
    Ok(if first {
        (hermitian_part(&(&v * v.adjoint())), hermitian_part(&(v_inv.adjoint() * d * &v_inv)))
    } else {
        (hermitian_part(&(&v * d * v.adjoint())), hermitian_part(&(v_inv.adjoint() * &v_inv)))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::product_chain;

    const TOL: f64 = 1e-9;

    fn real(n: usize, d: &[f64]) -> CMatrix {
        CMatrix::from_real(n, d).unwrap()
    }

    fn integer_triple() -> Vec<CMatrix> {
        vec![
            real(2, &[9., 3., 3., 2.]),
            real(2, &[13., -15., -15., 18.]),
            real(2, &[1., 1., 1., 1.]),
        ]
    }

    fn example1() -> CMatrix {
        real(2, &[-9., -9., 0., 0.])
    }

    fn assert_product(factors: &[CMatrix], target: &CMatrix, tol: f64) {
        let p = product_chain(factors).unwrap();
        let err = (p.as_block() - target.as_block()).norm();
        assert!(err <= tol * target.scale(), "residual {err:e}");
    }

    #[test]
    fn verify_examples() {
        let r = verify_factorization(&example1(), &integer_triple(), 1e-12).unwrap();
        assert!(r.verdict);
        assert_eq!(r.product_residual, 0.0);

        let swap = real(2, &[0., 1., 1., 0.]);
        let r = verify_factorization(&swap, &[CMatrix::identity(2), swap.clone()], 1e-9).unwrap();
        assert!(!r.verdict);
        assert!(verify_factorization(&CMatrix::identity(2), &[CMatrix::identity(2)], 1e-12).unwrap().verdict);
        assert!(verify_factorization(&CMatrix::identity(2), &[CMatrix::identity(3)], 1e-12).is_err());
    }

    #[test]
    fn one_and_two_factor_examples() {
        for a in [CMatrix::identity(2), real(2, &[9., 3., 3., 2.]), CMatrix::zeros(3)] {
            let f = factor_one(&a, TOL).unwrap();
            assert_eq!(f.factors, vec![a.clone()]);
            assert_eq!(f.product_residual, 0.0);
        }
        assert!(matches!(factor_one(&real(2, &[0., 1., 1., 0.]), TOL), Err(Error::NotPsd { .. })));

        let f = factor_two(&real(1, &[3.]), TOL).unwrap();
        assert!((f.factors[0][(0, 0)] - ONE).norm() < 1e-15);
        assert!((f.factors[1][(0, 0)] - c(3., 0.)).norm() < 1e-14);

        let a = real(2, &[1., 1., 0., 2.]);
        let f = factor_two(&a, TOL).unwrap();
        assert!(f.product_residual <= 1e-10);
        assert!(min_hermitian_eigenvalue(f.factors[0].as_block()) > 0.0);
        assert!(verify_factorization(&a, &f.factors, 1e-9).unwrap().verdict);

        assert!(matches!(factor_two(&real(2, &[0., 1., 0., 0.]), TOL), Err(Error::NotDiagonalizableNonneg)));
    }

    #[test]
    fn congruence_examples() {
        let p = real(2, &[2., 1., 1., 1.]);
        let out = congruence_transport(&[p.clone()], &CMatrix::scalar(2, c(2., 0.))).unwrap();
        assert_eq!(out[0], p.scaled(c(4., 0.)));

        let s = CMatrix::diag(&[ONE, c(2., 0.)]);
        let out = congruence_transport(&integer_triple(), &s).unwrap();
        assert_product(&out, &real(2, &[-9., -18., 0., 0.]), 1e-13);

        let out = congruence_transport(&integer_triple(), &CMatrix::identity(2)).unwrap();
        assert_eq!(out, integer_triple());
        assert!(congruence_transport(&integer_triple()[..2], &s).is_err());
    }

    #[test]
    fn border_examples() {
        let one = CMatrix::identity(1);
        let q = border_column(&one, &one, &one, &DMatrix::zeros(1, 1)).unwrap();
        assert_product(&q, &real(2, &[1., 0., 0., 0.]), 1e-15);
        let q = border_column(&one, &one, &one, &DMatrix::from_element(1, 1, ONE)).unwrap();
        assert!((q[1][(0, 1)] - c(0.5, 0.)).norm() < 1e-15);
        assert_product(&q, &real(2, &[1., 1., 0., 0.]), 1e-15);
        assert!(matches!(
            border_column(&CMatrix::zeros(1), &one, &one, &DMatrix::from_element(1, 1, ONE)),
            Err(Error::NotInvertibleFactor { index: 0 })
        ));

        let q = border_row(&one, &one, &one, &DMatrix::from_element(1, 1, ONE)).unwrap();
        assert!((q[0][(1, 1)] - c(2., 0.)).norm() < 1e-15);
        assert_product(&q, &real(2, &[1., 0., 1., 0.]), 1e-15);
        let q = border_row(&one, &one, &one, &DMatrix::zeros(1, 1)).unwrap();
        assert_product(&q, &real(2, &[1., 0., 0., 0.]), 1e-15);
        assert!(matches!(
            border_row(&one, &one, &CMatrix::zeros(1), &DMatrix::from_element(1, 1, ONE)),
            Err(Error::NotInvertibleFactor { index: 2 })
        ));
    }

    #[test]
    fn lift_examples() {
        let one = CMatrix::identity(1);
        let q = lift_zero_block(&one, &one, &one, &DMatrix::from_element(1, 1, c(2., 0.))).unwrap();
        assert_eq!(q[2], real(2, &[1., 2., 2., 5.]));
        assert_product(&q, &real(2, &[1., 2., 0., 0.]), 1e-15);

        let q = lift_zero_block(&one, &one, &one, &DMatrix::zeros(1, 1)).unwrap();
        assert_eq!(q[2], CMatrix::identity(2));

        let a = CMatrix::from_real(1, &[9f64.cbrt()]).unwrap();
        let q = lift_zero_block(&a, &a, &a, &DMatrix::from_element(1, 1, c(-9., 0.))).unwrap();
        assert!(verify_factorization(&real(2, &[9., -9., 0., 0.]), &q, 1e-12).unwrap().verdict);
    }

    #[test]
    fn shift_examples() {
        let range = RangeConfig::default();
        let s = lemma_shift(&real(1, &[-9.]), &DMatrix::from_element(1, 1, c(-9., 0.)), &range, TOL).unwrap();
        assert!((s.s[(0, 0)] - c(-2., 0.)).norm() < 1e-14);
        assert!((s.shifted[(0, 0)] - c(9., 0.)).norm() < 1e-13);

        let mut r: Block = DMatrix::zeros(2, 1);
        r[(0, 0)] = ONE;
        let s = lemma_shift(&CMatrix::identity(2), &r, &range, TOL).unwrap();
        let shifted = CMatrix::from_block(s.shifted.clone());
        assert_eq!(determinant_class(&shifted, TOL).unwrap().class, DetClass::Positive);
        assert!(contains_zero_interior(&shifted, &range).unwrap().verdict);

        assert!(lemma_shift(&CMatrix::identity(2), &DMatrix::zeros(2, 1), &range, TOL).is_err());
    }

    #[test]
    fn case2_examples() {
        let split = crate::structure::triangular_split(&real(3, &[1., 0., 0., 0., 0., 1., 0., 0., 0.]), TOL).unwrap();
        let (s, reduced) = case2_congruence(&split, TOL).unwrap();
        assert_eq!(reduced.r, DMatrix::from_row_slice(1, 2, &[ZERO, ONE]));
        let t = split.triangular();
        let moved = s.adjoint().as_block() * t * s.as_block();
        assert!((moved - reduced.triangular()).norm() < 1e-15);

        let zero_first = real(4, &[1., 0., 0., 0., 0., 0., 0., 0., 0., 0., 0., 1., 0., 0., 0., 0.]);
        let split = crate::structure::triangular_split(&zero_first, TOL).unwrap();
        let (s, reduced) = case2_congruence(&split, TOL).unwrap();
        assert!(reduced.r.norm() > 0.5);
        let moved = s.adjoint().as_block() * split.triangular() * s.as_block();
        assert!((moved - reduced.triangular()).norm() < 1e-15);

        let diag = crate::structure::triangular_split(&real(2, &[1., 0., 0., 0.]), TOL).unwrap();
        assert!(case2_congruence(&diag, TOL).is_err());
    }

    #[test]
    fn rewrite_pair_preserves_product() {
        let b = real(3, &[1., 0., 0., 0., 2., 0., 0., 0., 0.]);
        let cm = real(3, &[2., 1., 1., 1., 3., 0., 1., 0., 1.]);
        let prod = b.as_block() * cm.as_block();
        for first in [true, false] {
            let (x, y) = rewrite_pair(b.as_block(), cm.as_block(), first).unwrap();
            assert!((&x * &y - &prod).norm() < 1e-12);
            assert!(is_pd(if first { &x } else { &y }));
            assert!(min_hermitian_eigenvalue(&x) > -1e-12 && min_hermitian_eigenvalue(&y) > -1e-12);
        }
    }

    fn check_three(a: &CMatrix) -> FactorList {
        let f = factor_three(a, &ConstructConfig::default()).unwrap();
        assert_eq!(f.factors.len(), 3);
        assert!(f.product_residual <= 1e-6, "{} residual {:e}", f.method, f.product_residual);
        assert!(verify_factorization(a, &f.factors, 1e-6).unwrap().verdict);
        f
    }

    #[test]
    fn three_factor_examples() {
        check_three(&example1());
        check_three(&real(2, &[0., 1., 0., 0.]));
        let w = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
        let f = check_three(&CMatrix::diag(&[ONE, w, w.conj()]));
        assert!(f.min_factor_eigenvalues.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn three_factor_cases() {
        let m9 = CMatrix::scalar(2, c(-9., 0.));
        let big = CMatrix::from_block(block2x2(m9.as_block(), m9.as_block(), &DMatrix::zeros(2, 2), &DMatrix::zeros(2, 2)));
        check_three(&big);
        // R1 ≠ 0 (column border), R1 = 0 (row border), R = 0 (case 2).
        check_three(&real(3, &[1., 1., 0., 0., 0., 1., 0., 0., 0.]));
        check_three(&real(3, &[1., 0., 1., 0., 0., 1., 0., 0., 0.]));
        check_three(&real(3, &[1., 0., 0., 0., 0., 1., 0., 0., 0.]));
        check_three(&real(3, &[0., 1., 0., 0., 0., 1., 0., 0., 0.]));
        assert!(matches!(factor_three(&CMatrix::identity(2), &ConstructConfig::default()), Err(Error::Precondition(_))));
    }
}
