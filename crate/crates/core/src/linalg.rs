//! Dense complex matrices and the decompositions the rest of the crate is
//! built on.
//!
//! Everything here works on `nalgebra::DMatrix<Complex64>`. [`CMatrix`] is the
//! validated square carrier used at public boundaries; rectangular blocks
//! (the `R` of a triangular split, bordering columns, ...) are plain
//! [`Block`]s.

use std::ops::Deref;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Dense, possibly rectangular, complex block.
pub type Block = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Convergence threshold of the complex Schur iteration.
const DECOMP_EPS: f64 = 5.0 * f64::EPSILON;

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Square complex matrix with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix(Block);

impl CMatrix {
    /// Validates squareness and finiteness. Zero-sized matrices are rejected.
    pub fn new(m: Block) -> Result<Self> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(Error::Empty);
        }
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(CMatrix(m))
    }

    /// Wraps a block the caller knows to be square and finite.
    pub(crate) fn from_block(m: Block) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        CMatrix(m)
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::NotSquare {
                rows: n,
                cols: rows.first().map_or(0, Vec::len),
            });
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    /// Real-valued convenience constructor, row-major.
    pub fn from_real(n: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "expected {} entries, got {}",
                n * n,
                data.len()
            )));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| c(data[i * n + j], 0.0)))
    }

    pub fn identity(n: usize) -> Self {
        CMatrix(DMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        CMatrix(DMatrix::zeros(n, n))
    }

    pub fn diag(entries: &[Complex64]) -> Self {
        CMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(entries)))
    }

    pub fn scalar(n: usize, alpha: Complex64) -> Self {
        CMatrix(DMatrix::identity(n, n) * alpha)
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_block(&self) -> &Block {
        &self.0
    }

    pub fn into_block(self) -> Block {
        self.0
    }

    pub fn fro_norm(&self) -> f64 {
        self.0.norm()
    }

    /// `max(1, ‖A‖_F)`, the reference magnitude for relative tolerances.
    pub fn scale(&self) -> f64 {
        scale_of(&self.0)
    }

    pub fn adjoint(&self) -> CMatrix {
        CMatrix(self.0.adjoint())
    }

    pub fn scaled(&self, s: Complex64) -> CMatrix {
        CMatrix(&self.0 * s)
    }

    /// Direct sum `self ⊕ other`.
    pub fn direct_sum(&self, other: &CMatrix) -> CMatrix {
        CMatrix(direct_sum(&self.0, &other.0))
    }

    /// Kronecker product with the identity, `self ⊗ I_k`.
    pub fn kron_identity(&self, k: usize) -> CMatrix {
        let n = self.n();
        CMatrix(DMatrix::from_fn(n * k, n * k, |i, j| {
            if i % k == j % k {
                self.0[(i / k, j / k)]
            } else {
                ZERO
            }
        }))
    }
}

impl Deref for CMatrix {
    type Target = Block;
    fn deref(&self) -> &Block {
        &self.0
    }
}

impl Serialize for CMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        crate::io::MatrixDocument::from_matrix(self, None).serialize(s)
    }
}

pub fn scale_of(m: &Block) -> f64 {
    m.norm().max(1.0)
}

pub fn direct_sum(a: &Block, b: &Block) -> Block {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut out = DMatrix::zeros(ra + rb, ca + cb);
    out.view_mut((0, 0), (ra, ca)).copy_from(a);
    out.view_mut((ra, ca), (rb, cb)).copy_from(b);
    out
}

/// Assembles `[[tl, tr], [bl, br]]`.
pub fn block2x2(tl: &Block, tr: &Block, bl: &Block, br: &Block) -> Block {
    let (r1, c1) = tl.shape();
    let (r2, c2) = br.shape();
    debug_assert_eq!(tr.shape(), (r1, c2));
    debug_assert_eq!(bl.shape(), (r2, c1));
    let mut out = DMatrix::zeros(r1 + r2, c1 + c2);
    out.view_mut((0, 0), (r1, c1)).copy_from(tl);
    out.view_mut((0, c1), (r1, c2)).copy_from(tr);
    out.view_mut((r1, 0), (r2, c1)).copy_from(bl);
    out.view_mut((r1, c1), (r2, c2)).copy_from(br);
    out
}

pub fn hermitian_part(m: &Block) -> Block {
    (m + m.adjoint()) * c(0.5, 0.0)
}

/// `‖M − M*‖_F`.
pub fn asymmetry(m: &Block) -> f64 {
    (m - m.adjoint()).norm()
}

pub fn is_strictly_lower_zero(m: &Block) -> bool {
    let n = m.nrows();
    (0..n).all(|j| (j + 1..n).all(|i| m[(i, j)] == ZERO))
}

/// Permutation matrix `P` with `P e_j = e_{order[j]}`, so `(P* A P)[i][j] = A[order[i]][order[j]]`.
pub fn permutation(order: &[usize]) -> Block {
    let n = order.len();
    let mut p = DMatrix::zeros(n, n);
    for (j, &src) in order.iter().enumerate() {
        p[(src, j)] = ONE;
    }
    p
}

/// Unitary factor together with the reconstruction error of the decomposition
/// that produced it.
#[derive(Clone, Debug)]
pub struct UnitaryPair {
    pub q: CMatrix,
    pub reconstruction_error: f64,
}

impl UnitaryPair {
    pub fn identity(n: usize) -> Self {
        UnitaryPair {
            q: CMatrix::identity(n),
            reconstruction_error: 0.0,
        }
    }

    /// `‖Q*Q − I‖_F`.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.q.n();
        (self.q.adjoint().as_block() * self.q.as_block() - DMatrix::<Complex64>::identity(n, n))
            .norm()
    }
}

#[derive(Clone, Debug)]
pub struct HermitianEigen {
    /// Ascending.
    pub values: Vec<f64>,
    pub vectors: UnitaryPair,
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigendecomp(h: &CMatrix) -> Result<HermitianEigen> {
    let asym = asymmetry(h);
    if asym > 1e-10 * h.scale() {
        return Err(Error::NotHermitian { asymmetry: asym });
    }
    let (values, vectors) = hermitian_eigen_block(h.as_block());
    let d = DMatrix::from_diagonal(&DVector::from_iterator(
        values.len(),
        values.iter().map(|&x| c(x, 0.0)),
    ));
    let err = (h.as_block() - &vectors * d * vectors.adjoint()).norm();
    Ok(HermitianEigen {
        values,
        vectors: UnitaryPair {
            q: CMatrix::from_block(vectors),
            reconstruction_error: err,
        },
    })
}

/// Symmetrizes and diagonalizes; returns ascending eigenvalues and the
/// matching orthonormal eigenvectors as columns. Empty input gives empty output.
pub(crate) fn hermitian_eigen_block(h: &Block) -> (Vec<f64>, Block) {
    let n = h.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let eig = nalgebra::SymmetricEigen::new(hermitian_part(h));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

/// Smallest eigenvalue of the Hermitian part.
pub(crate) fn min_hermitian_eigenvalue(h: &Block) -> f64 {
    hermitian_eigen_block(h).0.first().copied().unwrap_or(0.0)
}

/// Applies `f` to the eigenvalues of a Hermitian matrix.
pub(crate) fn hermitian_function(h: &Block, f: impl Fn(f64) -> f64) -> Block {
    let (values, v) = hermitian_eigen_block(h);
    let d = DMatrix::from_diagonal(&DVector::from_iterator(
        values.len(),
        values.iter().map(|&x| c(f(x), 0.0)),
    ));
    hermitian_part(&(&v * d * v.adjoint()))
}

#[derive(Clone, Debug)]
pub struct OrderedSchur {
    pub u: UnitaryPair,
    /// Upper triangular, `A = U T U*`.
    pub t: CMatrix,
    /// Diagonal entries with modulus above the threshold occupy `0..m`.
    pub m: usize,
}

/// Complex Schur form with the diagonal partitioned by modulus: entries with
/// `|t_ii| > zero_threshold` first, the rest after. Already-upper-triangular
/// input is only reordered.
pub fn ordered_schur(a: &CMatrix, zero_threshold: f64) -> Result<OrderedSchur> {
    if !(zero_threshold >= 0.0) {
        return Err(Error::Precondition("zero threshold must be nonnegative".into()));
    }
    let n = a.n();
    let (mut u, mut t) = if is_strictly_lower_zero(a) {
        (DMatrix::identity(n, n), a.as_block().clone())
    } else {
        let schur = nalgebra::Schur::try_new(a.as_block().clone(), DECOMP_EPS, 1000 * n.max(8))
            .ok_or(Error::ConvergenceFailure("complex Schur iteration"))?;
        let (u, mut t) = schur.unpack();
        for j in 0..n {
            for i in j + 1..n {
                t[(i, j)] = ZERO;
            }
        }
        (u, t)
    };
    let m = partition_diagonal(&mut t, &mut u, |z| z.norm() > zero_threshold);
    let err = (a.as_block() - &u * &t * u.adjoint()).norm();
    Ok(OrderedSchur {
        u: UnitaryPair {
            q: CMatrix::from_block(u),
            reconstruction_error: err,
        },
        t: CMatrix::from_block(t),
        m,
    })
}

/// Stable partition of the triangular diagonal by `keep_front`, using adjacent
/// Givens swaps. Returns how many entries ended in front.
pub(crate) fn partition_diagonal(
    t: &mut Block,
    u: &mut Block,
    keep_front: impl Fn(Complex64) -> bool,
) -> usize {
    let n = t.nrows();
    let mut placed = 0;
    for j in 0..n {
        if !keep_front(t[(j, j)]) {
            continue;
        }
        let mut k = j;
        while k > placed {
            swap_adjacent(t, u, k - 1);
            k -= 1;
        }
        placed += 1;
    }
    placed
}

/// Exchanges diagonal entries `k` and `k + 1` of the upper triangular `t`,
/// updating `u` so that `U T U*` is unchanged.
pub(crate) fn swap_adjacent(t: &mut Block, u: &mut Block, k: usize) {
    let n = t.nrows();
    let a = t[(k, k)];
    let b = t[(k, k + 1)];
    let d = t[(k + 1, k + 1)];
    // Eigenvector of the 2x2 block for the eigenvalue d.
    let x0 = b;
    let x1 = d - a;
    let nrm = (x0.norm_sqr() + x1.norm_sqr()).sqrt();
    if nrm == 0.0 {
        return;
    }
    let (cs, sn) = (x0 / nrm, x1 / nrm);
    // G = [[cs, -conj(sn)], [sn, conj(cs)]], first column is the eigenvector.
    let g00 = cs;
    let g01 = -sn.conj();
    let g10 = sn;
    let g11 = cs.conj();
    // T <- G* T (rows k, k+1)
    for j in 0..n {
        let r0 = t[(k, j)];
        let r1 = t[(k + 1, j)];
        t[(k, j)] = g00.conj() * r0 + g10.conj() * r1;
        t[(k + 1, j)] = g01.conj() * r0 + g11.conj() * r1;
    }
    // T <- T G, U <- U G (columns k, k+1)
    for m in [&mut *t, &mut *u] {
        for i in 0..n {
            let c0 = m[(i, k)];
            let c1 = m[(i, k + 1)];
            m[(i, k)] = c0 * g00 + c1 * g10;
            m[(i, k + 1)] = c0 * g01 + c1 * g11;
        }
    }
    t[(k + 1, k)] = ZERO;
}

#[derive(Clone, Debug)]
pub struct Svd {
    pub left: UnitaryPair,
    /// Descending.
    pub singulars: Vec<f64>,
    pub right: UnitaryPair,
}

/// `A = left · diag(singulars) · right*`.
pub fn svd(a: &CMatrix) -> Result<Svd> {
    let (u, s, v) = svd_block(a.as_block())?;
    let sig = DMatrix::from_diagonal(&DVector::from_iterator(s.len(), s.iter().map(|&x| c(x, 0.0))));
    let err = (a.as_block() - &u * sig * v.adjoint()).norm();
    Ok(Svd {
        left: UnitaryPair {
            q: CMatrix::from_block(u),
            reconstruction_error: err,
        },
        singulars: s,
        right: UnitaryPair {
            q: CMatrix::from_block(v),
            reconstruction_error: err,
        },
    })
}

/// Thin SVD of a rectangular block, singular values descending.
/// Returns `(U, s, V)` with `A = U diag(s) V*`.
pub(crate) fn svd_block(a: &Block) -> Result<(Block, Vec<f64>, Block)> {
    let (r, cl) = a.shape();
    if r == 0 || cl == 0 {
        return Ok((DMatrix::zeros(r, 0), Vec::new(), DMatrix::zeros(cl, 0)));
    }
    let fa = faer::Mat::<Complex64>::from_fn(r, cl, |i, j| a[(i, j)]);
    let dec = fa.thin_svd().map_err(|_| Error::ConvergenceFailure("singular value decomposition"))?;
    let k = r.min(cl);
    let sv: Vec<f64> = (0..k).map(|i| dec.S()[i].re).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&x, &y| sv[y].total_cmp(&sv[x]));
    let s: Vec<f64> = order.iter().map(|&i| sv[i]).collect();
    let u = DMatrix::from_fn(r, k, |i, j| dec.U()[(i, order[j])]);
    let v = DMatrix::from_fn(cl, k, |i, j| dec.V()[(i, order[j])]);
    let sigma = DMatrix::from_diagonal(&DVector::from_iterator(k, s.iter().map(|&x| c(x, 0.0))));
    if (&u * sigma * v.adjoint() - a).norm() > 1e-10 * a.norm().max(f64::MIN_POSITIVE) {
        return Err(Error::ConvergenceFailure("singular value decomposition"));
    }
    Ok((u, s, v))
}

/// Singular values, descending.
pub(crate) fn singular_values(a: &Block) -> Result<Vec<f64>> {
    Ok(svd_block(a)?.1)
}

/// Orthonormal basis (columns) of the numerical null space: right singular
/// vectors whose singular value is `≤ threshold`.
pub(crate) fn null_space(a: &Block, threshold: f64) -> Result<Block> {
    let n = a.ncols();
    // Pad to a square matrix so that V is a full n x n unitary.
    let sq = if a.nrows() < n {
        let mut p = DMatrix::zeros(n, n);
        p.view_mut((0, 0), a.shape()).copy_from(a);
        p
    } else {
        a.clone()
    };
    let (_, s, v) = svd_block(&sq)?;
    let mut cols = Vec::new();
    for j in 0..n {
        let sj = s.get(j).copied().unwrap_or(0.0);
        if sj <= threshold {
            cols.push(v.column(j).into_owned());
        }
    }
    Ok(if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    })
}

/// Solves `A X = B` for square invertible `A`.
pub fn solve(a: &CMatrix, b: &Block) -> Result<Block> {
    solve_block(a.as_block(), b)
}

pub(crate) fn solve_block(a: &Block, b: &Block) -> Result<Block> {
    if a.nrows() != a.ncols() || a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "solve: A is {:?}, B is {:?}",
            a.shape(),
            b.shape()
        )));
    }
    if a.nrows() == 0 {
        return Ok(b.clone());
    }
    let s = singular_values(a)?;
    let (smax, smin) = (s[0], s[s.len() - 1]);
    if !(smin > 1e-12 * smax) {
        return Err(Error::Singular);
    }
    a.clone().lu().solve(b).ok_or(Error::Singular)
}

pub(crate) fn inverse_block(a: &Block) -> Result<Block> {
    solve_block(a, &DMatrix::identity(a.nrows(), a.nrows()))
}

/// 2-norm condition number.
pub(crate) fn condition_number(a: &Block) -> Result<f64> {
    let s = singular_values(a)?;
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => Ok(hi / lo),
        (Some(_), Some(_)) => Ok(f64::INFINITY),
        _ => Ok(1.0),
    }
}

/// Left-to-right product `F₁ F₂ ⋯ F_k`.
pub fn product_chain(factors: &[CMatrix]) -> Result<CMatrix> {
    let first = factors
        .first()
        .ok_or_else(|| Error::DimensionMismatch("empty factor list".into()))?;
    let n = first.n();
    if let Some(bad) = factors.iter().find(|f| f.n() != n) {
        return Err(Error::DimensionMismatch(format!(
            "factor of size {} in a chain of size {n}",
            bad.n()
        )));
    }
    let mut acc = first.as_block().clone();
    for f in &factors[1..] {
        acc = &acc * f.as_block();
    }
    Ok(CMatrix::from_block(acc))
}

pub(crate) fn product_of_blocks(factors: &[Block]) -> Block {
    let mut it = factors.iter();
    let mut acc = it.next().expect("nonempty product").clone();
    for f in it {
        acc = &acc * f;
    }
    acc
}
