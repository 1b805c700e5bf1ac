//! Seeded random matrices for tests, examples and the search restarts.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{c, Block, CMatrix};

/// i.i.d. standard complex Gaussian entries (real and imaginary parts each N(0, 1/2)).
pub fn gaussian_block<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Block {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(h * re, h * im)
    })
}

pub fn gaussian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    CMatrix::from_block(gaussian_block(rng, n, n))
}

/// Haar-distributed unitary (QR of a Gaussian with the phases of `R`'s diagonal removed).
pub fn unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    let qr = gaussian_block(rng, n, n).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    CMatrix::from_block(q)
}

/// `G G*` for an `n × rank` Gaussian `G`, normalized to unit Frobenius norm.
pub fn psd<R: Rng + ?Sized>(rng: &mut R, n: usize, rank: usize) -> CMatrix {
    let g = gaussian_block(rng, n, rank);
    let p = crate::linalg::hermitian_part(&(&g * g.adjoint()));
    let nrm = p.norm();
    CMatrix::from_block(if nrm > 0.0 { p / c(nrm, 0.0) } else { p })
}

/// Positive definite, eigenvalues bounded below by `floor` relative to unit norm.
pub fn pd<R: Rng + ?Sized>(rng: &mut R, n: usize, floor: f64) -> CMatrix {
    let p = psd(rng, n, n).into_block() + DMatrix::identity(n, n) * c(floor, 0.0);
    CMatrix::from_block(p)
}

/// Well-conditioned invertible matrix: `U diag(σ) V*` with σ uniform in `[lo, hi]`.
pub fn conditioned<R: Rng + ?Sized>(rng: &mut R, n: usize, lo: f64, hi: f64) -> CMatrix {
    let u = unitary(rng, n);
    let v = unitary(rng, n);
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |_, _| {
        c(rng.random_range(lo..=hi), 0.0)
    }));
    CMatrix::from_block(u.as_block() * d * v.adjoint().as_block())
}

/// Product of `k` random PSD matrices; `ranks[j]` is the rank of factor `j`.
pub fn psd_product<R: Rng + ?Sized>(rng: &mut R, n: usize, ranks: &[usize]) -> (CMatrix, Vec<CMatrix>) {
    let factors: Vec<CMatrix> = ranks
        .iter()
        .map(|&r| if r >= n { pd(rng, n, 0.05) } else { psd(rng, n, r) })
        .collect();
    let prod = crate::linalg::product_chain(&factors).expect("consistent sizes");
    (prod, factors)
}

/// Random matrix rotated by a phase so that its determinant is real and positive.
pub fn positive_det<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    let g = gaussian_block(rng, n, n);
    let det = g.determinant();
    let phase = num_complex::Complex64::from_polar(1.0, -det.arg() / n as f64);
    CMatrix::from_block(g * phase)
}
