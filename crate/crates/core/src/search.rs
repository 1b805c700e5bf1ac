//! Numerical search for `A ≈ P1⋯Pk` with PSD factors `Pj = Gj Gj* + δI`.
//!
//! Each restart runs gradient descent with Armijo backtracking on
//! `f = ‖P1⋯Pk − A‖_F²`. If that stalls above the target, a damped
//! Gauss-Newton (Levenberg-Marquardt) polish over the real and imaginary
//! parts of the `Gj` takes over. A result is reported as found only after
//! an independent [`verify_factorization`].
//!
//! Failure proves nothing: the problem is nonconvex.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::construct::{verify_factorization, FactorList};
use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_function, hermitian_part, product_of_blocks, Block, CMatrix, ZERO};
use crate::sample::gaussian_block;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SearchConfig {
    pub k: usize,
    pub restarts: usize,
    pub max_iters: usize,
    /// First trial step of the line search, relative to the normalized problem.
    pub step_init: f64,
    /// Absolute floor `δ` added to every factor.
    pub pd_floor: f64,
    pub seed: u64,
    pub success_residual: f64,
    /// Iteration cap of the Levenberg-Marquardt polish (0 disables it).
    pub polish_iters: usize,
}

impl SearchConfig {
    pub fn new(k: usize) -> Self {
        SearchConfig {
            k,
            restarts: 16,
            max_iters: 2000,
            step_init: 1.0,
            pd_floor: 0.0,
            seed: 0,
            success_residual: 1e-6,
            polish_iters: 200,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 || !(self.success_residual > 0.0) || !(self.pd_floor >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "search needs k ≥ 1, successResidual > 0, pdFloor ≥ 0 (got {}, {}, {})",
                self.k, self.success_residual, self.pd_floor
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SearchResult {
    pub found: bool,
    pub factors: Option<FactorList>,
    pub best_residual: f64,
    pub iters_used: usize,
    pub restarts_used: usize,
}

/// `f = ‖P1⋯Pk − A‖_F²` and its gradient with respect to each `Gj`, where
/// `Pj = Gj Gj* + δI`.
///
/// The gradient `2(Mj + Mj*)Gj`, `Mj = (P1⋯P(j−1))* E (P(j+1)⋯Pk)*`, is the
/// complex form of the real gradient: the derivative of `f` along `ΔG` is
/// `Re tr(∇* ΔG)`.
pub fn objective_and_gradient(g: &[CMatrix], a: &CMatrix, delta: f64) -> Result<(f64, Vec<CMatrix>)> {
    if g.is_empty() || g.iter().any(|x| x.n() != a.n()) {
        return Err(Error::DimensionMismatch("every Gj must match A".into()));
    }
    let blocks: Vec<Block> = g.iter().map(|x| x.as_block().clone()).collect();
    let (f, grads) = objective_gradient_blocks(&blocks, a.as_block(), delta);
    Ok((f, grads.into_iter().map(CMatrix::from_block).collect()))
}

fn factors_of(g: &[Block], delta: f64) -> Vec<Block> {
    g.iter()
        .map(|x| {
            let mut p = x * x.adjoint();
            for i in 0..p.nrows() {
                p[(i, i)] += c(delta, 0.0);
            }
            p
        })
        .collect()
}

/// `prefix[j] = P1⋯Pj` (`prefix[0] = I`), `suffix[j] = P(j+1)⋯Pk` (`suffix[k] = I`).
fn partial_products(p: &[Block]) -> (Vec<Block>, Vec<Block>) {
    let n = p[0].nrows();
    let k = p.len();
    let mut prefix = vec![DMatrix::identity(n, n)];
    for pj in p {
        let next = prefix.last().unwrap() * pj;
        prefix.push(next);
    }
    let mut suffix = vec![DMatrix::identity(n, n); k + 1];
    for j in (0..k).rev() {
        suffix[j] = &p[j] * &suffix[j + 1];
    }
    (prefix, suffix)
}

fn objective_gradient_blocks(g: &[Block], a: &Block, delta: f64) -> (f64, Vec<Block>) {
    let p = factors_of(g, delta);
    let (prefix, suffix) = partial_products(&p);
    let e = &prefix[p.len()] - a;
    let f = e.norm_squared();
    let grads = (0..p.len())
        .map(|j| {
            let m = prefix[j].adjoint() * &e * suffix[j + 1].adjoint();
            (&m + m.adjoint()) * &g[j] * c(2.0, 0.0)
        })
        .collect();
    (f, grads)
}

fn objective(g: &[Block], a: &Block, delta: f64) -> f64 {
    (product_of_blocks(&factors_of(g, delta)) - a).norm_squared()
}

/// Searches for a verified `k`-term PSD factorization of `A`.
///
/// Restart `r` is seeded with `seed + r`; restart 0 starts from the polar
/// heuristic `Pj = (AA*)^{1/(2k)}`, the others from Gaussian `Gj` scaled so
/// that `‖Pj‖_F ≈ ‖A‖_F^{1/k}`. The first verified restart wins.
pub fn search_factors(a: &CMatrix, cfg: &SearchConfig) -> Result<SearchResult> {
    cfg.validate()?;
    let n = a.n();
    let k = cfg.k;
    let norm = a.fro_norm();
    // Work on A / ‖A‖ so the objective is the squared relative residual.
    let s = if norm > 0.0 { norm } else { 1.0 };
    let target = a.as_block() / c(s, 0.0);
    let unit = s.powf(1.0 / k as f64);
    let delta = cfg.pd_floor / unit;
    let goal = cfg.success_residual * 0.5;

    let mut best: Option<(f64, Vec<Block>)> = None;
    let mut iters_used = 0;
    let mut restarts_used = 0;
    for r in 0..cfg.restarts.max(1) {
        restarts_used += 1;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(r as u64));
        let mut g = if r == 0 {
            polar_start(&target, k, delta)
        } else {
            (0..k)
                .map(|_| {
                    let x = gaussian_block(&mut rng, n, n);
                    let scale = (&x * x.adjoint()).norm().sqrt();
                    x / c(scale.max(f64::MIN_POSITIVE), 0.0)
                })
                .collect()
        };
        let (res, used) = descend(&mut g, &target, delta, cfg, goal);
        iters_used += used;
        let mut res = res;
        if res > goal && cfg.polish_iters > 0 {
            let (r2, used) = polish(&mut g, &target, delta, cfg.polish_iters, goal);
            iters_used += used;
            res = r2;
        }
        if best.as_ref().is_none_or(|(b, _)| res < *b) {
            best = Some((res, g.clone()));
        }
        if res <= goal {
            let list = assemble(a, &g, delta, unit);
            let report = verify_factorization(a, &list.factors, cfg.success_residual)?;
            if report.verdict {
                return Ok(SearchResult {
                    found: true,
                    best_residual: report.product_residual,
                    factors: Some(list),
                    iters_used,
                    restarts_used,
                });
            }
        }
    }
    let (_, g) = best.expect("at least one restart");
    let list = assemble(a, &g, delta, unit);
    let report = verify_factorization(a, &list.factors, cfg.success_residual)?;
    Ok(SearchResult {
        found: report.verdict,
        best_residual: report.product_residual,
        factors: report.verdict.then_some(list),
        iters_used,
        restarts_used,
    })
}

fn polar_start(target: &Block, k: usize, delta: f64) -> Vec<Block> {
    let n = target.nrows();
    let h = hermitian_part(&(target * target.adjoint()));
    let root = hermitian_function(&h, |x| (x.max(0.0).sqrt() - delta).max(0.0).powf(0.5 / k as f64));
    let root = if root.norm() > 0.0 { root } else { DMatrix::identity(n, n) };
    vec![root; k]
}

/// Gradient descent with Armijo backtracking. Returns the relative residual and iterations used.
fn descend(g: &mut [Block], a: &Block, delta: f64, cfg: &SearchConfig, goal: f64) -> (f64, usize) {
    let mut step = cfg.step_init;
    let (mut f, mut grads) = objective_gradient_blocks(g, a, delta);
    let mut iters = 0;
    let mut stalled = 0;
    while iters < cfg.max_iters {
        if f.sqrt() <= goal {
            break;
        }
        iters += 1;
        let gnorm2: f64 = grads.iter().map(|x| x.norm_squared()).sum();
        if gnorm2 == 0.0 {
            break;
        }
        let mut t = step;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<Block> = g.iter().zip(&grads).map(|(x, d)| x - d * c(t, 0.0)).collect();
            let ft = objective(&trial, a, delta);
            if ft <= f - 1e-4 * t * gnorm2 {
                accepted = Some((trial, ft));
                break;
            }
            t *= 0.5;
        }
        let Some((trial, ft)) = accepted else { break };
        stalled = if f - ft <= 1e-10 * f { stalled + 1 } else { 0 };
        g.clone_from_slice(&trial);
        step = 2.0 * t;
        let (f2, g2) = objective_gradient_blocks(g, a, delta);
        f = f2;
        grads = g2;
        if stalled >= 50 {
            break;
        }
    }
    (f.sqrt(), iters)
}

fn unpack(x: &DVector<f64>, n: usize, k: usize) -> Vec<Block> {
    (0..k)
        .map(|j| DMatrix::from_fn(n, n, |a, b| {
            let idx = 2 * ((j * n + a) * n + b);
            c(x[idx], x[idx + 1])
        }))
        .collect()
}

fn pack(g: &[Block]) -> DVector<f64> {
    let n = g[0].nrows();
    let mut x = DVector::zeros(2 * g.len() * n * n);
    for (j, gj) in g.iter().enumerate() {
        for a in 0..n {
            for b in 0..n {
                let idx = 2 * ((j * n + a) * n + b);
                x[idx] = gj[(a, b)].re;
                x[idx + 1] = gj[(a, b)].im;
            }
        }
    }
    x
}

fn residual_vector(e: &Block) -> DVector<f64> {
    let n = e.nrows();
    let mut r = DVector::zeros(2 * n * n);
    for a in 0..n {
        for b in 0..n {
            r[2 * (a * n + b)] = e[(a, b)].re;
            r[2 * (a * n + b) + 1] = e[(a, b)].im;
        }
    }
    r
}

/// Levenberg-Marquardt on the real parameters. The damped step is solved in
/// residual space, `Δ = −Jᵀ (J Jᵀ + λI)⁻¹ r`, since there are fewer
/// residuals than parameters.
fn polish(g: &mut Vec<Block>, a: &Block, delta: f64, max_iters: usize, goal: f64) -> (f64, usize) {
    let n = a.nrows();
    let k = g.len();
    let mut x = pack(g);
    let mut p = factors_of(g, delta);
    let mut e = product_of_blocks(&p) - a;
    let mut f = e.norm_squared();
    let mut lambda = 1e-3;
    let mut iters = 0;
    while iters < max_iters && f.sqrt() > goal {
        iters += 1;
        let (prefix, suffix) = partial_products(&p);
        let rows = 2 * n * n;
        let mut jac = DMatrix::<f64>::zeros(rows, x.len());
        for j in 0..k {
            let left = &prefix[j];
            let right = &suffix[j + 1];
            let gj_adj = g[j].adjoint();
            for aa in 0..n {
                for bb in 0..n {
                    for (part, phase) in [(0, c(1.0, 0.0)), (1, c(0.0, 1.0))] {
                        // dG = phase · e_aa e_bb*, dP = dG G* + G dG*.
                        let mut dp = DMatrix::from_element(n, n, ZERO);
                        for col in 0..n {
                            dp[(aa, col)] += phase * gj_adj[(bb, col)];
                        }
                        for row in 0..n {
                            dp[(row, aa)] += g[j][(row, bb)] * phase.conj();
                        }
                        let de = left * dp * right;
                        let idx = 2 * ((j * n + aa) * n + bb) + part;
                        jac.column_mut(idx).copy_from(&residual_vector(&de));
                    }
                }
            }
        }
        let r = residual_vector(&e);
        let jjt = &jac * jac.transpose();
        let mut accepted = false;
        for _ in 0..30 {
            let mut sys = jjt.clone();
            let shift = lambda * (1.0 + jjt.diagonal().max());
            for i in 0..rows {
                sys[(i, i)] += shift;
            }
            let Some(chol) = sys.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let y = chol.solve(&r);
            let trial_x = &x - jac.transpose() * y;
            let trial_g = unpack(&trial_x, n, k);
            let trial_p = factors_of(&trial_g, delta);
            let trial_e = product_of_blocks(&trial_p) - a;
            let ft = trial_e.norm_squared();
            if ft < f {
                x = trial_x;
                *g = trial_g;
                p = trial_p;
                e = trial_e;
                f = ft;
                lambda = (lambda / 3.0).max(1e-15);
                accepted = true;
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            break;
        }
    }
    (f.sqrt(), iters)
}

/// Rescales the normalized factors back to `A` and wraps them for verification.
fn assemble(a: &CMatrix, g: &[Block], delta: f64, unit: f64) -> FactorList {
    let factors: Vec<CMatrix> = factors_of(g, delta)
        .into_iter()
        .map(|p| CMatrix::from_block(hermitian_part(&p) * c(unit, 0.0)))
        .collect();
    FactorList::measured(a, factors, "search")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample;

    fn fd_check(g: &[CMatrix], a: &CMatrix, delta: f64) -> f64 {
        let (_, grads) = objective_and_gradient(g, a, delta).unwrap();
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for j in 0..g.len() {
            for idx in 0..a.n() * a.n() {
                let (r, col) = (idx / a.n(), idx % a.n());
                for (phase, analytic) in [(c(1., 0.), grads[j][(r, col)].re), (c(0., 1.), grads[j][(r, col)].im)] {
                    let shifted = |sign: f64| {
                        let mut gg: Vec<CMatrix> = g.to_vec();
                        let mut b = gg[j].as_block().clone();
                        b[(r, col)] += phase * sign * h;
                        gg[j] = CMatrix::from_block(b);
                        objective_and_gradient(&gg, a, delta).unwrap().0
                    };
                    let numeric = (shifted(1.0) - shifted(-1.0)) / (2.0 * h);
                    let denom = grads.iter().map(|x| x.fro_norm()).fold(1e-12, f64::max);
                    worst = worst.max((numeric - analytic).abs() / denom);
                }
            }
        }
        worst
    }

    #[test]
    fn gradient_examples() {
        let i = CMatrix::identity(2);
        let (f, gr) = objective_and_gradient(&[i.clone()], &i, 0.0).unwrap();
        assert_eq!(f, 0.0);
        assert_eq!(gr[0].fro_norm(), 0.0);

        let (f, gr) = objective_and_gradient(&[CMatrix::zeros(1)], &CMatrix::identity(1), 0.0).unwrap();
        assert_eq!(f, 1.0);
        assert_eq!(gr[0].fro_norm(), 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g: Vec<CMatrix> = (0..2).map(|_| sample::gaussian(&mut rng, 2)).collect();
        let a = sample::gaussian(&mut rng, 2);
        assert!(fd_check(&g, &a, 0.1) <= 1e-5);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let r = objective_and_gradient(&[CMatrix::identity(2)], &CMatrix::identity(3), 0.0);
        assert!(matches!(r, Err(Error::DimensionMismatch(_))));
        assert!(search_factors(&CMatrix::identity(2), &SearchConfig::new(0)).is_err());
    }

    #[test]
    fn search_examples() {
        let ex1 = CMatrix::from_real(2, &[-9., -9., 0., 0.]).unwrap();
        let r = search_factors(&ex1, &SearchConfig::new(3)).unwrap();
        assert!(r.found && r.best_residual <= 1e-6);
        assert_eq!(r.factors.as_ref().unwrap().factors.len(), 3);

        let r = search_factors(&ex1, &SearchConfig { restarts: 4, ..SearchConfig::new(2) }).unwrap();
        assert!(!r.found);

        let r = search_factors(&CMatrix::identity(2), &SearchConfig::new(1)).unwrap();
        assert!(r.found);
        let p = &r.factors.unwrap().factors[0];
        assert!((p.as_block() - DMatrix::identity(2, 2)).norm() <= 1e-6);
    }

    #[test]
    fn pd_floor_is_respected() {
        let w = num_complex::Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
        let a = CMatrix::diag(&[c(1., 0.), w, w.conj()]);
        let cfg = SearchConfig { pd_floor: 1e-3, success_residual: 1e-10, ..SearchConfig::new(3) };
        let r = search_factors(&a, &cfg).unwrap();
        assert!(r.found);
        for m in r.factors.unwrap().min_factor_eigenvalues {
            assert!(m >= 1e-3 * (1.0 - 1e-9));
        }
    }

    #[test]
    fn same_seed_same_answer() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = sample::gaussian(&mut rng, 3);
        let cfg = SearchConfig { restarts: 2, max_iters: 200, polish_iters: 5, seed: 17, ..SearchConfig::new(4) };
        let x = serde_json::to_string(&search_factors(&a, &cfg).unwrap()).unwrap();
        let y = serde_json::to_string(&search_factors(&a, &cfg).unwrap()).unwrap();
        assert_eq!(x, y);
    }
}
