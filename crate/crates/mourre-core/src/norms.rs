//! Weighted Sobolev norms `||<p>^t <q>^s f||`, operator norms between weighted spaces, and
//! inner-window form norms.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::lattice::{vec_norm, Grid};
use crate::linop::{dense_norm, LinOp, Operator};
use crate::C64;

/// `<p>^t <q>^s`, the diagonal acting first.
pub fn weight_op(grid: &Grid, t: f64, s: f64) -> LinOp {
    let m = LinOp::multiplier_fn(grid, |k| C64::new(libm::pow(1.0 + sq(k), t / 2.0), 0.0));
    let d = LinOp::diagonal_fn(grid, |x| C64::new(libm::pow(1.0 + sq(x), s / 2.0), 0.0));
    m.mul(&d)
}

/// Inverse of [`weight_op`]: `<q>^{-s} <p>^{-t}`.
pub fn inverse_weight_op(grid: &Grid, t: f64, s: f64) -> LinOp {
    let m = LinOp::multiplier_fn(grid, |k| C64::new(libm::pow(1.0 + sq(k), -t / 2.0), 0.0));
    let d = LinOp::diagonal_fn(grid, |x| C64::new(libm::pow(1.0 + sq(x), -s / 2.0), 0.0));
    d.mul(&m)
}

/// Multiplier `|k|^2`.
pub fn laplacian(grid: &Grid) -> LinOp {
    LinOp::multiplier_fn(grid, |k| C64::new(sq(k), 0.0))
}

pub(crate) fn sq(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum NormMethod {
    PowerIteration { max_iters: usize, tol: f64 },
    /// Restarted Lanczos on `B^* B`; `max_iters` counts applications of `B^* B`.
    Lanczos { max_iters: usize, tol: f64 },
    DenseSvd,
}

impl Default for NormMethod {
    fn default() -> Self {
        NormMethod::Lanczos { max_iters: 4000, tol: 1e-10 }
    }
}

/// `W_out T W_in^{-1}` as an operator.
pub struct Weighted<'a, T: Operator + ?Sized> {
    inner: &'a T,
    w_in_inv: LinOp,
    w_out: LinOp,
}

impl<'a, T: Operator + ?Sized> Weighted<'a, T> {
    pub fn new(inner: &'a T, t_in: f64, s_in: f64, t_out: f64, s_out: f64) -> Self {
        let g = inner.grid().clone();
        Weighted { inner, w_in_inv: inverse_weight_op(&g, t_in, s_in), w_out: weight_op(&g, t_out, s_out) }
    }
}

impl<T: Operator + ?Sized> Operator for Weighted<'_, T> {
    fn grid(&self) -> &Grid {
        self.inner.grid()
    }
    fn apply(&self, f: &[C64]) -> Vec<C64> {
        self.w_out.apply_vec(&self.inner.apply(&self.w_in_inv.apply_vec(f)))
    }
    fn apply_adjoint(&self, f: &[C64]) -> Vec<C64> {
        self.w_in_inv.adjoint_vec(&self.inner.apply_adjoint(&self.w_out.adjoint_vec(f)))
    }
}

/// Largest singular value of `W_out T W_in^{-1}` on L^2 of the grid.
pub fn opnorm<T: Operator + ?Sized>(
    t: &T,
    t_in: f64,
    s_in: f64,
    t_out: f64,
    s_out: f64,
    method: NormMethod,
) -> Result<f64> {
    let w = Weighted::new(t, t_in, s_in, t_out, s_out);
    operator_norm(&w, method)
}

/// Largest singular value of an operator on node vectors.
pub fn operator_norm<T: Operator + ?Sized>(op: &T, method: NormMethod) -> Result<f64> {
    match method {
        NormMethod::PowerIteration { max_iters, tol } => power_norm(op, max_iters, tol, None),
        NormMethod::Lanczos { max_iters, tol } => lanczos_norm(op, max_iters, tol, None),
        NormMethod::DenseSvd => Ok(dense_norm(&materialize(op)?)),
    }
}

/// Dense matrix of an arbitrary operator.
pub fn materialize<T: Operator + ?Sized>(op: &T) -> Result<DMatrix<C64>> {
    let n = op.grid().len();
    if n > crate::linop::DENSE_CAP {
        return Err(Error::SizeCap { size: n, cap: crate::linop::DENSE_CAP });
    }
    let mut m = DMatrix::zeros(n, n);
    let mut e = vec![C64::new(0.0, 0.0); n];
    for j in 0..n {
        e[j] = C64::new(1.0, 0.0);
        m.column_mut(j).copy_from_slice(&op.apply(&e));
        e[j] = C64::new(0.0, 0.0);
    }
    Ok(m)
}

/// Deterministic complex Gaussian-ish start vector.
pub fn start_vector(n: usize, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let a = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
            let b = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
            C64::new(a, b)
        })
        .collect()
}

/// Power iteration on `B^* B`; `mask` optionally restricts the start vector support.
pub fn power_norm<T: Operator + ?Sized>(op: &T, max_iters: usize, tol: f64, mask: Option<&[bool]>) -> Result<f64> {
    let n = op.grid().len();
    let mut v = masked_start(n, mask);
    let nv = vec_norm(&v);
    if nv == 0.0 {
        return Ok(0.0);
    }
    v.iter_mut().for_each(|x| *x /= nv);
    let mut prev = f64::NAN;
    let mut sigma = 0.0;
    for _ in 0..max_iters {
        let w = op.apply(&v);
        sigma = vec_norm(&w);
        if sigma == 0.0 {
            return Ok(0.0);
        }
        let z = op.apply_adjoint(&w);
        let nz = vec_norm(&z);
        if nz == 0.0 {
            return Ok(sigma);
        }
        v = z.into_iter().map(|x| x / nz).collect();
        if (sigma - prev).abs() <= tol * sigma {
            return Ok(sigma);
        }
        prev = sigma;
    }
    Err(Error::NoConvergence { iters: max_iters, estimate: sigma })
}

fn masked_start(n: usize, mask: Option<&[bool]>) -> Vec<C64> {
    let mut v = start_vector(n, 0x5eed);
    if let Some(m) = mask {
        for (x, &keep) in v.iter_mut().zip(m) {
            if !keep {
                *x = C64::new(0.0, 0.0);
            }
        }
    }
    v
}

fn cdot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Largest singular value by restarted Lanczos on `B^* B` with full reorthogonalization.
/// Converges when the Ritz residual drops below `tol` (relative) or the top Ritz value stops
/// moving between restarts.
pub fn lanczos_norm<T: Operator + ?Sized>(op: &T, max_iters: usize, tol: f64, mask: Option<&[bool]>) -> Result<f64> {
    let n = op.grid().len();
    let m = n.min(48);
    let mut x = masked_start(n, mask);
    let nx = vec_norm(&x);
    if nx == 0.0 {
        return Ok(0.0);
    }
    x.iter_mut().for_each(|c| *c /= nx);
    let mut used = 0usize;
    let mut prev = f64::NAN;
    loop {
        let mut basis: Vec<Vec<C64>> = vec![x.clone()];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut tail = 0.0;
        let mut exhausted = false;
        for j in 0..m {
            let mut w = op.apply_adjoint(&op.apply(&basis[j]));
            used += 1;
            let a = cdot(&basis[j], &w).re;
            alpha.push(a);
            for _ in 0..2 {
                for v in &basis {
                    let c = cdot(v, &w);
                    w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= c * vi);
                }
            }
            let b = vec_norm(&w);
            tail = b;
            if b <= 1e-13 * a.abs().max(f64::MIN_POSITIVE) {
                exhausted = true;
                break;
            }
            if j + 1 == m || used >= max_iters {
                break;
            }
            beta.push(b);
            basis.push(w.into_iter().map(|c| c / b).collect());
        }
        let k = alpha.len();
        let t = DMatrix::<f64>::from_fn(k, k, |r, c| {
            if r == c {
                alpha[r]
            } else if r + 1 == c {
                beta[r]
            } else if c + 1 == r {
                beta[c]
            } else {
                0.0
            }
        });
        let eig = t.symmetric_eigen();
        let (top, theta) =
            eig.eigenvalues.iter().cloned().enumerate().fold((0, f64::MIN), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
        let theta = theta.max(0.0);
        if theta == 0.0 {
            return Ok(0.0);
        }
        let y = eig.eigenvectors.column(top);
        let resid = (tail * y[k - 1]).abs();
        let sigma = libm::sqrt(theta);
        if exhausted || resid <= tol * theta || (theta - prev).abs() <= 0.1 * tol * theta {
            return Ok(sigma);
        }
        if used >= max_iters {
            return Err(Error::NoConvergence { iters: used, estimate: sigma });
        }
        prev = theta;
        let mut next = vec![C64::new(0.0, 0.0); n];
        for (i, v) in basis.iter().enumerate().take(k) {
            let c = y[i];
            next.iter_mut().zip(v).for_each(|(a, b)| *a += b * c);
        }
        let nn = vec_norm(&next);
        x = next.into_iter().map(|c| c / nn).collect();
    }
}

/// Test-state map for form evaluations: keep nodes inside `|x_a| <= frac L`, then (optionally)
/// band-limit with a Gaussian momentum filter whose value at the Nyquist edge is
/// `exp(-edge_sigmas^2 / 2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TestWindow {
    pub frac: f64,
    pub edge_sigmas: Option<f64>,
}

impl TestWindow {
    /// Sharp position mask, no band filter.
    pub fn sharp(frac: f64) -> Self {
        TestWindow { frac, edge_sigmas: None }
    }

    /// Inner half window with a band filter vanishing to rounding level at the Nyquist edge.
    pub fn band_limited() -> Self {
        TestWindow { frac: 0.5, edge_sigmas: Some(8.6) }
    }

    pub fn map(&self, grid: &Grid) -> LinOp {
        let mask = grid.window_mask(self.frac);
        let d = LinOp::diagonal(grid, mask.iter().map(|&b| C64::new(if b { 1.0 } else { 0.0 }, 0.0)).collect());
        match self.edge_sigmas {
            None => d,
            Some(e) => {
                let sigma = grid.k_max() / e;
                let f = LinOp::multiplier_fn(grid, |k| C64::new(libm::exp(-sq(k) / (2.0 * sigma * sigma)), 0.0));
                f.mul(&d)
            }
        }
    }
}

impl Default for TestWindow {
    fn default() -> Self {
        Self::band_limited()
    }
}

/// `||P^* X P||` with `P` the test-state map of `window`.
pub fn form_norm<T: Operator + ?Sized>(x: &T, window: &TestWindow, method: NormMethod) -> Result<f64> {
    let p = window.map(x.grid());
    let sandwich = Sandwich { p: &p, x };
    operator_norm(&sandwich, method)
}

/// Dense version of [`form_norm`] for a materialized matrix.
pub fn dense_form_norm(grid: &Grid, x: &DMatrix<C64>, window: &TestWindow) -> Result<f64> {
    let p = window.map(grid).to_dense()?;
    Ok(dense_norm(&(p.adjoint() * x * &p)))
}

struct Sandwich<'a, T: Operator + ?Sized> {
    p: &'a LinOp,
    x: &'a T,
}

impl<T: Operator + ?Sized> Operator for Sandwich<'_, T> {
    fn grid(&self) -> &Grid {
        self.p.grid()
    }
    fn apply(&self, f: &[C64]) -> Vec<C64> {
        self.p.adjoint_vec(&self.x.apply(&self.p.apply_vec(f)))
    }
    fn apply_adjoint(&self, f: &[C64]) -> Vec<C64> {
        self.p.adjoint_vec(&self.x.apply_adjoint(&self.p.apply_vec(f)))
    }
}
