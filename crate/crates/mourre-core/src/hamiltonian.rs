//! The discretized Schrodinger operator `H = Delta + V` and its dense eigendecomposition.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lattice::{Grid, GridFunction};
use crate::linop::{LinOp, DENSE_CAP};
use crate::norms::laplacian;
use crate::C64;

/// `Delta + V` with `V` a real potential sampled at the nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct Hamiltonian {
    pub grid: Grid,
    pub potential: Vec<f64>,
}

impl Hamiltonian {
    pub fn free(grid: &Grid) -> Self {
        Hamiltonian { grid: grid.clone(), potential: alloc::vec![0.0; grid.len()] }
    }

    pub fn new(v: &GridFunction) -> Self {
        Hamiltonian { grid: v.grid.clone(), potential: v.real_parts() }
    }

    pub fn potential_op(&self) -> LinOp {
        LinOp::diagonal_real(&self.grid, &self.potential)
    }

    pub fn op(&self) -> LinOp {
        laplacian(&self.grid).add(&self.potential_op())
    }

    /// Dense real symmetric matrix of `H`. The lattice Laplacian has an even symbol, so its
    /// position matrix is real; the imaginary residue is checked.
    pub fn dense(&self) -> Result<DMatrix<f64>> {
        let n = self.grid.len();
        if n > DENSE_CAP {
            return Err(Error::SizeCap { size: n, cap: DENSE_CAP });
        }
        let c = laplacian(&self.grid).to_dense()?;
        let scale = c.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
        let imag = c.iter().map(|z| libm::fabs(z.im)).fold(0.0, f64::max);
        let mut m = c.map(|z| z.re);
        let asym = (&m - m.transpose()).iter().map(|x| libm::fabs(*x)).fold(0.0, f64::max);
        let drift = imag.max(asym);
        if drift > 1e-8 * scale {
            return Err(Error::NotHermitian(drift));
        }
        m = (&m + m.transpose()) * 0.5;
        for (i, v) in self.potential.iter().enumerate() {
            m[(i, i)] += v;
        }
        Ok(m)
    }

    /// Full eigendecomposition, eigenvalues ascending.
    pub fn spectrum(&self) -> Result<Spectrum> {
        let d = self.dense()?;
        let n = d.nrows();
        // faer's blocked tridiagonalization is several times faster than nalgebra's at N >= 1024
        let m = faer::Mat::<f64>::from_fn(n, n, |r, c| d[(r, c)]);
        drop(d);
        let eig = m.selfadjoint_eigendecomposition(faer::Side::Lower);
        let s = eig.s().column_vector();
        let u = eig.u();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|a, b| s.read(*a).total_cmp(&s.read(*b)));
        let values = order.iter().map(|&i| s.read(i)).collect();
        let vectors = DMatrix::from_fn(n, n, |r, c| u.read(r, order[c]));
        Ok(Spectrum { grid: self.grid.clone(), values, vectors })
    }
}

/// Eigenpairs of a dense `H`; column `j` of `vectors` is the unit (in the node sum) eigenvector of
/// `values[j]`.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl Spectrum {
    /// Indices of eigenvalues in the closed interval (with a relative slack of `1e-12`).
    pub fn indices_in(&self, lo: f64, hi: f64) -> Vec<usize> {
        let slack = 1e-12 * lo.abs().max(hi.abs()).max(1.0);
        (0..self.values.len()).filter(|&i| self.values[i] >= lo - slack && self.values[i] <= hi + slack).collect()
    }

    /// Columns spanning the spectral subspace of `[lo, hi]`.
    pub fn basis(&self, lo: f64, hi: f64) -> DMatrix<f64> {
        let idx = self.indices_in(lo, hi);
        DMatrix::from_fn(self.vectors.nrows(), idx.len(), |r, c| self.vectors[(r, idx[c])])
    }

    /// Spread score `<phi, <q>^2 phi> / L^2` of a normalized eigenvector, `L` the box length: about
    /// `dim / 12` for plane waves, about `1 / L^2` for bound states.
    pub fn localization(&self, j: usize) -> f64 {
        let col = self.vectors.column(j);
        let total: f64 = col.iter().map(|x| x * x).sum();
        if total == 0.0 {
            return 0.0;
        }
        let l = 2.0 * self.grid.half_width();
        let spread: f64 = col.iter().enumerate().map(|(i, x)| x * x * (1.0 + self.grid.radius(i) * self.grid.radius(i))).sum();
        spread / (total * l * l)
    }

    /// Median gap between level clusters within `window` of `lambda`. Levels closer than a quarter
    /// of the mean gap are merged first: the `+-k` pairs of the free operator, and the small
    /// splittings a short-range potential puts into them.
    pub fn local_spacing(&self, lambda: f64, window: f64) -> Option<f64> {
        let mut near: Vec<f64> = self.values.iter().cloned().filter(|v| libm::fabs(v - lambda) <= window).collect();
        if near.len() < 3 {
            return None;
        }
        let mean = (near[near.len() - 1] - near[0]) / (near.len() - 1) as f64;
        near.dedup_by(|a, b| libm::fabs(*a - *b) < 0.25 * mean);
        if near.len() < 2 {
            return None;
        }
        let mut gaps: Vec<f64> = near.windows(2).map(|w| w[1] - w[0]).collect();
        gaps.sort_by(f64::total_cmp);
        Some(gaps[gaps.len() / 2])
    }

    /// Complex copy of the basis, for products with complex operators.
    pub fn basis_complex(&self, lo: f64, hi: f64) -> DMatrix<C64> {
        self.basis(lo, hi).map(|x| C64::new(x, 0.0))
    }
}
