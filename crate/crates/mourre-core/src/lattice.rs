//! Periodic sampling lattice, grid functions and the continuum-normalized Fourier transform.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fft::{fft_nd, FftPlan};
use crate::C64;

/// Cube `[-L, L)^dim` sampled at `n` points per axis, `x_m = -L + offset + m h`.
#[derive(Clone, Debug)]
pub struct Grid {
    dim: usize,
    n: usize,
    half_width: f64,
    offset: f64,
    plan: Arc<FftPlan>,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.n == other.n
            && self.half_width.to_bits() == other.half_width.to_bits()
            && self.offset.to_bits() == other.offset.to_bits()
    }
}

impl Grid {
    pub fn new(dim: usize, n: usize, half_width: f64, offset: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::BadDimension(dim));
        }
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(n));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::InvalidParameter(format!("half width must be positive, got {half_width}")));
        }
        let h = 2.0 * half_width / n as f64;
        if !(0.0..h).contains(&offset) {
            return Err(Error::InvalidParameter(format!("offset {offset} outside [0, {h})")));
        }
        Ok(Grid { dim, n, half_width, offset, plan: Arc::new(FftPlan::new(n)) })
    }

    /// Half-spacing offset, so no node sits at the origin.
    pub fn centered(dim: usize, n: usize, half_width: f64) -> Result<Self> {
        Self::new(dim, n, half_width, half_width / n as f64)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn momentum_spacing(&self) -> f64 {
        PI / self.half_width
    }

    /// Largest resolved momentum `pi / h`.
    pub fn k_max(&self) -> f64 {
        PI / self.spacing()
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight `h^dim`.
    pub fn weight(&self) -> f64 {
        libm::pow(self.spacing(), self.dim as f64)
    }

    pub fn signature(&self) -> String {
        format!("dim={};n={};L={:?};offset={:?}", self.dim, self.n, self.half_width, self.offset)
    }

    /// Node coordinates along one axis.
    pub fn axis_positions(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.n).map(|m| -self.half_width + self.offset + m as f64 * h).collect()
    }

    /// Signed integer label of storage slot `j`: `j` below `n/2`, else `j - n`.
    pub fn signed_mode(&self, j: usize) -> i64 {
        if j < self.n / 2 {
            j as i64
        } else {
            j as i64 - self.n as i64
        }
    }

    /// Momentum nodes along one axis in storage (FFT) order.
    pub fn axis_momenta(&self) -> Vec<f64> {
        let dk = self.momentum_spacing();
        (0..self.n).map(|j| self.signed_mode(j) as f64 * dk).collect()
    }

    pub fn multi_index(&self, i: usize) -> [usize; 3] {
        let mut out = [0usize; 3];
        let mut rest = i;
        for slot in out.iter_mut().take(self.dim) {
            *slot = rest % self.n;
            rest /= self.n;
        }
        out
    }

    pub fn flat_index(&self, m: [usize; 3]) -> usize {
        (0..self.dim).rev().fold(0, |acc, a| acc * self.n + m[a])
    }

    pub fn position(&self, i: usize) -> [f64; 3] {
        let h = self.spacing();
        let m = self.multi_index(i);
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = -self.half_width + self.offset + m[a] as f64 * h;
        }
        x
    }

    pub fn coord(&self, i: usize, axis: usize) -> f64 {
        self.position(i)[axis]
    }

    pub fn radius(&self, i: usize) -> f64 {
        let x = self.position(i);
        libm::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])
    }

    pub fn momentum(&self, i: usize) -> [f64; 3] {
        let dk = self.momentum_spacing();
        let m = self.multi_index(i);
        let mut k = [0.0; 3];
        for a in 0..self.dim {
            k[a] = self.signed_mode(m[a]) as f64 * dk;
        }
        k
    }

    /// All position nodes, flattened.
    pub fn positions(&self) -> Vec<[f64; 3]> {
        (0..self.len()).map(|i| self.position(i)).collect()
    }

    /// All momentum nodes in storage order.
    pub fn momenta(&self) -> Vec<[f64; 3]> {
        (0..self.len()).map(|i| self.momentum(i)).collect()
    }

    /// Sample `f(x)` at every position node.
    pub fn sample<F: Fn(&[f64]) -> C64>(&self, f: F) -> Vec<C64> {
        (0..self.len()).map(|i| f(&self.position(i)[..self.dim])).collect()
    }

    /// Sample `m(k)` at every momentum node (storage order).
    pub fn sample_symbol<F: Fn(&[f64]) -> C64>(&self, m: F) -> Vec<C64> {
        (0..self.len()).map(|i| m(&self.momentum(i)[..self.dim])).collect()
    }

    /// Unnormalized DFT over all axes.
    pub fn raw_fft(&self, data: &mut [C64], inverse: bool) {
        fft_nd(&self.plan, self.dim, data, inverse);
    }

    /// Apply a multiplier given by its symbol samples: `F^-1 m F f`.
    pub fn apply_symbol(&self, symbol: &[C64], f: &[C64]) -> Vec<C64> {
        let mut buf = f.to_vec();
        self.raw_fft(&mut buf, false);
        let scale = 1.0 / self.len() as f64;
        for (b, m) in buf.iter_mut().zip(symbol) {
            *b *= m * scale;
        }
        self.raw_fft(&mut buf, true);
        buf
    }

    fn phase(&self, i: usize, sign: f64) -> C64 {
        let x0 = -self.half_width + self.offset;
        let k = self.momentum(i);
        let t = sign * x0 * (k[0] + k[1] + k[2]);
        C64::new(libm::cos(t), libm::sin(t))
    }

    /// Continuum-normalized transform `(2 pi)^{-dim/2} \int e^{-ik.x} f(x) dx`, storage order.
    pub fn forward(&self, f: &[C64]) -> Vec<C64> {
        let mut buf = f.to_vec();
        self.raw_fft(&mut buf, false);
        let c = libm::pow(self.spacing() / libm::sqrt(2.0 * PI), self.dim as f64);
        for (i, b) in buf.iter_mut().enumerate() {
            *b *= self.phase(i, -1.0) * c;
        }
        buf
    }

    /// Inverse of [`Grid::forward`].
    pub fn inverse(&self, fhat: &[C64]) -> Vec<C64> {
        let c = libm::pow(self.momentum_spacing() / libm::sqrt(2.0 * PI), self.dim as f64);
        let mut buf: Vec<C64> = fhat.iter().enumerate().map(|(i, v)| v * self.phase(i, 1.0) * c).collect();
        self.raw_fft(&mut buf, true);
        buf
    }

    /// Nodes with every coordinate inside `|x_a| <= frac * L`.
    pub fn window_mask(&self, frac: f64) -> Vec<bool> {
        let lim = frac * self.half_width;
        (0..self.len())
            .map(|i| {
                let x = self.position(i);
                (0..self.dim).all(|a| libm::fabs(x[a]) <= lim + 1e-12)
            })
            .collect()
    }
}

/// Complex samples on a grid, with quadrature-weighted inner product.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    pub grid: Grid,
    pub values: Vec<C64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn zeros(grid: &Grid) -> Self {
        GridFunction { grid: grid.clone(), values: alloc::vec![C64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_fn<F: Fn(&[f64]) -> C64>(grid: &Grid, f: F) -> Self {
        GridFunction { grid: grid.clone(), values: grid.sample(f) }
    }

    pub fn from_real<F: Fn(&[f64]) -> f64>(grid: &Grid, f: F) -> Self {
        Self::from_fn(grid, |x| C64::new(f(x), 0.0))
    }

    pub fn inner(&self, other: &GridFunction) -> C64 {
        inner(&self.grid, &self.values, &other.values)
    }

    pub fn norm(&self) -> f64 {
        norm(&self.grid, &self.values)
    }

    /// Momentum-side samples, storage order.
    pub fn transform(&self) -> Vec<C64> {
        self.grid.forward(&self.values)
    }

    /// Norm of the momentum samples with weight `(pi/L)^dim`.
    pub fn momentum_norm(&self) -> f64 {
        let w = libm::pow(self.grid.momentum_spacing(), self.grid.dim() as f64);
        libm::sqrt(self.transform().iter().map(|v| v.norm_sqr()).sum::<f64>() * w)
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }
}

/// `h^dim sum conj(f) g`.
pub fn inner(grid: &Grid, f: &[C64], g: &[C64]) -> C64 {
    f.iter().zip(g).map(|(a, b)| a.conj() * b).sum::<C64>() * grid.weight()
}

pub fn norm(grid: &Grid, f: &[C64]) -> f64 {
    libm::sqrt(f.iter().map(|v| v.norm_sqr()).sum::<f64>() * grid.weight())
}

/// Plain Euclidean norm of node values.
pub fn vec_norm(f: &[C64]) -> f64 {
    libm::sqrt(f.iter().map(|v| v.norm_sqr()).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn make_grid_examples() {
        let g = Grid::new(1, 8, PI, 0.0).unwrap();
        let x = g.axis_positions();
        assert!((x[0] + PI).abs() < 1e-15 && (x[7] - 0.75 * PI).abs() < 1e-15);
        let mut k = g.axis_momenta();
        k.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(k, (-4..4).map(|n| n as f64).collect::<Vec<_>>());

        let g = Grid::centered(1, 256, 40.0).unwrap();
        assert!(g.axis_positions().iter().all(|&x| x != 0.0));

        let g = Grid::new(2, 32, 20.0, 0.0).unwrap();
        assert_eq!(g.len(), 1024);
        assert!((g.momentum_spacing() - PI / 20.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert_eq!(Grid::new(1, 12, 1.0, 0.0), Err(Error::NotPowerOfTwo(12)));
        assert_eq!(Grid::new(4, 8, 1.0, 0.0), Err(Error::BadDimension(4)));
        assert_eq!(Grid::new(0, 8, 1.0, 0.0), Err(Error::BadDimension(0)));
    }

    #[test]
    fn gaussian_transform_is_gaussian() {
        let g = Grid::centered(1, 128, 20.0).unwrap();
        let f = GridFunction::from_real(&g, |x| libm::exp(-x[0] * x[0] / 2.0));
        let fh = f.transform();
        for (i, v) in fh.iter().enumerate() {
            let k = g.momentum(i)[0];
            assert!((v - C64::new(libm::exp(-k * k / 2.0), 0.0)).norm() < 1e-12);
        }
    }
}
