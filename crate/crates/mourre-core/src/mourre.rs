//! Mourre windows and constants: the multiplier infimum of `2k.u(k)` over an energy shell,
//! spectral projections of the discretized `H`, and the compression `E(I) [H, iA] E(I)`.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::conjugate::{assemble_a_symmetric, laplacian_commutator, VectorField};
use crate::error::{Error, Result};
use crate::hamiltonian::{Hamiltonian, Spectrum};
use crate::lattice::Grid;
use crate::linop::LinOp;
use crate::C64;

/// Symbol subsampling factor per axis (64x total density in every dimension).
fn refinement(dim: usize) -> usize {
    match dim {
        1 => 64,
        2 => 8,
        _ => 4,
    }
}

fn check_interval(grid: &Grid, interval: (f64, f64)) -> Result<()> {
    let (lo, hi) = interval;
    if !(lo <= hi) || lo < 0.0 {
        return Err(Error::InvalidParameter(format!("energy interval must satisfy 0 <= lo <= hi, got [{lo}, {hi}]")));
    }
    let top = grid.k_max() * grid.k_max();
    if hi > top {
        return Err(Error::InvalidParameter(format!("interval end {hi} exceeds the resolved range {top}")));
    }
    Ok(())
}

fn symbol(u: &VectorField, k: &[f64]) -> f64 {
    let v = u.eval(k);
    2.0 * k.iter().enumerate().map(|(j, kj)| kj * v[j]).sum::<f64>()
}

/// `inf { 2k.u(k) : |k|^2 in interval }` over the momentum lattice refined `64x`, plus the shell
/// endpoints on each axis.
pub fn window_inf(grid: &Grid, u: &VectorField, interval: (f64, f64)) -> Result<f64> {
    check_interval(grid, interval)?;
    let (lo, hi) = interval;
    let dim = grid.dim();
    let r = refinement(dim);
    let dk = grid.momentum_spacing() / r as f64;
    let kmax = grid.k_max();
    let m = (2.0 * kmax / dk) as usize;
    let kr = libm::sqrt(hi);
    let mut best = f64::INFINITY;
    let mut idx = [0usize; 3];
    // only the cube of half-width sqrt(hi) can meet the shell
    let first = libm::floor((kmax - kr) / dk).max(0.0) as usize;
    let last = (libm::ceil((kmax + kr) / dk) as usize).min(m - 1);
    loop {
        let mut k = [0.0; 3];
        for a in 0..dim {
            k[a] = -kmax + idx[a] as f64 * dk;
        }
        let k2: f64 = k[..dim].iter().map(|x| x * x).sum();
        if k2 >= lo && k2 <= hi {
            best = best.min(symbol(u, &k[..dim]));
        }
        // odometer over [first, last]^dim
        let mut a = 0;
        loop {
            if a == dim {
                break;
            }
            if idx[a] < first {
                idx[a] = first;
            }
            idx[a] += 1;
            if idx[a] <= last {
                break;
            }
            idx[a] = first;
            a += 1;
        }
        if a == dim {
            break;
        }
    }
    for a in 0..dim {
        for s in [libm::sqrt(lo), kr, -libm::sqrt(lo), -kr] {
            let mut k = [0.0; 3];
            k[a] = s;
            best = best.min(symbol(u, &k[..dim]));
        }
    }
    if !best.is_finite() {
        return Err(Error::EmptyShell { lo, hi });
    }
    Ok(best)
}

/// Infimum of `2k.u(k)` over the lattice momentum nodes in the shell.
pub fn node_inf(grid: &Grid, u: &VectorField, interval: (f64, f64)) -> Result<f64> {
    check_interval(grid, interval)?;
    let (lo, hi) = interval;
    let nu = grid.dim();
    let best = (0..grid.len())
        .map(|i| grid.momentum(i))
        .filter(|k| {
            let k2: f64 = k[..nu].iter().map(|x| x * x).sum();
            k2 >= lo && k2 <= hi
        })
        .map(|k| symbol(u, &k[..nu]))
        .fold(f64::INFINITY, f64::min);
    if best.is_finite() {
        Ok(best)
    } else {
        Err(Error::EmptyShell { lo, hi })
    }
}

/// Nakamura's window `(0, pi^2 / a^2)`.
pub fn nakamura_window(a: f64) -> Result<(f64, f64)> {
    if !(a > 0.0) {
        return Err(Error::InvalidParameter(format!("window needs a > 0, got {a}")));
    }
    Ok((0.0, core::f64::consts::PI * core::f64::consts::PI / (a * a)))
}

/// `E(I)` as a dense operator.
pub fn spectral_projection(spectrum: &Spectrum, interval: (f64, f64)) -> LinOp {
    let e = spectrum.basis_complex(interval.0, interval.1);
    LinOp::dense(&spectrum.grid, &e * e.adjoint())
}

/// An eigenvalue of `H` with its spread score.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EigenInfo {
    pub value: f64,
    pub localization: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MourreCertificate {
    pub interval: (f64, f64),
    /// Infimum of `2k.u(k)` over the lattice nodes of the shell.
    pub c0_multiplier: f64,
    /// The same infimum over the refined symbol scan.
    pub window_inf: f64,
    /// Ascending eigenvalues of `E(I) i[H, A] E(I)` on `ran E(I)`.
    pub compression_spectrum: Vec<f64>,
    /// Eigenvalues below `c0_multiplier - defect_tol`.
    pub defect_count: usize,
    pub defect_tol: f64,
    pub eigenvalues_of_h_in_i: Vec<EigenInfo>,
    /// Largest entry of the anti-Hermitian part before symmetrization.
    pub hermitian_drift: f64,
}

impl MourreCertificate {
    pub fn bottom(&self) -> Option<f64> {
        self.compression_spectrum.first().copied()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MourreOptions {
    /// Defect threshold as a fraction of `c0_multiplier`.
    pub defect_frac: f64,
}

impl Default for MourreOptions {
    fn default() -> Self {
        MourreOptions { defect_frac: 0.5 }
    }
}

/// The commutator `i[H, A_u]`: the exact multiplier `2p.u(p)` for the Laplacian plus the lattice
/// commutator of `V` with the symmetrized `A_u`.
pub fn formal_commutator(h: &Hamiltonian, u: &VectorField) -> LinOp {
    let g = &h.grid;
    let v = h.potential_op();
    let a = assemble_a_symmetric(g, u);
    let iva = v.commutator(&a).scale(C64::new(0.0, 1.0));
    laplacian_commutator(g, u).add(&iva)
}

/// Compress `i[H, A_u]` onto `ran E(I)` and count defect eigenvalues.
pub fn mourre_constant(
    h: &Hamiltonian,
    spectrum: &Spectrum,
    u: &VectorField,
    interval: (f64, f64),
    opts: &MourreOptions,
) -> Result<MourreCertificate> {
    let g = &h.grid;
    let c0 = node_inf(g, u, interval)?;
    let winf = window_inf(g, u, interval)?;
    let e = spectrum.basis_complex(interval.0, interval.1);
    let idx = spectrum.indices_in(interval.0, interval.1);
    let infos: Vec<EigenInfo> =
        idx.iter().map(|&j| EigenInfo { value: spectrum.values[j], localization: spectrum.localization(j) }).collect();
    let tol = opts.defect_frac * libm::fabs(c0);
    if e.ncols() == 0 {
        return Ok(MourreCertificate {
            interval,
            c0_multiplier: c0,
            window_inf: winf,
            compression_spectrum: Vec::new(),
            defect_count: 0,
            defect_tol: tol,
            eigenvalues_of_h_in_i: infos,
            hermitian_drift: 0.0,
        });
    }
    let c = formal_commutator(h, u).to_dense()?;
    let m: DMatrix<C64> = e.adjoint() * c * &e;
    let drift = (&m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    if drift > 1e-8 * scale {
        return Err(Error::NotHermitian(drift));
    }
    let herm = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut spec: Vec<f64> = herm.symmetric_eigenvalues().iter().cloned().collect();
    spec.sort_by(f64::total_cmp);
    let defect_count = spec.iter().filter(|x| **x < c0 - tol).count();
    Ok(MourreCertificate {
        interval,
        c0_multiplier: c0,
        window_inf: winf,
        compression_spectrum: spec,
        defect_count,
        defect_tol: tol,
        eigenvalues_of_h_in_i: infos,
        hermitian_drift: drift,
    })
}
