//! Wave-operator traces `Omega(t) psi = e^{itK} e^{-itH} psi` by spectral calculus on cached dense
//! eigendecompositions, with Cook integrands and Cauchy increments along a time schedule.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hamiltonian::{Hamiltonian, Spectrum};
use crate::lattice::{vec_norm, Grid};
use crate::linop::LinOp;
use crate::report::{loglog_fit, LineFit};
use crate::C64;

/// Default spread-score threshold for the continuity subspace.
pub const CONTINUITY_THRESHOLD: f64 = 0.05;

fn split(psi: &[C64]) -> (DVector<f64>, DVector<f64>) {
    (DVector::from_iterator(psi.len(), psi.iter().map(|z| z.re)), DVector::from_iterator(psi.len(), psi.iter().map(|z| z.im)))
}

/// Coefficients `U^T psi` in the eigenbasis.
fn coefficients(spec: &Spectrum, psi: &[C64]) -> Vec<C64> {
    let (re, im) = split(psi);
    let a = spec.vectors.tr_mul(&re);
    let b = spec.vectors.tr_mul(&im);
    a.iter().zip(b.iter()).map(|(x, y)| C64::new(*x, *y)).collect()
}

fn synthesize(spec: &Spectrum, c: &[C64]) -> Vec<C64> {
    let (re, im) = split(c);
    let a = &spec.vectors * re;
    let b = &spec.vectors * im;
    a.iter().zip(b.iter()).map(|(x, y)| C64::new(*x, *y)).collect()
}

fn check_len(spec: &Spectrum, psi: &[C64]) -> Result<()> {
    if psi.len() != spec.values.len() {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// `e^{-itH} psi`.
pub fn propagate(spec: &Spectrum, psi: &[C64], t: f64) -> Result<Vec<C64>> {
    check_len(spec, psi)?;
    let mut c = coefficients(spec, psi);
    for (cj, lam) in c.iter_mut().zip(&spec.values) {
        *cj *= C64::new(libm::cos(t * lam), -libm::sin(t * lam));
    }
    Ok(synthesize(spec, &c))
}

fn continuity_mask(spec: &Spectrum, threshold: f64) -> Vec<bool> {
    (0..spec.values.len()).map(|j| threshold <= 0.0 || spec.localization(j) > threshold).collect()
}

/// Projection onto eigenvectors whose spread score exceeds `threshold`.
pub fn continuity_projector(spec: &Spectrum, threshold: f64) -> LinOp {
    let keep = continuity_mask(spec, threshold);
    let cols: Vec<usize> = (0..keep.len()).filter(|&j| keep[j]).collect();
    let n = spec.vectors.nrows();
    let u = DMatrix::from_fn(n, cols.len(), |r, c| spec.vectors[(r, cols[c])]);
    let p = &u * u.transpose();
    LinOp::dense(&spec.grid, p.map(|x| C64::new(x, 0.0)))
}

/// `E_H^c psi` without forming the projector.
pub fn continuity_apply(spec: &Spectrum, threshold: f64, psi: &[C64]) -> Result<Vec<C64>> {
    check_len(spec, psi)?;
    let keep = continuity_mask(spec, threshold);
    let mut c = coefficients(spec, psi);
    c.iter_mut().zip(&keep).filter(|(_, k)| !**k).for_each(|(cj, _)| *cj = C64::new(0.0, 0.0));
    Ok(synthesize(spec, &c))
}

/// Gaussian packet `exp(i k0 x - (x - x0)^2 / (2 width^2))` in 1D, unit in the node sum.
pub fn wave_packet(grid: &Grid, x0: f64, k0: f64, width: f64) -> Vec<C64> {
    let f = grid.sample(|x| {
        let d = x[0] - x0;
        C64::from_polar(libm::exp(-d * d / (2.0 * width * width)), k0 * x[0])
    });
    let n = vec_norm(&f);
    f.into_iter().map(|z| z / n).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum ScatterVerdict {
    Convergent,
    Inconclusive,
    Divergent,
}

impl ScatterVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScatterVerdict::Convergent => "convergent",
            ScatterVerdict::Inconclusive => "inconclusive",
            ScatterVerdict::Divergent => "divergent",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TraceOptions {
    /// Spread-score threshold for `E_H^c`.
    pub threshold: f64,
    /// The boundary band is `|x_a| > boundary_frac * L/2`.
    pub boundary_frac: f64,
    /// Mass in the boundary band that stops the trace.
    pub boundary_tol: f64,
    /// Momentum support of the packet: modes above this fraction of the peak density.
    pub support_frac: f64,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions { threshold: CONTINUITY_THRESHOLD, boundary_frac: 0.9, boundary_tol: 1e-6, support_frac: 1e-3 }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WaveOpTrace {
    pub times: Vec<f64>,
    pub omega_states: Vec<Vec<C64>>,
    /// `|Omega(t_{j+1}) psi - Omega(t_j) psi|`, one shorter than `times`.
    pub cauchy_increments: Vec<f64>,
    /// `|S e^{-itH} psi|`.
    pub cook_integrand: Vec<f64>,
    /// `| |Omega(t) psi| - |psi| | / |psi|`.
    pub norm_drift: Vec<f64>,
    /// `L / (2 v_min)` from the packet's momentum support.
    pub t_box: f64,
    /// First schedule time that was cut, when the horizon or the boundary band intervened.
    pub truncated_at: Option<f64>,
    pub cook_fit: Option<LineFit>,
    pub cauchy_fit: Option<LineFit>,
    pub verdict: ScatterVerdict,
}

fn boundary_mass(grid: &Grid, f: &[C64], frac: f64) -> f64 {
    let mask = grid.window_mask(frac);
    let total: f64 = f.iter().map(|z| z.norm_sqr()).sum();
    let out: f64 = f.iter().zip(&mask).filter(|(_, m)| !**m).map(|(z, _)| z.norm_sqr()).sum();
    if total == 0.0 {
        0.0
    } else {
        out / total
    }
}

fn transit_time(grid: &Grid, psi: &[C64], frac: f64) -> f64 {
    let hat = grid.forward(psi);
    let peak = hat.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
    let vmin = (0..hat.len())
        .filter(|&i| hat[i].norm_sqr() >= frac * peak)
        .map(|i| 2.0 * libm::sqrt(grid.momentum(i).iter().map(|k| k * k).sum::<f64>()))
        .fold(f64::INFINITY, f64::min);
    if vmin > 0.0 {
        2.0 * grid.half_width() / (2.0 * vmin)
    } else {
        f64::INFINITY
    }
}

/// Log-log fit over the upper half (in `log |t|`) of the positive entries.
fn tail_fit(t: &[f64], y: &[f64]) -> Option<LineFit> {
    let pts: Vec<(f64, f64)> = t.iter().zip(y).filter(|(a, b)| **a > 0.0 && **b > 0.0).map(|(a, b)| (*a, *b)).collect();
    if pts.len() < 3 {
        return None;
    }
    let (lo, hi) = (libm::log(pts[0].0), libm::log(pts[pts.len() - 1].0));
    let mid = libm::exp(0.5 * (lo + hi));
    let tail: Vec<(f64, f64)> = pts.into_iter().filter(|p| p.0 >= mid * (1.0 - 1e-12)).collect();
    if tail.len() < 3 {
        return None;
    }
    let x: Vec<f64> = tail.iter().map(|p| p.0).collect();
    let y: Vec<f64> = tail.iter().map(|p| p.1).collect();
    loglog_fit(&x, &y)
}

/// Trace `Omega(t) psi` for `K = H + S` over a schedule ordered by `|t|` (negative times probe
/// `Omega_-`). `psi` is first projected onto `E_H^c`.
pub fn wave_operator_trace(
    h: &Hamiltonian,
    h_spec: &Spectrum,
    k: &Hamiltonian,
    k_spec: &Spectrum,
    psi: &[C64],
    times: &[f64],
    opts: &TraceOptions,
) -> Result<WaveOpTrace> {
    if h.grid != k.grid || h_spec.grid != h.grid || k_spec.grid != k.grid {
        return Err(Error::GridMismatch);
    }
    let g = &h.grid;
    let psi = continuity_apply(h_spec, opts.threshold, psi)?;
    let p0 = vec_norm(&psi);
    let s: Vec<f64> = k.potential.iter().zip(&h.potential).map(|(a, b)| a - b).collect();
    let t_box = transit_time(g, &psi, opts.support_frac);
    let mut kept = Vec::new();
    let mut states = Vec::new();
    let mut cook = Vec::new();
    let mut drift = Vec::new();
    let mut truncated_at = None;
    for &t in times {
        if libm::fabs(t) > t_box {
            truncated_at = Some(t);
            break;
        }
        let phi = propagate(h_spec, &psi, t)?;
        if boundary_mass(g, &phi, opts.boundary_frac) > opts.boundary_tol {
            truncated_at = Some(t);
            break;
        }
        let omega = propagate(k_spec, &phi, -t)?;
        let sphi: Vec<C64> = phi.iter().zip(&s).map(|(z, v)| z * v).collect();
        cook.push(vec_norm(&sphi));
        drift.push(if p0 > 0.0 { libm::fabs(vec_norm(&omega) - p0) / p0 } else { 0.0 });
        kept.push(t);
        states.push(omega);
    }
    let increments: Vec<f64> = states
        .windows(2)
        .map(|w| vec_norm(&w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect::<Vec<_>>()))
        .collect();
    let abs_t: Vec<f64> = kept.iter().map(|t| libm::fabs(*t)).collect();
    let cook_fit = tail_fit(&abs_t, &cook);
    let cauchy_fit = if abs_t.len() >= 2 { tail_fit(&abs_t[1..], &increments) } else { None };
    let scale = p0.max(f64::MIN_POSITIVE);
    let silent = cook.iter().all(|c| *c <= 1e-14 * scale) && increments.iter().all(|c| *c <= 1e-12 * scale);
    let verdict = if silent && kept.len() >= 2 {
        ScatterVerdict::Convergent
    } else {
        match (cook_fit, cauchy_fit) {
            (Some(c), Some(d)) if c.slope < -1.0 && d.slope < -1.0 => ScatterVerdict::Convergent,
            (Some(c), _) if c.ci_lo >= -1.0 => ScatterVerdict::Divergent,
            (_, Some(d)) if d.ci_lo >= -1.0 => ScatterVerdict::Divergent,
            _ => ScatterVerdict::Inconclusive,
        }
    };
    Ok(WaveOpTrace {
        times: kept,
        omega_states: states,
        cauchy_increments: increments,
        cook_integrand: cook,
        norm_drift: drift,
        t_box,
        truncated_at,
        cook_fit,
        cauchy_fit,
        verdict,
    })
}

/// `|(e^{-i tau K} Omega(T) - Omega(T) e^{-i tau H}) psi|`.
pub fn intertwining_defect(h_spec: &Spectrum, k_spec: &Spectrum, psi: &[C64], t: f64, tau: f64) -> Result<f64> {
    let omega = propagate(k_spec, &propagate(h_spec, psi, t)?, -t)?;
    let left = propagate(k_spec, &omega, tau)?;
    let right = propagate(k_spec, &propagate(h_spec, psi, t + tau)?, -t)?;
    let d: Vec<C64> = left.iter().zip(&right).map(|(a, b)| a - b).collect();
    Ok(vec_norm(&d))
}

/// `Omega(t) psi` at a single time.
pub fn omega_state(h_spec: &Spectrum, k_spec: &Spectrum, psi: &[C64], t: f64) -> Result<Vec<C64>> {
    propagate(k_spec, &propagate(h_spec, psi, t)?, -t)
}

/// Geometric schedule `t0 * r^j` up to `t1` inclusive.
pub fn geometric_times(t0: f64, t1: f64, points: usize) -> Vec<f64> {
    if points < 2 {
        return vec![t0];
    }
    let r = libm::pow(t1 / t0, 1.0 / (points - 1) as f64);
    (0..points).map(|j| t0 * libm::pow(r, j as f64)).collect()
}
