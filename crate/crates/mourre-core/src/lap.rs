//! Limiting absorption probes: weighted resolvent norms `<p><q>^{-s} R(z) <q>^{-s}<p>` along
//! `mu -> 0`, with the box level spacing as the floor below which a finite matrix says nothing.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::cell::Cell;

use crate::error::{Error, Result};
use crate::hamiltonian::{Hamiltonian, Spectrum};
use crate::lattice::{vec_norm, Grid};
use crate::linop::Operator;
use crate::norms::{operator_norm, NormMethod, Weighted};
use crate::report::{line_fit, loglog_fit, LineFit, SweepRecord};
use crate::C64;

/// Smallest accepted `|mu|`.
pub const MU_MIN: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LapOptions {
    /// Relative true residual required of every solve.
    pub solve_tol: f64,
    /// Krylov dimension between restarts.
    pub restart: usize,
    /// Total GMRES steps per solve.
    pub max_iters: usize,
    pub norm: NormMethod,
}

impl Default for LapOptions {
    fn default() -> Self {
        LapOptions {
            solve_tol: 1e-10,
            restart: 60,
            max_iters: 3000,
            norm: NormMethod::Lanczos { max_iters: 600, tol: 1e-9 },
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolveStats {
    pub iters: usize,
    pub residual: f64,
}

/// `H - z` applied matrix-free, with the shifted-Laplacian preconditioner `(|k|^2 - z)^{-1}`.
struct Shifted<'a> {
    grid: &'a Grid,
    potential: &'a [f64],
    kinetic: Vec<C64>,
    precond: Vec<C64>,
    z: C64,
}

impl<'a> Shifted<'a> {
    fn new(h: &'a Hamiltonian, z: C64) -> Self {
        let g = &h.grid;
        let kinetic = g.sample_symbol(|k| C64::new(k.iter().map(|a| a * a).sum(), 0.0));
        let precond = kinetic.iter().map(|k2| C64::new(1.0, 0.0) / (k2 - z)).collect();
        Shifted { grid: g, potential: &h.potential, kinetic, precond, z }
    }

    fn apply(&self, f: &[C64]) -> Vec<C64> {
        let mut out = self.grid.apply_symbol(&self.kinetic, f);
        for ((o, x), v) in out.iter_mut().zip(f).zip(self.potential) {
            *o += (v - self.z) * x;
        }
        out
    }

    fn precondition(&self, f: &[C64]) -> Vec<C64> {
        self.grid.apply_symbol(&self.precond, f)
    }
}

fn cdot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn axpy(y: &mut [C64], a: C64, x: &[C64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

/// Restarted right-preconditioned GMRES for `(H - z) x = b`; convergence is judged on the true
/// residual `|b - (H - z) x| / |b|`.
fn gmres(op: &Shifted, b: &[C64], opts: &LapOptions) -> Result<(Vec<C64>, SolveStats)> {
    let n = b.len();
    let nb = vec_norm(b);
    if nb == 0.0 {
        return Ok((vec![C64::new(0.0, 0.0); n], SolveStats::default()));
    }
    let m = opts.restart.max(1);
    let mut x = op.precondition(b);
    let mut iters = 0usize;
    loop {
        let ax = op.apply(&x);
        let r: Vec<C64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = vec_norm(&r);
        let rel = beta / nb;
        if rel <= opts.solve_tol {
            return Ok((x, SolveStats { iters, residual: rel }));
        }
        if iters >= opts.max_iters {
            return Err(Error::SolveFailed { iters, residual: rel });
        }
        let mut v: Vec<Vec<C64>> = vec![r.iter().map(|c| c / beta).collect()];
        let mut hess: Vec<Vec<C64>> = Vec::new();
        let mut cs: Vec<C64> = Vec::new();
        let mut sn: Vec<C64> = Vec::new();
        let mut gvec = vec![C64::new(beta, 0.0)];
        let mut k = 0;
        while k < m && iters < opts.max_iters {
            let mut w = op.apply(&op.precondition(&v[k]));
            let mut col = vec![C64::new(0.0, 0.0); k + 2];
            // modified Gram-Schmidt, two passes
            for _ in 0..2 {
                for (i, vi) in v.iter().enumerate() {
                    let c = cdot(vi, &w);
                    col[i] += c;
                    axpy(&mut w, -c, vi);
                }
            }
            let hn = vec_norm(&w);
            col[k + 1] = C64::new(hn, 0.0);
            for i in 0..k {
                let t = cs[i] * col[i] + sn[i] * col[i + 1];
                col[i + 1] = -sn[i].conj() * col[i] + cs[i].conj() * col[i + 1];
                col[i] = t;
            }
            let (a, bb) = (col[k], col[k + 1]);
            let den = libm::sqrt(a.norm_sqr() + bb.norm_sqr());
            let (c, s) = if den == 0.0 { (C64::new(1.0, 0.0), C64::new(0.0, 0.0)) } else { (a / den, bb / den) };
            let (c, s) = (c.conj(), s.conj());
            col[k] = c * a + s * bb;
            col[k + 1] = C64::new(0.0, 0.0);
            cs.push(c);
            sn.push(s);
            let gk = gvec[k];
            gvec[k] = c * gk;
            gvec.push(-s.conj() * gk);
            hess.push(col);
            iters += 1;
            k += 1;
            if hn == 0.0 || gvec[k].norm() / nb <= 0.1 * opts.solve_tol {
                break;
            }
            v.push(w.into_iter().map(|c| c / hn).collect());
        }
        // back substitution
        let mut y = vec![C64::new(0.0, 0.0); k];
        for i in (0..k).rev() {
            let mut acc = gvec[i];
            for j in i + 1..k {
                acc -= hess[j][i] * y[j];
            }
            y[i] = acc / hess[i][i];
        }
        let mut dx = vec![C64::new(0.0, 0.0); n];
        for (j, yj) in y.iter().enumerate() {
            axpy(&mut dx, *yj, &v[j]);
        }
        let dx = op.precondition(&dx);
        x.iter_mut().zip(&dx).for_each(|(a, b)| *a += b);
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if !(libm::fabs(mu) >= MU_MIN) {
        return Err(Error::ShiftTooSmall(mu));
    }
    Ok(())
}

/// `x = (H - z)^{-1} b`.
pub fn resolvent_apply(h: &Hamiltonian, z: C64, b: &[C64], opts: &LapOptions) -> Result<(Vec<C64>, SolveStats)> {
    check_mu(z.im)?;
    gmres(&Shifted::new(h, z), b, opts)
}

/// `R(z)` as an operator; `R(z)^* = R(conj z)` since `H` is self-adjoint. Failed solves are
/// recorded and surfaced by the caller.
struct Resolvent<'a> {
    grid: &'a Grid,
    forward: Shifted<'a>,
    backward: Shifted<'a>,
    opts: LapOptions,
    worst: Cell<f64>,
    iters: Cell<usize>,
    failed: Cell<Option<(usize, f64)>>,
}

impl<'a> Resolvent<'a> {
    fn new(h: &'a Hamiltonian, z: C64, opts: &LapOptions) -> Self {
        Resolvent {
            grid: &h.grid,
            forward: Shifted::new(h, z),
            backward: Shifted::new(h, z.conj()),
            opts: *opts,
            worst: Cell::new(0.0),
            iters: Cell::new(0),
            failed: Cell::new(None),
        }
    }

    fn run(&self, op: &Shifted, f: &[C64]) -> Vec<C64> {
        match gmres(op, f, &self.opts) {
            Ok((x, st)) => {
                self.worst.set(self.worst.get().max(st.residual));
                self.iters.set(self.iters.get() + st.iters);
                x
            }
            Err(Error::SolveFailed { iters, residual }) => {
                self.failed.set(Some((iters, residual)));
                vec![C64::new(0.0, 0.0); f.len()]
            }
            Err(_) => unreachable!("gmres only fails by non-convergence"),
        }
    }

    fn finish(&self) -> Result<SolveStats> {
        if let Some((iters, residual)) = self.failed.get() {
            return Err(Error::SolveFailed { iters, residual });
        }
        Ok(SolveStats { iters: self.iters.get(), residual: self.worst.get() })
    }
}

impl Operator for Resolvent<'_> {
    fn grid(&self) -> &Grid {
        self.grid
    }
    fn apply(&self, f: &[C64]) -> Vec<C64> {
        self.run(&self.forward, f)
    }
    fn apply_adjoint(&self, f: &[C64]) -> Vec<C64> {
        self.run(&self.backward, f)
    }
}

/// `R(z1) - R(z2)`.
struct Difference<'a> {
    a: Resolvent<'a>,
    b: Resolvent<'a>,
}

impl Operator for Difference<'_> {
    fn grid(&self) -> &Grid {
        self.a.grid
    }
    fn apply(&self, f: &[C64]) -> Vec<C64> {
        let mut x = self.a.apply(f);
        x.iter_mut().zip(self.b.apply(f)).for_each(|(p, q)| *p -= q);
        x
    }
    fn apply_adjoint(&self, f: &[C64]) -> Vec<C64> {
        let mut x = self.a.apply_adjoint(f);
        x.iter_mut().zip(self.b.apply_adjoint(f)).for_each(|(p, q)| *p -= q);
        x
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ResolventNorm {
    pub value: f64,
    /// Worst relative residual over all inner solves.
    pub residual: f64,
    /// Total GMRES steps over all inner solves.
    pub solver_iters: usize,
}

fn check_s(s: f64) -> Result<()> {
    if !(s > 0.5) {
        return Err(Error::InvalidParameter(format!("weight exponent must exceed 1/2, got {s}")));
    }
    Ok(())
}

/// Norm of `R(lambda + i mu)` from `H^{-1}_s` to `H^1_{-s}`. A negative `mu` selects the lower
/// half plane.
pub fn weighted_resolvent_norm(h: &Hamiltonian, lambda: f64, mu: f64, s: f64, opts: &LapOptions) -> Result<ResolventNorm> {
    check_mu(mu)?;
    check_s(s)?;
    let r = Resolvent::new(h, C64::new(lambda, mu), opts);
    let value = operator_norm(&Weighted::new(&r, -1.0, s, 1.0, -s), opts.norm);
    let st = r.finish()?;
    Ok(ResolventNorm { value: value?, residual: st.residual, solver_iters: st.iters })
}

/// Weighted norm of `R(l1 + i mu) - R(l2 + i mu)`.
pub fn weighted_difference_norm(
    h: &Hamiltonian,
    l1: f64,
    l2: f64,
    mu: f64,
    s: f64,
    opts: &LapOptions,
) -> Result<ResolventNorm> {
    check_mu(mu)?;
    check_s(s)?;
    let d = Difference { a: Resolvent::new(h, C64::new(l1, mu), opts), b: Resolvent::new(h, C64::new(l2, mu), opts) };
    let value = operator_norm(&Weighted::new(&d, -1.0, s, 1.0, -s), opts.norm);
    let (a, b) = (d.a.finish()?, d.b.finish()?);
    Ok(ResolventNorm { value: value?, residual: a.residual.max(b.residual), solver_iters: a.iters + b.iters })
}

/// Median distinct-level spacing of `H` near `lambda`, widening the search until two levels are
/// found.
pub fn level_spacing(spectrum: &Spectrum, lambda: f64) -> Result<f64> {
    let mut w = 0.05 * libm::fabs(lambda).max(1.0);
    for _ in 0..12 {
        if let Some(d) = spectrum.local_spacing(lambda, w) {
            return Ok(d);
        }
        w *= 2.0;
    }
    Err(Error::InvalidParameter(format!("no eigenvalue pair of H near {lambda}")))
}

/// Eigenvalues whose spread score ([`Spectrum::localization`]) falls below this are treated as
/// bound states.
pub const LOCALIZED: f64 = 0.05;

/// Localized eigenvalues of `H` within `window` of `lambda`.
pub fn nearby_bound_states(spectrum: &Spectrum, lambda: f64, window: f64) -> Vec<f64> {
    (0..spectrum.values.len())
        .filter(|&j| libm::fabs(spectrum.values[j] - lambda) <= window && spectrum.localization(j) < LOCALIZED)
        .map(|j| spectrum.values[j])
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum LapVerdict {
    LapConsistent,
    Divergent,
    Inconclusive,
}

impl LapVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            LapVerdict::LapConsistent => "LAP-consistent",
            LapVerdict::Divergent => "divergent",
            LapVerdict::Inconclusive => "inconclusive",
        }
    }
}

/// Log-log slope of the norm against `mu` over the smallest-`mu` points at or below which growth
/// counts as a power of `1/mu`.
pub const DIVERGENT_SLOPE: f64 = -0.4;

/// Ratio of the last two increments along a halving schedule: about `2^{-theta}` when the norm
/// converges like `mu^theta`, about `2^gamma` when it blows up like `mu^{-gamma}`.
pub const FLATTENING_RATIO: f64 = 1.0;
pub const GROWTH_RATIO: f64 = 1.05;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MuSweep {
    /// `mu` descending against the weighted norm, over the points at or above the floor.
    pub record: SweepRecord,
    pub residuals: Vec<f64>,
    pub solver_iters: Vec<usize>,
    pub spacing: f64,
    /// `4 * spacing`.
    pub floor: f64,
    /// Schedule points below the floor, not evaluated.
    pub dropped: Vec<f64>,
    /// Fit over the last octave-and-a-half toward small `mu`.
    pub fit: Option<LineFit>,
    /// Relative spread of the norm across the last octave (reported, not asserted).
    pub plateau: Option<f64>,
    /// `|N_{k+1} - N_k| / |N_k - N_{k-1}|` at the small-`mu` end.
    pub last_ratio: Option<f64>,
    pub verdict: LapVerdict,
}

/// `mu_k = mu0 2^{-k}` down to `floor`, inclusive of the first point at or below it.
pub fn halving_schedule(mu0: f64, floor: f64) -> Vec<f64> {
    let mut out = vec![mu0];
    while *out.last().unwrap() > floor && out.len() < 64 {
        let next = out.last().unwrap() * 0.5;
        out.push(next);
    }
    out
}

/// Weighted resolvent norms along a `mu` schedule at fixed `lambda`, with the verdict read off the
/// small-`mu` end above `4 * spacing`: LAP-consistent when increments shrink and the slope stays
/// above [`DIVERGENT_SLOPE`], divergent when they grow at or below it. The ratio test assumes a
/// halving schedule.
pub fn mu_sweep(
    h: &Hamiltonian,
    spectrum: &Spectrum,
    lambda: f64,
    s: f64,
    schedule: &[f64],
    opts: &LapOptions,
) -> Result<MuSweep> {
    check_s(s)?;
    let spacing = level_spacing(spectrum, lambda)?;
    let near = nearby_bound_states(spectrum, lambda, 2.0 * spacing);
    if !near.is_empty() {
        return Err(Error::NearEigenvalue { lambda, window: 2.0 * spacing, eigenvalues: near });
    }
    let floor = 4.0 * spacing;
    let mut mus: Vec<f64> = schedule.to_vec();
    mus.sort_by(|a, b| b.total_cmp(a));
    mus.dedup();
    let (kept, dropped): (Vec<f64>, Vec<f64>) = mus.into_iter().partition(|m| *m >= floor);
    let mut values = Vec::new();
    let mut residuals = Vec::new();
    let mut iters = Vec::new();
    for &mu in &kept {
        let r = weighted_resolvent_norm(h, lambda, mu, s, opts)?;
        values.push(r.value);
        residuals.push(r.residual);
        iters.push(r.solver_iters);
    }
    let record = SweepRecord::new("mu", kept.clone(), values.clone())?
        .with_meta("grid", h.grid.signature())
        .with_meta("lambda", lambda.to_string())
        .with_meta("s", s.to_string())
        .with_meta("spacing", spacing.to_string());
    // last octave and a half: mu within a factor 3 of the smallest kept value
    let (fit, plateau) = match kept.last() {
        Some(&small) => {
            let idx: Vec<usize> = (0..kept.len()).filter(|&i| kept[i] <= 3.0 * small * (1.0 + 1e-12)).collect();
            let x: Vec<f64> = idx.iter().map(|&i| kept[i]).collect();
            let y: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
            let oct: Vec<f64> =
                (0..kept.len()).filter(|&i| kept[i] <= 2.0 * small * (1.0 + 1e-12)).map(|i| values[i]).collect();
            let plateau = if oct.len() >= 2 {
                let lo = oct.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = oct.iter().cloned().fold(0.0, f64::max);
                Some((hi - lo) / hi)
            } else {
                None
            };
            (if x.len() >= 2 { loglog_fit(&x, &y) } else { None }, plateau)
        }
        None => (None, None),
    };
    let last_ratio = match values.len() {
        n if n >= 3 => {
            let d1 = libm::fabs(values[n - 2] - values[n - 3]);
            let d2 = libm::fabs(values[n - 1] - values[n - 2]);
            if d1 > 0.0 {
                Some(d2 / d1)
            } else if d2 == 0.0 {
                Some(0.0)
            } else {
                None
            }
        }
        _ => None,
    };
    let verdict = match (fit, last_ratio) {
        (Some(f), Some(r)) if f.slope > DIVERGENT_SLOPE && r < FLATTENING_RATIO => LapVerdict::LapConsistent,
        (Some(f), Some(r)) if f.slope <= DIVERGENT_SLOPE && r >= GROWTH_RATIO => LapVerdict::Divergent,
        _ => LapVerdict::Inconclusive,
    };
    Ok(MuSweep { record, residuals, solver_iters: iters, spacing, floor, dropped, fit, plateau, last_ratio, verdict })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HolderFit {
    /// `(|lambda - lambda'|, D)` for every usable pair, by increasing separation.
    pub pairs: Vec<(f64, f64)>,
    pub fit: Option<LineFit>,
    /// Fitted exponent, `None` when inconclusive.
    pub theta: Option<f64>,
    /// Half the disagreement between fits over the lower and upper halves of the separations.
    pub systematic: Option<f64>,
    /// `theta` plus or minus the 95% slope interval half-width plus `systematic`.
    pub band: Option<(f64, f64)>,
}

/// Fewest usable pairs for a fit.
pub const MIN_PAIRS: usize = 6;

fn log_fit(pairs: &[(f64, f64)]) -> Option<LineFit> {
    let x: Vec<f64> = pairs.iter().map(|p| libm::log(p.0)).collect();
    let y: Vec<f64> = pairs.iter().map(|p| libm::log(p.1)).collect();
    line_fit(&x, &y)
}

/// Fit `D(lambda, lambda') ~ C |lambda - lambda'|^theta` over pairs of `lambda_grid` separated by
/// at least `2 mu_star`.
pub fn holder_exponent(h: &Hamiltonian, lambda_grid: &[f64], s: f64, mu_star: f64, opts: &LapOptions) -> Result<HolderFit> {
    check_mu(mu_star)?;
    check_s(s)?;
    let mut pairs = Vec::new();
    for i in 0..lambda_grid.len() {
        for j in i + 1..lambda_grid.len() {
            let d = libm::fabs(lambda_grid[i] - lambda_grid[j]);
            if d >= 2.0 * mu_star {
                let n = weighted_difference_norm(h, lambda_grid[i], lambda_grid[j], mu_star, s, opts)?;
                pairs.push((d, n.value));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let fit = if pairs.len() >= MIN_PAIRS { log_fit(&pairs) } else { None };
    let Some(f) = fit else {
        return Ok(HolderFit { pairs, fit: None, theta: None, systematic: None, band: None });
    };
    let half = pairs.len() / 2;
    let systematic = match (log_fit(&pairs[..half]), log_fit(&pairs[half..])) {
        (Some(a), Some(b)) => 0.5 * libm::fabs(a.slope - b.slope),
        _ => 0.0,
    };
    let hw = 0.5 * (f.ci_hi - f.ci_lo) + systematic;
    Ok(HolderFit {
        pairs,
        fit,
        theta: Some(f.slope),
        systematic: Some(systematic),
        band: Some((f.slope - hw, f.slope + hw)),
    })
}
