//! Potential catalog (oscillating, exponential, Fourier comb, bump sums, power decay, wells) and
//! the scalar diagnostics used in hypotheses: local L^p seminorms, phi_a profiles, short-range
//! profiles and H^-1 membership.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::lattice::{vec_norm, Grid, GridFunction};
use crate::linop::LinOp;
use crate::norms::{opnorm, sq, NormMethod};
use crate::report::{last_decade, loglog_fit, slope_below, LineFit, SweepRecord, Verdict};
use crate::C64;

/// Smooth bump `exp(1 - 1/(1 - t^2))` on `|t| < 1`, with `chi(0) = 1`.
pub fn bump(t: f64) -> f64 {
    let s = 1.0 - t * t;
    if s <= 0.0 {
        0.0
    } else {
        libm::exp(1.0 - 1.0 / s)
    }
}

/// Derivative of [`bump`].
pub fn bump_derivative(t: f64) -> f64 {
    let s = 1.0 - t * t;
    if s <= 0.0 {
        0.0
    } else {
        bump(t) * (-2.0 * t / (s * s))
    }
}

fn psi(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else {
        libm::exp(-1.0 / s)
    }
}

/// Smooth step: 0 for `t <= 0`, 1 for `t >= 1`, `C^infinity` in between.
pub fn smooth_step(t: f64) -> f64 {
    let a = psi(t);
    let b = psi(1.0 - t);
    if a + b == 0.0 {
        0.0
    } else {
        a / (a + b)
    }
}

/// Radial cutoff: 1 on `|r| <= inner`, 0 on `|r| >= outer`, smooth in between.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Cutoff {
    pub inner: f64,
    pub outer: f64,
}

impl Cutoff {
    /// `kappa = 1` on `[-1, 1]`, support in `[-1.5, 1.5]`.
    pub fn unit() -> Self {
        Cutoff { inner: 1.0, outer: 1.5 }
    }

    pub fn eval(&self, r: f64) -> f64 {
        1.0 - smooth_step((libm::fabs(r) - self.inner) / (self.outer - self.inner))
    }

    /// `1 - kappa`.
    pub fn tail(&self, r: f64) -> f64 {
        smooth_step((libm::fabs(r) - self.inner) / (self.outer - self.inner))
    }

    fn validate(&self) -> Result<()> {
        if !(self.inner >= 0.0 && self.outer > self.inner) {
            return Err(Error::InvalidParameter(format!("cutoff needs 0 <= inner < outer, got {:?}", self)));
        }
        Ok(())
    }
}

/// Coefficient sequence of the Fourier comb.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CombSequence {
    /// `lambda_n = p` when `|n| = 2^p`, else 0.
    Dyadic,
    /// `(n, lambda_n)` for `n > 0`; mirrored to `-n`, `lambda_0 = 0`.
    Explicit(Vec<(u64, f64)>),
}

impl CombSequence {
    /// Nonzero `(n, lambda_n)` with `0 < n <= n_max`.
    pub fn terms(&self, n_max: u64) -> Vec<(u64, f64)> {
        match self {
            CombSequence::Dyadic => (1..64u32)
                .map(|p| (1u64 << p, p as f64))
                .take_while(|(n, _)| *n <= n_max)
                .collect(),
            CombSequence::Explicit(v) => v.iter().cloned().filter(|(n, l)| *n > 0 && *n <= n_max && *l != 0.0).collect(),
        }
    }

    /// `lambda_n` for `n >= 0`.
    pub fn lambda(&self, n: u64) -> f64 {
        match self {
            CombSequence::Dyadic => {
                if n >= 2 && n.is_power_of_two() {
                    n.trailing_zeros() as f64
                } else {
                    0.0
                }
            }
            CombSequence::Explicit(v) => v.iter().find(|(m, _)| *m == n && n > 0).map(|t| t.1).unwrap_or(0.0),
        }
    }
}

/// Closure for user-supplied potentials.
#[derive(Clone)]
pub struct CustomFn {
    pub name: String,
    pub f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
}

impl core::fmt::Debug for CustomFn {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "CustomFn({})", self.name)
    }
}

impl PartialEq for CustomFn {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && Arc::ptr_eq(&self.f, &other.f)
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", tag = "family"))]
pub enum Family {
    /// `(1 - kappa(|x|)) sin(k |x|^alpha) / |x|^beta`.
    Oscillating { alpha: f64, beta: f64, k: f64, cutoff: Cutoff },
    /// `(1 - kappa(|x|)) exp(3|x|/4) sin(exp |x|)`.
    Exponential { cutoff: Cutoff },
    /// `V = q^{-1} F^{-1}[sum_n lambda_n chi(xi - n)]`, 1D only.
    FourierComb { sequence: CombSequence, epsilon: f64 },
    /// `sum_{n=1}^{n_max} n^{(3 nu - 1)/2} chi'(n^{3 nu / 2}(|x| - n))`.
    BumpSum { nu: usize, n_max: usize },
    /// `<x>^{-power}`.
    Decay { power: f64 },
    /// `-depth * kappa(|x|)`.
    Well { depth: f64, cutoff: Cutoff },
    Constant { value: f64 },
    #[cfg_attr(feature = "serde", serde(skip))]
    Custom(CustomFn),
}

/// A potential family plus an optional outer taper `kappa(|x| / R)` that makes it vanish near the
/// box edge.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PotentialSpec {
    pub family: Family,
    pub taper: Option<f64>,
}

impl PotentialSpec {
    pub fn new(family: Family) -> Self {
        PotentialSpec { family, taper: None }
    }

    pub fn with_taper(mut self, radius: f64) -> Self {
        self.taper = Some(radius);
        self
    }

    /// `W_{alpha,beta}` with `k = 1` and the unit cutoff.
    pub fn oscillating(alpha: f64, beta: f64) -> Self {
        Self::new(Family::Oscillating { alpha, beta, k: 1.0, cutoff: Cutoff::unit() })
    }

    pub fn exponential(cutoff: Cutoff) -> Self {
        Self::new(Family::Exponential { cutoff })
    }

    pub fn fourier_comb() -> Self {
        Self::new(Family::FourierComb { sequence: CombSequence::Dyadic, epsilon: 0.25 })
    }

    pub fn decay(power: f64) -> Self {
        Self::new(Family::Decay { power })
    }

    pub fn constant(value: f64) -> Self {
        Self::new(Family::Constant { value })
    }

    pub fn custom(name: &str, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(Family::Custom(CustomFn { name: name.into(), f: Arc::new(f) }))
    }

    /// Short name for manifests and CSV headers.
    pub fn label(&self) -> String {
        let base = match &self.family {
            Family::Oscillating { alpha, beta, k, .. } => format!("oscillating(alpha={alpha},beta={beta},k={k})"),
            Family::Exponential { .. } => "exponential".into(),
            Family::FourierComb { epsilon, .. } => format!("fourier_comb(eps={epsilon})"),
            Family::BumpSum { nu, n_max } => format!("bump_sum(nu={nu},n_max={n_max})"),
            Family::Decay { power } => format!("decay({power})"),
            Family::Well { depth, .. } => format!("well({depth})"),
            Family::Constant { value } => format!("constant({value})"),
            Family::Custom(c) => format!("custom({})", c.name),
        };
        match self.taper {
            Some(r) => format!("{base}*taper({r})"),
            None => base,
        }
    }

    /// Caveats attached to a realization.
    pub fn hypothesis_notes(&self) -> Vec<String> {
        let mut notes = Vec::new();
        if let Family::BumpSum { nu, .. } = self.family {
            if nu < 3 {
                notes.push(format!("outside hypothesis: bump_sum radial analysis assumes nu >= 3, got {nu}"));
            }
        }
        if let Family::FourierComb { .. } = self.family {
            notes.push("fourier_comb: V = (qV)/x by pointwise division on an offset grid".into());
        }
        notes
    }

    /// Closed-form value at `x`. The comb has no pointwise closed form and errors.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let r = libm::sqrt(sq(x));
        let v = match &self.family {
            Family::Oscillating { alpha, beta, k, cutoff } => {
                let t = cutoff.tail(r);
                if t == 0.0 {
                    0.0
                } else {
                    t * libm::sin(k * libm::pow(r, *alpha)) / libm::pow(r, *beta)
                }
            }
            Family::Exponential { cutoff } => {
                let t = cutoff.tail(r);
                if t == 0.0 {
                    0.0
                } else {
                    t * libm::exp(0.75 * r) * libm::sin(libm::exp(r))
                }
            }
            Family::FourierComb { .. } => {
                return Err(Error::InvalidParameter("fourier_comb is realized through the grid transform".into()))
            }
            Family::BumpSum { nu, n_max } => bump_sum_value(*nu, *n_max, r),
            Family::Decay { power } => libm::pow(1.0 + r * r, -power / 2.0),
            Family::Well { depth, cutoff } => -depth * cutoff.eval(r),
            Family::Constant { value } => *value,
            Family::Custom(c) => (c.f)(x),
        };
        Ok(match self.taper {
            Some(rt) => v * Cutoff::unit().eval(r / rt),
            None => v,
        })
    }

    fn validate(&self) -> Result<()> {
        match &self.family {
            Family::Oscillating { cutoff, .. } | Family::Exponential { cutoff } | Family::Well { cutoff, .. } => {
                cutoff.validate()
            }
            Family::FourierComb { sequence, epsilon } => {
                if !(0.0..0.5).contains(epsilon) {
                    return Err(Error::InvalidParameter(format!("comb epsilon must lie in [0, 1/2), got {epsilon}")));
                }
                if let CombSequence::Explicit(v) = sequence {
                    if v.iter().any(|(_, l)| *l < 0.0) {
                        return Err(Error::InvalidParameter("comb coefficients must be nonnegative".into()));
                    }
                }
                Ok(())
            }
            Family::BumpSum { nu, .. } if *nu == 0 => Err(Error::InvalidParameter("bump_sum needs nu >= 1".into())),
            _ => Ok(()),
        }
    }
}

fn bump_sum_value(nu: usize, n_max: usize, r: f64) -> f64 {
    let amp_exp = (3.0 * nu as f64 - 1.0) / 2.0;
    let width_exp = 1.5 * nu as f64;
    // only the term with n nearest to r can be nonzero: supports have width < 1
    let n = libm::round(r);
    if n < 1.0 || n > n_max as f64 {
        return 0.0;
    }
    libm::pow(n, amp_exp) * bump_derivative(libm::pow(n, width_exp) * (r - n))
}

/// Sample the potential at the position nodes of `grid`.
pub fn realize(spec: &PotentialSpec, grid: &Grid) -> Result<GridFunction> {
    spec.validate()?;
    let values: Vec<f64> = match &spec.family {
        Family::FourierComb { sequence, .. } => {
            let mut v = comb_times_q(sequence, grid)?;
            for (i, val) in v.iter_mut().enumerate() {
                let x = grid.coord(i, 0);
                if libm::fabs(x) < 1e-12 * grid.spacing() {
                    return Err(Error::SingularNode { index: i, position: x });
                }
                *val /= x;
                if let Some(rt) = spec.taper {
                    *val *= Cutoff::unit().eval(x / rt);
                }
            }
            v
        }
        _ => {
            let mut out = Vec::with_capacity(grid.len());
            for i in 0..grid.len() {
                let x = grid.position(i);
                let v = spec.eval(&x[..grid.dim()])?;
                if !v.is_finite() {
                    return Err(Error::SingularNode { index: i, position: x[0] });
                }
                out.push(v);
            }
            out
        }
    };
    GridFunction::new(grid.clone(), values.into_iter().map(|v| C64::new(v, 0.0)).collect())
}

/// Momentum symbol `sum_n lambda_n chi(xi - n)` of `qV` for the comb, at the momentum nodes.
/// Terms whose support leaves the resolved window are dropped.
pub fn comb_symbol(sequence: &CombSequence, grid: &Grid) -> Vec<C64> {
    let n_max = libm::floor(grid.k_max() - 1.0).max(0.0) as u64;
    let terms = sequence.terms(n_max);
    grid.sample_symbol(|k| {
        let v: f64 = terms.iter().map(|(n, l)| l * (bump(k[0] - *n as f64) + bump(k[0] + *n as f64))).sum();
        C64::new(v, 0.0)
    })
}

/// Real part of `qV` for the comb on the position nodes (1D only).
pub fn comb_times_q(sequence: &CombSequence, grid: &Grid) -> Result<Vec<f64>> {
    if grid.dim() != 1 {
        return Err(Error::BadDimension(grid.dim()));
    }
    let qv = grid.inverse(&comb_symbol(sequence, grid));
    Ok(qv.iter().map(|c| c.re).collect())
}

/// Largest `|x|` at which `exp|x|` (the exponential family's local frequency) stays below the
/// grid's Nyquist momentum.
pub fn exponential_resolved_radius(grid: &Grid) -> f64 {
    libm::log(grid.k_max())
}

// ---------------------------------------------------------------------------------------------
// seminorms

/// A windowed quantity with a flag set when the window left the grid.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WindowedValue {
    pub value: f64,
    pub truncated: bool,
}

/// `(int_{|y - x| < 1} |V(y)|^p dy)^{1/p}` by quadrature on the nodes. In 1D the integrand is
/// treated as piecewise linear, including the partial cells at both ends.
pub fn local_lp_seminorm(v: &GridFunction, p: f64, x: &[f64]) -> Result<WindowedValue> {
    if p < 1.0 {
        return Err(Error::InvalidParameter(format!("p must be >= 1, got {p}")));
    }
    let g = &v.grid;
    let l = g.half_width();
    let truncated = x.iter().take(g.dim()).any(|c| c - 1.0 < -l || c + 1.0 > l);
    let abs_p: Vec<f64> = v.values.iter().map(|c| libm::pow(c.norm(), p)).collect();
    let integral = if g.dim() == 1 {
        segment_integral(g, &abs_p, x[0] - 1.0, x[0] + 1.0)
    } else {
        let w = g.weight();
        (0..g.len())
            .filter(|&i| {
                let y = g.position(i);
                (0..g.dim()).map(|a| (y[a] - x[a]) * (y[a] - x[a])).sum::<f64>() < 1.0
            })
            .map(|i| abs_p[i] * w)
            .sum()
    };
    Ok(WindowedValue { value: libm::pow(integral, 1.0 / p), truncated })
}

/// Integral of the piecewise-linear interpolant of `f` over `[lo, hi]` (1D, non-periodic).
fn segment_integral(g: &Grid, f: &[f64], lo: f64, hi: f64) -> f64 {
    let h = g.spacing();
    let x0 = -g.half_width() + g.offset();
    let n = f.len();
    let at = |t: f64| -> f64 {
        let s = (t - x0) / h;
        let j = libm::floor(s);
        if j < 0.0 || j as usize + 1 >= n {
            return 0.0;
        }
        let j = j as usize;
        let w = s - j as f64;
        f[j] * (1.0 - w) + f[j + 1] * w
    };
    let first = libm::ceil((lo - x0) / h).max(0.0) as usize;
    let last_f = libm::floor((hi - x0) / h);
    if last_f < 0.0 || first >= n {
        return 0.0;
    }
    let last = (last_f as usize).min(n - 1);
    if first > last {
        return 0.5 * (hi - lo) * (at(lo) + at(hi));
    }
    let xf = x0 + first as f64 * h;
    let xl = x0 + last as f64 * h;
    let mut total = 0.5 * (xf - lo) * (at(lo) + f[first]) + 0.5 * (hi - xl) * (f[last] + at(hi));
    for j in first..last {
        total += 0.5 * h * (f[j] + f[j + 1]);
    }
    total
}

/// Sup of the local seminorm over nodes whose window stays inside the inner half of the box.
pub fn local_lp_sup(v: &GridFunction, p: f64) -> Result<f64> {
    let g = &v.grid;
    let lim = 0.5 * g.half_width();
    let mut best = 0.0f64;
    for i in 0..g.len() {
        let x = g.position(i);
        if (0..g.dim()).all(|a| libm::fabs(x[a]) <= lim) {
            best = best.max(local_lp_seminorm(v, p, &x[..g.dim()])?.value);
        }
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", tag = "kind"))]
pub enum SeminormKind {
    LocalLp { p: f64 },
    PhiA { a: f64, p: f64 },
    ShortRange,
    HMinusOne { mu: f64 },
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SeminormReport {
    pub kind: SeminormKind,
    pub values: SweepRecord,
    pub verdict: Verdict,
    pub fit: Option<LineFit>,
    /// Largest radius evaluated; schedule points beyond it were dropped.
    pub truncation_radius: f64,
    pub dropped: Vec<f64>,
    /// Every sup was attained next to the truncation radius: the profile is capped by the box.
    pub edge_dominated: bool,
}

/// Values of `f(x + a e_axis)` on the nodes. Exact index roll when `a` is a multiple of the
/// spacing (periodic wrap), spectral shift otherwise.
pub fn shifted_values(grid: &Grid, values: &[C64], a: f64, axis: usize) -> Vec<C64> {
    let h = grid.spacing();
    let m = a / h;
    if libm::fabs(m - libm::round(m)) < 1e-9 {
        let n = grid.points_per_axis() as i64;
        let s = libm::round(m) as i64;
        (0..grid.len())
            .map(|i| {
                let mut idx = grid.multi_index(i);
                idx[axis] = (idx[axis] as i64 + s).rem_euclid(n) as usize;
                values[grid.flat_index(idx)]
            })
            .collect()
    } else {
        let sym = grid.sample_symbol(|k| C64::new(libm::cos(a * k[axis]), libm::sin(a * k[axis])));
        grid.apply_symbol(&sym, values)
    }
}

/// Tabulate `phi_a(r) = sup_{|x| > r} |x| [[V(. + a) - V]]_p^x` on `r_schedule` (shift along the
/// first axis). Verdict: fitted log-log slope over the last decade strictly below 0.
pub fn phi_a_profile(v: &GridFunction, a: f64, p: f64, r_schedule: &[f64]) -> Result<SeminormReport> {
    if a == 0.0 {
        return Err(Error::InvalidParameter("phi_a needs a != 0".into()));
    }
    let g = &v.grid;
    let shifted = shifted_values(g, &v.values, a, 0);
    let diff = GridFunction::new(g.clone(), shifted.iter().zip(&v.values).map(|(s, o)| s - o).collect())?;
    // per-node |x| [[diff]]_p^x over the inner window, away from the wrapped rows
    let lim = (0.5 * g.half_width()).min(g.half_width() - 1.0 - libm::fabs(a));
    let mut nodes: Vec<(f64, f64)> = Vec::new();
    for i in 0..g.len() {
        let x = g.position(i);
        if (0..g.dim()).all(|d| libm::fabs(x[d]) <= lim) {
            let r = g.radius(i);
            nodes.push((r, r * local_lp_seminorm(&diff, p, &x[..g.dim()])?.value));
        }
    }
    let reach = nodes.iter().map(|n| n.0).fold(0.0, f64::max);
    let (kept, dropped): (Vec<f64>, Vec<f64>) = r_schedule.iter().partition(|r| **r < reach);
    let mut values = Vec::with_capacity(kept.len());
    let mut edge = !kept.is_empty();
    for r in &kept {
        let (at, best) = nodes.iter().filter(|n| n.0 > *r).fold((0.0, 0.0), |acc, n| if n.1 > acc.1 { *n } else { acc });
        values.push(best);
        edge &= best > 0.0 && at >= reach - 2.0 * g.spacing();
    }
    let mut rep = finish_report(SeminormKind::PhiA { a, p }, "r", kept, values, 0.0, lim, dropped)?;
    rep.edge_dominated = edge;
    Ok(rep)
}

fn finish_report(
    kind: SeminormKind,
    axis: &str,
    r: Vec<f64>,
    values: Vec<f64>,
    threshold: f64,
    truncation_radius: f64,
    dropped: Vec<f64>,
) -> Result<SeminormReport> {
    let tail = last_decade(&r, true);
    let tx: Vec<f64> = tail.iter().map(|&i| r[i]).collect();
    let ty: Vec<f64> = tail.iter().map(|&i| values[i]).collect();
    let fit = loglog_fit(&tx, &ty);
    let verdict = if !ty.is_empty() && ty.last().is_some_and(|v| *v == 0.0) {
        // profile vanishes identically beyond some radius
        Verdict::Satisfied
    } else {
        slope_below(&ty, fit, threshold)
    };
    Ok(SeminormReport {
        kind,
        values: SweepRecord::new(axis, r, values)?,
        verdict,
        fit,
        truncation_radius,
        dropped,
        edge_dominated: false,
    })
}

/// `xi(t) = 1 - kappa(t)` with the unit cutoff.
pub fn xi(t: f64) -> f64 {
    Cutoff::unit().tail(t)
}

/// Diagonal `xi(|q| / r)`.
pub fn xi_op(grid: &Grid, r: f64) -> LinOp {
    LinOp::diagonal_fn(grid, |x| C64::new(xi(libm::sqrt(sq(x)) / r), 0.0))
}

/// Tabulate `r -> ||xi(q/r) S||` from H^1 to H^-1. Verdict: last-decade slope below -1.
pub fn short_range_integral(s: &LinOp, r_schedule: &[f64], method: NormMethod) -> Result<SeminormReport> {
    let g = s.grid();
    let lim = 0.5 * g.half_width();
    let (kept, dropped): (Vec<f64>, Vec<f64>) = r_schedule.iter().partition(|r| **r <= lim);
    let mut values = Vec::with_capacity(kept.len());
    for &r in &kept {
        values.push(opnorm(&xi_op(g, r).mul(s), 1.0, 0.0, -1.0, 0.0, method)?);
    }
    finish_report(SeminormKind::ShortRange, "r", kept, values, -1.0, lim, dropped)
}

/// `||<p>^{-1} (<q>^{1+mu} f)||`.
pub fn h_minus_one_norm(f: &GridFunction, mu: f64) -> f64 {
    let g = &f.grid;
    let w: Vec<C64> = (0..g.len()).map(|i| f.values[i] * libm::pow(1.0 + sq(&g.position(i)), (1.0 + mu) / 2.0)).collect();
    let sym = g.sample_symbol(|k| C64::new(1.0 / libm::sqrt(1.0 + sq(k)), 0.0));
    let out = g.apply_symbol(&sym, &w);
    vec_norm(&out) * libm::sqrt(g.weight())
}

/// Refinement study of [`h_minus_one_norm`]: values at `N` and `2N` (same box) and whether they
/// agree within 5%.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Refinement {
    pub coarse: f64,
    pub fine: f64,
    pub stable: bool,
}

pub fn h_minus_one_refinement(spec: &PotentialSpec, grid: &Grid, mu: f64) -> Result<Refinement> {
    let fine_grid = Grid::new(grid.dim(), 2 * grid.points_per_axis(), grid.half_width(), grid.offset() / 2.0)?;
    let coarse = h_minus_one_norm(&realize(spec, grid)?, mu);
    let fine = h_minus_one_norm(&realize(spec, &fine_grid)?, mu);
    let scale = coarse.max(fine);
    let stable = scale == 0.0 || libm::fabs(coarse - fine) <= 0.05 * scale;
    Ok(Refinement { coarse, fine, stable })
}

/// `(2 pi)^{-1/2} \int chi(s) cos(x s) ds` by Gauss-Legendre; the comb satisfies
/// `qV(x) = (2 pi)^{-1/2} X(x) sum_n lambda_n 2 cos(n x)` in closed form.
pub fn bump_cosine_transform(x: f64) -> f64 {
    let panels = 64;
    let mut total = 0.0;
    for j in 0..panels {
        let a = -1.0 + 2.0 * j as f64 / panels as f64;
        let b = a + 2.0 / panels as f64;
        total += gauss_legendre(a, b, |s| bump(s) * libm::cos(x * s));
    }
    total / libm::sqrt(2.0 * PI)
}

/// 8-point Gauss-Legendre on `[a, b]`.
pub fn gauss_legendre<F: Fn(f64) -> f64>(a: f64, b: f64, f: F) -> f64 {
    const X: [f64; 4] = [0.1834346424956498, 0.5255324099163290, 0.7966664774136267, 0.9602898564975363];
    const W: [f64; 4] = [0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763];
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut s = 0.0;
    for i in 0..4 {
        s += W[i] * (f(c - h * X[i]) + f(c + h * X[i]));
    }
    s * h
}

/// Sample the closed-form `qV` of the comb (independent of the grid transform).
pub fn comb_times_q_closed_form(sequence: &CombSequence, n_max: u64, x: f64) -> f64 {
    let s: f64 = sequence.terms(n_max).iter().map(|(n, l)| 2.0 * l * libm::cos(*n as f64 * x)).sum();
    bump_cosine_transform(x) * s
}
