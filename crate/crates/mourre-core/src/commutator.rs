//! Finite differences `delta_j`, the explicit first and second commutator expansions for the
//! Nakamura conjugate operator, generic and iterated commutators, and the regularity diagnostics
//! (double-difference profile, r-scan, witness pairings).

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::conjugate::{assemble_a, group_element, TransportOptions, VectorField};
use crate::error::{Error, Result};
use crate::lattice::{inner, Grid};
use crate::linop::{Kind, LinOp};
use crate::norms::{form_norm, inverse_weight_op, sq, NormMethod, TestWindow};
use crate::potentials::{
    bump, bump_derivative, comb_symbol, gauss_legendre, realize, xi_op, CombSequence, Cutoff, Family, PotentialSpec,
};
use crate::report::{last_decade, loglog_fit, slope_above, slope_below, LineFit, SweepRecord, Verdict};
use crate::C64;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// `T_axis = e^{i a p_axis}`, i.e. `(T f)(x) = f(x + a e_axis)` on the torus.
pub fn translation(grid: &Grid, a: f64, axis: usize) -> LinOp {
    LinOp::multiplier_fn(grid, |k| C64::new(libm::cos(a * k[axis]), libm::sin(a * k[axis])))
}

/// Nodes whose translate `x + a e_axis` wraps around the box.
pub fn wrap_mask(grid: &Grid, a: f64, axis: usize) -> Vec<bool> {
    let h = grid.spacing();
    let lo = grid.offset() - grid.half_width();
    let hi = grid.offset() + grid.half_width() - h;
    (0..grid.len())
        .map(|i| {
            let y = grid.coord(i, axis) + a;
            y < lo - 1e-9 * h || y > hi + 1e-9 * h
        })
        .collect()
}

fn integer_shift(grid: &Grid, a: f64) -> Option<i64> {
    let m = a / grid.spacing();
    (libm::fabs(m - libm::round(m)) < 1e-9).then(|| libm::round(m) as i64)
}

/// `delta_j(V) = T_j V T_j^* - V`. Multipliers give zero. A diagonal `V` with `a` a multiple of the spacing gives the
/// diagonal `V(x + a e_j) - V(x)` (rolled periodically; see [`wrap_mask`]).
pub fn delta(v: &LinOp, a: f64, axis: usize) -> LinOp {
    let g = v.grid();
    if let Kind::Multiplier(_) = v.kind() {
        // translations commute with every multiplier
        return LinOp::zero(g);
    }
    if let (Kind::Diagonal(d), Some(s)) = (v.kind(), integer_shift(g, a)) {
        let n = g.points_per_axis() as i64;
        let vals = (0..g.len())
            .map(|i| {
                let mut idx = g.multi_index(i);
                idx[axis] = (idx[axis] as i64 + s).rem_euclid(n) as usize;
                d[g.flat_index(idx)] - d[i]
            })
            .collect();
        return LinOp::diagonal(g, vals);
    }
    let t = translation(g, a, axis);
    LinOp::compose(vec![t.clone(), v.clone(), t.adjoint()]).expect("same grid").sub(v)
}

/// Standard mixed second difference `V(q+ae_j+ae_k) - V(q+ae_j) - V(q+ae_k) + V(q)`.
pub fn second_difference(v: &LinOp, a: f64, j: usize, k: usize) -> LinOp {
    delta(&delta(v, a, k), a, j)
}

/// The `j`-th summand of the Nakamura operator: `sin(a p_j) q_j + (i a / 2) cos(a p_j)`.
pub fn nakamura_component(grid: &Grid, a: f64, axis: usize) -> LinOp {
    let s = LinOp::multiplier_fn(grid, |k| C64::new(libm::sin(a * k[axis]), 0.0));
    let c = LinOp::multiplier_fn(grid, |k| C64::new(0.0, 0.5 * a * libm::cos(a * k[axis])));
    s.mul(&LinOp::position(grid, axis)).add(&c)
}

fn shifted_position(grid: &Grid, b: f64, axis: usize) -> LinOp {
    LinOp::diagonal_fn(grid, |x| C64::new(b + x[axis], 0.0))
}

/// `[2iA_j, V] = (b+q_j) delta_j(V) T_j + T_j^* (b+q_j) delta_j(V)` with `b = a/2`.
/// Exact when `V` commutes with `q_j`, away from wrapped rows.
pub fn first_commutator_an(v: &LinOp, a: f64, axis: usize) -> LinOp {
    let g = v.grid();
    let t = translation(g, a, axis);
    let bq_d = shifted_position(g, 0.5 * a, axis).mul(&delta(v, a, axis));
    bq_d.mul(&t).add(&t.adjoint().mul(&bq_d))
}

/// `[iA_j, T_k] = b delta_jk (1 - T_k^2)`.
pub fn a_translation_commutator(grid: &Grid, a: f64, j: usize, k: usize) -> LinOp {
    if j != k {
        return LinOp::zero(grid);
    }
    let b = 0.5 * a;
    LinOp::multiplier_fn(grid, |p| {
        let th = 2.0 * a * p[k];
        C64::new(b * (1.0 - libm::cos(th)), -b * libm::sin(th))
    })
}

/// `[iA_j, [iA_k, V]]`. Writing `[iA_k, V] = M T_k + T_k^* M` with `M = (b+q_k) delta_k(V) / 2`
/// (a diagonal whenever `V` is), the outer commutator expands by Leibniz into
/// `[iA_j,M] T_k + M [iA_j,T_k] + [iA_j,T_k]^* M + T_k^* [iA_j,M]`.
pub fn second_commutator_an(v: &LinOp, a: f64, j: usize, k: usize) -> LinOp {
    let g = v.grid();
    let tk = translation(g, a, k);
    let m = shifted_position(g, 0.5 * a, k).mul(&delta(v, a, k)).scale_re(0.5);
    let am = first_commutator_an(&m, a, j).scale_re(0.5);
    let c = a_translation_commutator(g, a, j, k);
    LinOp::sum(vec![am.mul(&tk), m.mul(&c), c.adjoint().mul(&m), tk.adjoint().mul(&am)]).expect("same grid")
}

/// `B A - A B`.
pub fn generic_commutator(b: &LinOp, a: &LinOp) -> LinOp {
    b.commutator(a)
}

/// `ad^n_A(V)` nested as `[[..[V, A], A].., A]`, kept matrix-free.
pub fn iterated(v: &LinOp, a: &LinOp, n: usize) -> LinOp {
    (0..n).fold(v.clone(), |acc, _| acc.commutator(a))
}

/// Dense [`iterated`]; refuses grids above `cap` nodes.
pub fn iterated_dense(v: &LinOp, a: &LinOp, n: usize, cap: usize) -> Result<nalgebra::DMatrix<C64>> {
    let len = v.grid().len();
    if len > cap {
        return Err(Error::SizeCap { size: len, cap });
    }
    let vd = v.to_dense_capped(cap)?;
    let ad = a.to_dense_capped(cap)?;
    let mut acc = vd;
    for _ in 0..n {
        acc = &acc * &ad - &ad * &acc;
    }
    Ok(acc)
}

// ---------------------------------------------------------------------------------------------
// regularity diagnostics

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", tag = "class"))]
pub enum RegularityClass {
    C1,
    C11DoubleDifference,
    C11LrScan,
    Cn { n: usize },
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegularityReport {
    pub class_tested: RegularityClass,
    pub profile: SweepRecord,
    pub verdict: Verdict,
    pub fit: Option<LineFit>,
    pub conjugate_used: VectorField,
    /// Schedule points that could not be evaluated (beyond the window or failed transport).
    pub dropped: Vec<f64>,
    pub notes: Vec<String>,
}

/// `<p>^{-1} X <p>^{-1}` sandwiched by `window`: the H^1 -> H^-1 norm seen by localized states.
pub fn h1_form_norm(x: &LinOp, window: &TestWindow, method: NormMethod) -> Result<f64> {
    let w = inverse_weight_op(x.grid(), 1.0, 0.0);
    form_norm(&LinOp::compose(vec![w.clone(), x.clone(), w])?, window, method)
}

/// Test states for the double-difference profile: localized to `|x| <= L/4`, band-limited.
pub fn c11_window() -> TestWindow {
    TestWindow { frac: 0.25, edge_sigmas: Some(8.6) }
}

/// Geometric `tau` schedule from `tau_max` down to the grid scale `2 dk / sup|u|`.
pub fn c11_schedule(grid: &Grid, u: &VectorField, tau_max: f64, points: usize) -> Vec<f64> {
    let sup = u.sup_u().unwrap_or(grid.k_max()).max(1e-300);
    let lo = (2.0 * grid.momentum_spacing() / sup).min(0.5 * tau_max);
    geomspace(tau_max, lo, points)
}

/// Geometric sequence from `a` to `b` inclusive.
pub fn geomspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let r = libm::log(b / a) / (n - 1) as f64;
    (0..n).map(|i| a * libm::exp(r * i as f64)).collect()
}

/// Tabulate `g(tau) = ||V_tau + V_{-tau} - 2V||_{H^1 -> H^-1} / tau^2` with
/// `V_tau = e^{i tau A_u} V e^{-i tau A_u}`. Verdict: last-decade (small `tau`) log-log slope
/// above `-1`. A transport failure stops the sweep with an inconclusive verdict.
pub fn c11_double_difference(
    v: &LinOp,
    u: &VectorField,
    tau_schedule: &[f64],
    opts: &TransportOptions,
    method: NormMethod,
) -> Result<RegularityReport> {
    let g = v.grid();
    let window = c11_window();
    let mut taus = Vec::new();
    let mut values = Vec::new();
    let mut dropped = Vec::new();
    let mut notes = Vec::new();
    for (idx, &tau) in tau_schedule.iter().enumerate() {
        if tau <= 0.0 {
            return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
        }
        let pair = group_element(g, u, tau, opts).and_then(|gp| Ok((gp, group_element(g, u, -tau, opts)?)));
        let (gp, gm) = match pair {
            Ok(p) => p,
            Err(e) => {
                notes.push(format!("transport failed at tau = {tau}: {e}"));
                dropped.extend_from_slice(&tau_schedule[idx..]);
                break;
            }
        };
        let vp = LinOp::compose(vec![gp.clone(), v.clone(), gm.clone()])?;
        let vm = LinOp::compose(vec![gm, v.clone(), gp])?;
        let dd = LinOp::sum(vec![vp, vm, v.scale_re(-2.0)])?;
        taus.push(tau);
        values.push(h1_form_norm(&dd, &window, method)? / (tau * tau));
    }
    let failed = !dropped.is_empty();
    let (verdict, fit) = slope_verdict(&taus, &values, false, |vals, fit| slope_above(vals, fit, -1.0));
    let verdict = if failed && verdict != Verdict::Violated { Verdict::Inconclusive } else { verdict };
    Ok(RegularityReport {
        class_tested: RegularityClass::C11DoubleDifference,
        profile: SweepRecord::new("tau", taus, values)?,
        verdict,
        fit,
        conjugate_used: u.clone(),
        dropped,
        notes,
    })
}

fn slope_verdict(
    axis: &[f64],
    values: &[f64],
    toward_large: bool,
    rule: impl Fn(&[f64], Option<LineFit>) -> Verdict,
) -> (Verdict, Option<LineFit>) {
    if axis.is_empty() {
        return (Verdict::Inconclusive, None);
    }
    let tail = last_decade(axis, toward_large);
    let tx: Vec<f64> = tail.iter().map(|&i| axis[i]).collect();
    let ty: Vec<f64> = tail.iter().map(|&i| values[i]).collect();
    let fit = loglog_fit(&tx, &ty);
    (rule(&ty, fit), fit)
}

/// Which commutator the r-scan localizes.
#[derive(Clone, Debug, PartialEq)]
pub enum LrMode {
    /// `||xi(q/r) [V, i A_u]||`.
    Generic(VectorField),
    /// `||xi(q/r) [q_j, V]|| + ||xi(q/r) q_j delta_j(V)||`.
    Nakamura { a: f64, axis: usize },
}

/// Test states for the r-scan: sharp inner half window.
pub fn lr_window() -> TestWindow {
    TestWindow::sharp(0.5)
}

/// Tabulate the r-profile of the localized commutator in H^1 -> H^-1 on inner-window states.
/// Radii whose cutoff `xi(q/r)` does not reach full height inside the window are dropped.
/// Verdict: last-decade log-log slope below 0; a profile ending in exact zeros is satisfied.
pub fn lr_scan(v: &LinOp, mode: &LrMode, r_schedule: &[f64], method: NormMethod) -> Result<RegularityReport> {
    let g = v.grid();
    let window = lr_window();
    let lim = window.frac * g.half_width();
    let outer = Cutoff::unit().outer;
    let (kept, dropped): (Vec<f64>, Vec<f64>) = r_schedule.iter().partition(|r| **r * outer <= lim);
    let (ops, u): (Vec<LinOp>, VectorField) = match mode {
        LrMode::Generic(u) => (vec![v.commutator(&assemble_a(g, u)).scale(I)], u.clone()),
        LrMode::Nakamura { a, axis } => {
            let mut ops = Vec::new();
            if !matches!(v.kind(), Kind::Diagonal(_)) {
                ops.push(LinOp::position(g, *axis).commutator(v));
            }
            ops.push(LinOp::position(g, *axis).mul(&delta(v, *a, *axis)));
            (ops, VectorField::Nakamura { a: *a })
        }
    };
    let mut values = Vec::with_capacity(kept.len());
    for &r in &kept {
        let xr = xi_op(g, r);
        let mut total = 0.0;
        for op in &ops {
            total += h1_form_norm(&xr.mul(op), &window, method)?;
        }
        values.push(total);
    }
    let mut notes = Vec::new();
    if !dropped.is_empty() {
        notes.push(format!("radii beyond {} dropped (window reach)", lim / outer));
    }
    let (mut verdict, fit) = slope_verdict(&kept, &values, true, |vals, fit| slope_below(vals, fit, 0.0));
    if values.last().is_some_and(|v| *v == 0.0) {
        verdict = Verdict::Satisfied;
    }
    Ok(RegularityReport {
        class_tested: RegularityClass::C11LrScan,
        profile: SweepRecord::new("r", kept, values)?,
        verdict,
        fit,
        conjugate_used: u,
        dropped,
        notes,
    })
}

// ---------------------------------------------------------------------------------------------
// witness pairings

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum WitnessKind {
    /// Comb, `(f_N, [V, iA_D] g)` with `f_N^ = 1_[N,N+1] / <N+1>`, `g^ = 1_[0,1]`; normalization
    /// `||f_N||_{H^1} ||g||_{H^1}`.
    CombDilation,
    /// Comb, `(f_N, V g)` with `f_N^ = 1_[N+1,N+2]`, `g^ = 1_[0,1]`; normalization
    /// `||f_N|| ||g||_{H^2}`.
    CombDeltaBound,
    /// Exponential family, `(f, V g_N)` with `f = <x>^-1`, `g_N = e^{|x|/2} chi(e^|x| - 2N pi)`,
    /// `chi` supported in `[pi/4, 3pi/4]`; normalization `||f||_{H^2} ||g_N||`.
    ExponentialDeltaBound,
    /// Exponential family, `(f, x.grad V g_N)` with `g_N = e^{-|x|/2} chi(e^|x| - 2N pi)`, `chi`
    /// supported in `[0, pi/4]`; normalization `||f||_{H^1} ||g_N||_{H^1}`.
    ExponentialDilation,
    /// Any closed-form potential, `(f_R, x V' g_R)` with `f_R = chi((x-R)/w)` and
    /// `g_R = f_R cos(x^alpha)`; the schedule runs over the center `R`.
    PacketDilation { alpha: f64, width: f64 },
}

impl WitnessKind {
    pub fn label(&self) -> String {
        match self {
            WitnessKind::CombDilation => "comb_dilation".into(),
            WitnessKind::CombDeltaBound => "comb_delta_bound".into(),
            WitnessKind::ExponentialDeltaBound => "exponential_delta_bound".into(),
            WitnessKind::ExponentialDilation => "exponential_dilation".into(),
            WitnessKind::PacketDilation { alpha, width } => format!("packet_dilation(alpha={alpha}, width={width})"),
        }
    }
}

/// Pairings against the schedule, with the witness-norm product each pairing is measured against.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WitnessReport {
    pub kind: WitnessKind,
    /// `|pairing|` against `N` (or `R`).
    pub record: SweepRecord,
    pub norm_products: Vec<f64>,
    /// `|pairing| / norm product`.
    pub normalized: Vec<f64>,
    /// Schedule points the grid could not realize.
    pub truncated: Vec<f64>,
    /// Last over first normalized pairing.
    pub growth: f64,
    pub monotone: bool,
}

/// Tabulate a witness pairing along `schedule`. The comb kinds need a 1D `grid`; the others are
/// evaluated by quadrature.
pub fn witness_sequence(
    spec: &PotentialSpec,
    kind: WitnessKind,
    schedule: &[f64],
    grid: Option<&Grid>,
) -> Result<WitnessReport> {
    let mut axis = Vec::new();
    let mut pairs = Vec::new();
    let mut norms = Vec::new();
    let mut truncated = Vec::new();
    match kind {
        WitnessKind::CombDilation | WitnessKind::CombDeltaBound => {
            let g = grid.ok_or_else(|| Error::InvalidParameter("comb witnesses need a grid".into()))?;
            let sequence = match &spec.family {
                Family::FourierComb { sequence, .. } => sequence.clone(),
                Family::Constant { value } if *value == 0.0 => CombSequence::Explicit(Vec::new()),
                _ => return Err(Error::InvalidParameter("comb witnesses need the fourier_comb family".into())),
            };
            let cw = CombWitness::new(spec, &sequence, g)?;
            for &n in schedule {
                match cw.pairing(kind, n) {
                    Some((p, nm)) => {
                        axis.push(n);
                        pairs.push(p);
                        norms.push(nm);
                    }
                    None => truncated.push(n),
                }
            }
        }
        WitnessKind::ExponentialDeltaBound | WitnessKind::ExponentialDilation => {
            let zero = match &spec.family {
                Family::Exponential { .. } => false,
                Family::Constant { value } if *value == 0.0 => true,
                _ => return Err(Error::InvalidParameter("exponential witnesses need the exponential family".into())),
            };
            for &n in schedule {
                if n < 1.0 {
                    return Err(Error::InvalidParameter(format!("witness index must be >= 1, got {n}")));
                }
                let (p, nm) = exponential_witness(kind, n)?;
                axis.push(n);
                pairs.push(if zero { 0.0 } else { p });
                norms.push(nm);
            }
        }
        WitnessKind::PacketDilation { alpha, width } => {
            for &r in schedule {
                let (p, nm) = packet_witness(spec, alpha, width, r)?;
                axis.push(r);
                pairs.push(p);
                norms.push(nm);
            }
        }
    }
    let abs: Vec<f64> = pairs.iter().map(|p| libm::fabs(*p)).collect();
    let normalized: Vec<f64> = abs.iter().zip(&norms).map(|(p, n)| if *n > 0.0 { p / n } else { 0.0 }).collect();
    let growth = match (normalized.first(), normalized.last()) {
        (Some(a), Some(b)) if *a > 0.0 => b / a,
        _ => 0.0,
    };
    let monotone = normalized.windows(2).all(|w| w[1] > w[0]);
    Ok(WitnessReport {
        kind,
        record: SweepRecord::new("n", axis, abs)?.with_meta("potential", spec.label()),
        norm_products: norms,
        normalized,
        truncated,
        growth,
        monotone,
    })
}

struct CombWitness {
    grid: Grid,
    v: Vec<C64>,
    /// `[V, iA_D] = -x V' = V - (qV)'`.
    dil: Vec<C64>,
    g: Vec<C64>,
    g_h1: f64,
    g_h2: f64,
}

impl CombWitness {
    fn new(spec: &PotentialSpec, sequence: &CombSequence, grid: &Grid) -> Result<Self> {
        if grid.dim() != 1 {
            return Err(Error::BadDimension(grid.dim()));
        }
        let v = if matches!(spec.family, Family::FourierComb { .. }) {
            realize(spec, grid)?.values
        } else {
            vec![C64::new(0.0, 0.0); grid.len()]
        };
        let sym = comb_symbol(sequence, grid);
        let dsym: Vec<C64> = sym.iter().zip(grid.momenta()).map(|(s, k)| s * I * k[0]).collect();
        let dqv = grid.inverse(&dsym);
        let dil = v.iter().zip(&dqv).map(|(a, b)| C64::new(a.re - b.re, 0.0)).collect();
        let (g, g_h1, g_h2) = momentum_indicator(grid, 0.0, 1.0, 1.0);
        Ok(CombWitness { grid: grid.clone(), v, dil, g, g_h1, g_h2 })
    }

    fn pairing(&self, kind: WitnessKind, n: f64) -> Option<(f64, f64)> {
        let (lo, scale) = match kind {
            WitnessKind::CombDilation => (n, 1.0 / libm::sqrt(1.0 + (n + 1.0) * (n + 1.0))),
            _ => (n + 1.0, 1.0),
        };
        if lo + 1.0 + 1.0 > self.grid.k_max() {
            return None;
        }
        let (f, f_h1, _) = momentum_indicator(&self.grid, lo, lo + 1.0, scale);
        let f_l2 = crate::lattice::norm(&self.grid, &f);
        let (m, nm) = match kind {
            WitnessKind::CombDilation => (&self.dil, f_h1 * self.g_h1),
            _ => (&self.v, f_l2 * self.g_h2),
        };
        let mg: Vec<C64> = m.iter().zip(&self.g).map(|(a, b)| a * b).collect();
        Some((inner(&self.grid, &f, &mg).norm(), nm))
    }
}

/// Position values of `scale 1_[lo, hi)(k)` together with its H^1 and H^2 norms.
fn momentum_indicator(grid: &Grid, lo: f64, hi: f64, scale: f64) -> (Vec<C64>, f64, f64) {
    let eps = 1e-9 * grid.momentum_spacing();
    let hat = grid.sample_symbol(|k| C64::new(if k[0] >= lo - eps && k[0] < hi - eps { scale } else { 0.0 }, 0.0));
    let f = grid.inverse(&hat);
    let h1 = crate::lattice::norm(grid, &grid.apply_symbol(&grid.sample_symbol(|k| C64::new(libm::sqrt(1.0 + sq(k)), 0.0)), &f));
    let h2 = crate::lattice::norm(grid, &grid.apply_symbol(&grid.sample_symbol(|k| C64::new(1.0 + sq(k), 0.0)), &f));
    (f, h1, h2)
}

fn chi_delta(s: f64) -> (f64, f64) {
    // supported in [pi/4, 3pi/4], peak 1 at pi/2
    let c = core::f64::consts::FRAC_PI_2;
    let w = core::f64::consts::FRAC_PI_4;
    (bump((s - c) / w), bump_derivative((s - c) / w) / w)
}

fn chi_dilation(s: f64) -> (f64, f64) {
    // supported in [0, pi/4], peak 1 at pi/8
    let c = core::f64::consts::PI / 8.0;
    (bump((s - c) / c), bump_derivative((s - c) / c) / c)
}

fn panels<F: Fn(f64) -> f64>(a: f64, b: f64, n: usize, f: F) -> f64 {
    let h = (b - a) / n as f64;
    (0..n).map(|j| gauss_legendre(a + j as f64 * h, a + (j + 1) as f64 * h, &f)).sum()
}

/// `||<x>^-1||_{H^1}` and `||<x>^-1||_{H^2}` on the line, by quadrature.
fn reciprocal_bracket_norms() -> (f64, f64) {
    let f1 = |x: f64| { let b = 1.0 + x * x; -x / (b * libm::sqrt(b)) };
    let f2 = |x: f64| { let b = 1.0 + x * x; (2.0 * x * x - 1.0) / (b * b * libm::sqrt(b)) };
    // integrands decay at least like x^-2; split off a mapped tail
    let part = |h: &dyn Fn(f64) -> f64| {
        let core = panels(0.0, 64.0, 512, h);
        // x = 64 / t on (0, 1]
        let tail = panels(0.0, 1.0, 256, |t| if t == 0.0 { 0.0 } else { h(64.0 / t) * 64.0 / (t * t) });
        2.0 * (core + tail)
    };
    let l2 = part(&|x| { let v = 1.0 / libm::sqrt(1.0 + x * x); v * v });
    let d1 = part(&|x| f1(x) * f1(x));
    let d2 = part(&|x| f2(x) * f2(x));
    (libm::sqrt(l2 + d1), libm::sqrt(l2 + 2.0 * d1 + d2))
}

/// Exponential-family pairings by quadrature in `sigma = e^|x| - 2 N pi` (both half lines).
/// The cutoff vanishes on the witness support for every `N >= 1`.
fn exponential_witness(kind: WitnessKind, n: f64) -> Result<(f64, f64)> {
    let base = 2.0 * core::f64::consts::PI * n;
    let (h1, h2) = reciprocal_bracket_norms();
    let bracket = |x: f64| libm::sqrt(1.0 + x * x);
    match kind {
        WitnessKind::ExponentialDeltaBound => {
            let (a, b) = (core::f64::consts::FRAC_PI_4, 3.0 * core::f64::consts::FRAC_PI_4);
            let p = panels(a, b, 64, |s| {
                let e = s + base;
                let x = libm::log(e);
                libm::pow(e, 0.25) * libm::sin(e) * chi_delta(s).0 / bracket(x)
            });
            let g2 = panels(a, b, 64, |s| chi_delta(s).0 * chi_delta(s).0);
            Ok((2.0 * p, h2 * libm::sqrt(2.0 * g2)))
        }
        WitnessKind::ExponentialDilation => {
            let (a, b) = (0.0, core::f64::consts::FRAC_PI_4);
            let p = panels(a, b, 64, |s| {
                let e = s + base;
                let x = libm::log(e);
                let ratio = x / bracket(x);
                ratio * (libm::pow(e, 0.25) * libm::cos(e) + 0.75 * libm::pow(e, -0.75) * libm::sin(e)) * chi_dilation(s).0
            });
            let g = panels(a, b, 64, |s| {
                let e = s + base;
                let (c, dc) = chi_dilation(s);
                let d = dc - c / (2.0 * e);
                c * c / (e * e) + d * d
            });
            Ok((2.0 * p, h1 * libm::sqrt(2.0 * g)))
        }
        _ => Err(Error::InvalidParameter("not an exponential witness".into())),
    }
}

/// The same pairings as [`exponential_witness`], summed on a grid; small-`N` cross-check.
pub fn exponential_witness_on_grid(kind: WitnessKind, n: f64, grid: &Grid) -> Result<f64> {
    let spec = PotentialSpec::exponential(Cutoff::unit());
    let v = realize(&spec, grid)?;
    let base = 2.0 * core::f64::consts::PI * n;
    let mut total = 0.0;
    for i in 0..grid.len() {
        let x = grid.coord(i, 0);
        let ax = libm::fabs(x);
        let e = libm::exp(ax);
        let f = 1.0 / libm::sqrt(1.0 + x * x);
        let term = match kind {
            WitnessKind::ExponentialDeltaBound => f * v.values[i].re * libm::exp(0.5 * ax) * chi_delta(e - base).0,
            WitnessKind::ExponentialDilation => {
                let xdv = (1.0 - Cutoff::unit().eval(ax))
                    * ax
                    * (libm::exp(1.75 * ax) * libm::cos(e) + 0.75 * libm::exp(0.75 * ax) * libm::sin(e));
                f * xdv * libm::exp(-0.5 * ax) * chi_dilation(e - base).0
            }
            _ => return Err(Error::InvalidParameter("not an exponential witness".into())),
        };
        total += term;
    }
    Ok(total * grid.weight())
}

/// `(f_R, x V' g_R)` and `||f_R||_{H^1} ||g_R||_{H^1}` for the packet witness at center `r`.
fn packet_witness(spec: &PotentialSpec, alpha: f64, width: f64, r: f64) -> Result<(f64, f64)> {
    if width <= 0.0 || r - width <= 0.0 {
        return Err(Error::InvalidParameter(format!("packet at {r} with width {width} must stay in x > 0")));
    }
    spec.eval(&[r])?;
    let v = |x: f64| spec.eval(&[x]).unwrap_or(f64::NAN);
    let f = |x: f64| bump((x - r) / width);
    let df = |x: f64| bump_derivative((x - r) / width) / width;
    let ph = |x: f64| libm::pow(x, alpha);
    let dph = |x: f64| alpha * libm::pow(x, alpha - 1.0);
    // closed forms are smooth on the packet support; fourth-order central difference on the
    // local oscillation scale
    let h = 1e-3 / (1.0 + libm::fabs(dph(r + width)));
    let dv = |x: f64| (8.0 * (v(x + h) - v(x - h)) - (v(x + 2.0 * h) - v(x - 2.0 * h))) / (12.0 * h);
    // enough panels to resolve cos(x^alpha) across the support
    let freq = dph(r + width).max(1.0);
    let n = (64.0 * freq * width).max(64.0) as usize;
    let (a, b) = (r - width, r + width);
    let p = panels(a, b, n, |x| f(x) * x * dv(x) * f(x) * libm::cos(ph(x)));
    if !p.is_finite() {
        return Err(Error::InvalidParameter(format!("potential not evaluable near {r}")));
    }
    let f_h1 = libm::sqrt(panels(a, b, n, |x| f(x) * f(x) + df(x) * df(x)));
    let g_h1 = libm::sqrt(panels(a, b, n, |x| {
        let g = f(x) * libm::cos(ph(x));
        let dg = df(x) * libm::cos(ph(x)) - f(x) * dph(x) * libm::sin(ph(x));
        g * g + dg * dg
    }));
    Ok((p, f_h1 * g_h1))
}
