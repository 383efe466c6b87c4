//! Vector fields `u`, the conjugate operator `A_u = u(p).q + (i/2)(div u)(p)`, the classical flow
//! of `u` with its Jacobian, and the unitary group `e^{i tau A_u}` realized by momentum transport.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lattice::Grid;
use crate::linop::{LinOp, MatrixFree};
use crate::norms::{sq, weight_op};
use crate::C64;

/// Closed-form field supplied by the caller.
#[derive(Clone)]
pub struct CustomField {
    pub name: String,
    pub u: Arc<dyn Fn(&[f64]) -> [f64; 3] + Send + Sync>,
    pub jacobian: Arc<dyn Fn(&[f64]) -> [[f64; 3]; 3] + Send + Sync>,
    /// `sup |u|`, `None` if unbounded.
    pub sup_u: Option<f64>,
    pub sup_du: f64,
}

impl core::fmt::Debug for CustomField {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "CustomField({})", self.name)
    }
}

impl PartialEq for CustomField {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && Arc::ptr_eq(&self.u, &other.u)
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", tag = "kind"))]
pub enum VectorField {
    /// `u_j(k) = sin(a k_j)`.
    Nakamura { a: f64 },
    /// `u(k) = k`.
    Dilation,
    /// `u_j(k) = arctan(k_j)`.
    Arctan,
    /// `u(k) = k / <k>`.
    Normalized,
    /// `u(k) = k <k>^{-power-1}`.
    Decay { power: f64 },
    #[cfg_attr(feature = "serde", serde(skip))]
    Custom(CustomField),
}

impl VectorField {
    /// The identically zero field.
    pub fn zero() -> Self {
        VectorField::Custom(CustomField {
            name: "zero".into(),
            u: Arc::new(|_| [0.0; 3]),
            jacobian: Arc::new(|_| [[0.0; 3]; 3]),
            sup_u: Some(0.0),
            sup_du: 0.0,
        })
    }

    pub fn label(&self) -> String {
        match self {
            VectorField::Nakamura { a } => format!("nakamura(a={a})"),
            VectorField::Dilation => "dilation".into(),
            VectorField::Arctan => "arctan".into(),
            VectorField::Normalized => "normalized".into(),
            VectorField::Decay { power } => format!("decay({power})"),
            VectorField::Custom(c) => format!("custom({})", c.name),
        }
    }

    /// `u(k)`; only the first `k.len()` components are meaningful.
    pub fn eval(&self, k: &[f64]) -> [f64; 3] {
        let mut out = [0.0; 3];
        match self {
            VectorField::Nakamura { a } => k.iter().enumerate().for_each(|(j, v)| out[j] = libm::sin(a * v)),
            VectorField::Dilation => k.iter().enumerate().for_each(|(j, v)| out[j] = *v),
            VectorField::Arctan => k.iter().enumerate().for_each(|(j, v)| out[j] = libm::atan(*v)),
            VectorField::Normalized => {
                let w = libm::sqrt(1.0 + sq(k));
                k.iter().enumerate().for_each(|(j, v)| out[j] = v / w);
            }
            VectorField::Decay { power } => {
                let w = libm::pow(1.0 + sq(k), -(power + 1.0) / 2.0);
                k.iter().enumerate().for_each(|(j, v)| out[j] = v * w);
            }
            VectorField::Custom(c) => out = (c.u)(k),
        }
        out
    }

    /// `du_i / dk_j`.
    pub fn jacobian(&self, k: &[f64]) -> [[f64; 3]; 3] {
        let mut m = [[0.0; 3]; 3];
        let nu = k.len();
        match self {
            VectorField::Nakamura { a } => (0..nu).for_each(|j| m[j][j] = a * libm::cos(a * k[j])),
            VectorField::Dilation => (0..nu).for_each(|j| m[j][j] = 1.0),
            VectorField::Arctan => (0..nu).for_each(|j| m[j][j] = 1.0 / (1.0 + k[j] * k[j])),
            VectorField::Normalized | VectorField::Decay { .. } => {
                let e = match self {
                    VectorField::Decay { power } => power + 1.0,
                    _ => 1.0,
                };
                let w2 = 1.0 + sq(k);
                let a = libm::pow(w2, -e / 2.0);
                let b = e * libm::pow(w2, -e / 2.0 - 1.0);
                for i in 0..nu {
                    for j in 0..nu {
                        m[i][j] = if i == j { a } else { 0.0 } - b * k[i] * k[j];
                    }
                }
            }
            VectorField::Custom(c) => m = (c.jacobian)(k),
        }
        m
    }

    pub fn divergence(&self, k: &[f64]) -> f64 {
        let m = self.jacobian(k);
        (0..k.len()).map(|j| m[j][j]).sum()
    }

    /// `sup |u|`; `None` for unbounded fields.
    pub fn sup_u(&self) -> Option<f64> {
        match self {
            VectorField::Nakamura { .. } | VectorField::Normalized | VectorField::Decay { .. } => Some(1.0),
            VectorField::Dilation => None,
            VectorField::Arctan => Some(core::f64::consts::FRAC_PI_2),
            VectorField::Custom(c) => c.sup_u,
        }
    }

    /// Upper bound on `sup |u'|` (entrywise).
    pub fn sup_du(&self) -> f64 {
        match self {
            VectorField::Nakamura { a } => libm::fabs(*a),
            VectorField::Dilation | VectorField::Arctan | VectorField::Normalized => 1.0,
            VectorField::Decay { power } => power + 2.0,
            VectorField::Custom(c) => c.sup_du,
        }
    }

    /// Per-axis momentum bound inside which `k.u(k) > 0` is expected (`None`: everywhere).
    pub fn positivity_window(&self) -> Option<f64> {
        match self {
            VectorField::Nakamura { a } => Some(core::f64::consts::PI / libm::fabs(*a)),
            _ => None,
        }
    }
}

/// Sampled membership check for the bounded class: finite sups and `k.u(k) > 0` at every nonzero
/// momentum node inside the field's positivity window.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClassCheck {
    pub bounded: bool,
    pub sampled_sup_u: f64,
    pub sampled_sup_du: f64,
    pub positive: bool,
    pub first_violation: Option<[f64; 3]>,
}

pub fn class_check(u: &VectorField, grid: &Grid) -> ClassCheck {
    let nu = grid.dim();
    let win = u.positivity_window();
    let mut sup_u = 0.0f64;
    let mut sup_du = 0.0f64;
    let mut first = None;
    for i in 0..grid.len() {
        let k = grid.momentum(i);
        let kk = &k[..nu];
        let v = u.eval(kk);
        sup_u = sup_u.max(libm::sqrt(sq(&v[..nu])));
        let jm = u.jacobian(kk);
        for row in jm.iter().take(nu) {
            for e in row.iter().take(nu) {
                sup_du = sup_du.max(libm::fabs(*e));
            }
        }
        let inside = win.is_none_or(|w| kk.iter().all(|c| libm::fabs(*c) < w));
        let dot: f64 = (0..nu).map(|j| kk[j] * v[j]).sum();
        if sq(kk) > 0.0 && inside && dot <= 0.0 && first.is_none() {
            first = Some(k);
        }
    }
    ClassCheck {
        bounded: u.sup_u().is_some(),
        sampled_sup_u: sup_u,
        sampled_sup_du: sup_du,
        positive: first.is_none(),
        first_violation: first,
    }
}

/// `u(p).q + (i/2)(div u)(p)`.
pub fn assemble_a(grid: &Grid, u: &VectorField) -> LinOp {
    let nu = grid.dim();
    let mut terms = Vec::with_capacity(nu + 1);
    for j in 0..nu {
        let m = LinOp::multiplier_fn(grid, |k| C64::new(u.eval(k)[j], 0.0));
        terms.push(m.mul(&LinOp::position(grid, j)));
    }
    terms.push(LinOp::multiplier_fn(grid, |k| C64::new(0.0, 0.5 * u.divergence(k))));
    LinOp::sum(terms).expect("same grid")
}

/// The literal symmetrization `(u(p).q + q.u(p)) / 2`: Hermitian on the lattice, equal to
/// [`assemble_a`] up to the lattice error in `[q, u(p)] = i u'(p)`.
pub fn assemble_a_symmetric(grid: &Grid, u: &VectorField) -> LinOp {
    let nu = grid.dim();
    let mut terms = Vec::with_capacity(2 * nu);
    for j in 0..nu {
        let m = LinOp::multiplier_fn(grid, |k| C64::new(u.eval(k)[j], 0.0));
        let q = LinOp::position(grid, j);
        terms.push(m.mul(&q).scale_re(0.5));
        terms.push(q.mul(&m).scale_re(0.5));
    }
    LinOp::sum(terms).expect("same grid")
}

/// Multiplier `(u . grad h)(p)`, the commutator `[h(p), i A_u]`.
pub fn multiplier_commutator<G: Fn(&[f64]) -> [f64; 3]>(grid: &Grid, u: &VectorField, grad_h: G) -> LinOp {
    let nu = grid.dim();
    LinOp::multiplier_fn(grid, |k| {
        let v = u.eval(k);
        let g = grad_h(k);
        C64::new((0..nu).map(|j| v[j] * g[j]).sum(), 0.0)
    })
}

/// Gradient of `|k|^2`.
pub fn laplacian_gradient(k: &[f64]) -> [f64; 3] {
    let mut g = [0.0; 3];
    k.iter().enumerate().for_each(|(j, v)| g[j] = 2.0 * v);
    g
}

/// `[Delta, i A_u] = 2 p.u(p)` as a multiplier.
pub fn laplacian_commutator(grid: &Grid, u: &VectorField) -> LinOp {
    multiplier_commutator(grid, u, laplacian_gradient)
}

// ---------------------------------------------------------------------------------------------
// flow

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FlowOptions {
    /// Initial (and largest) step; `None` uses `1e-3 min(1, 1/sup|u'|)`.
    pub step: Option<f64>,
    /// Local error tolerance per step, relative to `max(1, |state|)`.
    pub tol: f64,
    /// Smallest admissible step.
    pub min_step: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions { step: None, tol: 1e-13, min_step: 1e-12 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FlowResult {
    pub point: [f64; 3],
    pub jacobian_det: f64,
    pub tau: f64,
}

/// `phi_tau(x)` with `d/dtau phi = u(phi)`, and `J_tau = det phi'_tau` from `dJ/dtau = (div u)(phi) J`.
/// RK4 with step doubling for error control.
pub fn flow(u: &VectorField, x: &[f64], tau: f64, opts: &FlowOptions) -> Result<FlowResult> {
    let nu = x.len();
    let mut y = [0.0; 4];
    y[..nu].copy_from_slice(x);
    y[nu] = 1.0;
    if tau == 0.0 {
        return Ok(pack(&y, nu, 0.0));
    }
    let h_max = opts.step.unwrap_or(1e-3 * (1.0f64).min(1.0 / u.sup_du().max(1e-300)));
    let dir = tau.signum();
    let mut t = 0.0;
    let mut h = h_max;
    let rhs = |s: &[f64; 4]| -> [f64; 4] {
        let v = u.eval(&s[..nu]);
        let mut d = [0.0; 4];
        d[..nu].copy_from_slice(&v[..nu]);
        d[nu] = u.divergence(&s[..nu]) * s[nu];
        d
    };
    let step = |s: &[f64; 4], dt: f64| -> [f64; 4] {
        let k1 = rhs(s);
        let k2 = rhs(&axpy(s, &k1, dt / 2.0));
        let k3 = rhs(&axpy(s, &k2, dt / 2.0));
        let k4 = rhs(&axpy(s, &k3, dt));
        let mut o = *s;
        for i in 0..4 {
            o[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        o
    };
    while dir * (tau - t) > 0.0 {
        let dt = dir * h.min(dir * (tau - t));
        let full = step(&y, dt);
        let half = step(&step(&y, dt / 2.0), dt / 2.0);
        let scale = y.iter().take(nu + 1).fold(1.0f64, |m, v| m.max(libm::fabs(*v)));
        let err = (0..=nu).map(|i| libm::fabs(full[i] - half[i])).fold(0.0, f64::max);
        if err <= opts.tol * scale {
            // Richardson: the half-step result plus its error estimate
            for i in 0..=nu {
                y[i] = half[i] + (half[i] - full[i]) / 15.0;
            }
            t += dt;
            if err < 0.01 * opts.tol * scale {
                h = (2.0 * h).min(h_max);
            }
        } else {
            h /= 2.0;
            if h < opts.min_step {
                return Err(Error::StepUnderflow { tau: t, state: y[..=nu].to_vec() });
            }
        }
    }
    Ok(pack(&y, nu, tau))
}

fn axpy(s: &[f64; 4], d: &[f64; 4], c: f64) -> [f64; 4] {
    let mut o = *s;
    for i in 0..4 {
        o[i] += c * d[i];
    }
    o
}

fn pack(y: &[f64; 4], nu: usize, tau: f64) -> FlowResult {
    let mut p = [0.0; 3];
    p[..nu].copy_from_slice(&y[..nu]);
    FlowResult { point: p, jacobian_det: y[nu], tau }
}

/// Closed-form flow of `u = sin` in 1D: `2 arctan(e^tau tan(x/2))` on `(-pi, pi)`.
pub fn sine_flow_closed_form(x: f64, tau: f64) -> f64 {
    2.0 * libm::atan(libm::exp(tau) * libm::tan(x / 2.0))
}

/// `d/dx` of [`sine_flow_closed_form`].
pub fn sine_flow_closed_form_derivative(x: f64, tau: f64) -> f64 {
    let t = libm::tan(x / 2.0);
    let e = libm::exp(tau);
    e * (1.0 + t * t) / (1.0 + e * e * t * t)
}

// ---------------------------------------------------------------------------------------------
// transport group

/// How transported momentum samples are read off the lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Interpolation {
    /// Local Lagrange stencil of the given even width (4 = cubic).
    Lagrange(usize),
    /// Exact evaluation of the transform of the node data at off-lattice momenta. Costs
    /// `O(len^2)`; capped at the dense size limit.
    Trigonometric,
}

/// Options for [`group_element`].
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TransportOptions {
    pub interpolation: Interpolation,
    pub flow: FlowOptions,
    /// Largest dilation factor `e^{|tau|}` accepted for the unbounded field.
    pub dilation_limit: f64,
}

impl TransportOptions {
    pub fn with_interpolation(interpolation: Interpolation) -> Self {
        TransportOptions { interpolation, ..Default::default() }
    }
}

impl Default for TransportOptions {
    fn default() -> Self {
        TransportOptions { interpolation: Interpolation::Trigonometric, flow: FlowOptions::default(), dilation_limit: 1.25 }
    }
}

/// `e^{i tau A_u}` as a matrix-free operator: on the momentum side it is
/// `g(k) = J_{-tau}(k)^{1/2} f(phi_{-tau}(k))`, with `f` interpolated on the momentum lattice.
/// Points carried outside the momentum window read zero when they stay within a guard band of
/// `max(4 dk, k_max / 4)`; farther escapes are errors.
/// The Lagrange path is `O(len)` per application; the trigonometric path is exact on the lattice
/// data and serves as a small-grid reference.
pub fn group_element(grid: &Grid, u: &VectorField, tau: f64, opts: &TransportOptions) -> Result<LinOp> {
    if tau == 0.0 {
        return Ok(LinOp::identity(grid));
    }
    match opts.interpolation {
        Interpolation::Lagrange(w) if w < 2 || w % 2 != 0 || w > grid.points_per_axis() => {
            return Err(Error::InvalidParameter(format!("stencil must be even and at least 2, got {w}")));
        }
        Interpolation::Trigonometric if grid.len() > crate::linop::DENSE_CAP => {
            return Err(Error::SizeCap { size: grid.len(), cap: crate::linop::DENSE_CAP });
        }
        _ => {}
    }
    if u.sup_u().is_none() && libm::exp(libm::fabs(tau)) > opts.dilation_limit {
        return Err(Error::InvalidParameter(format!(
            "unbounded field: e^|tau| = {} exceeds the transport limit {}",
            libm::exp(libm::fabs(tau)),
            opts.dilation_limit
        )));
    }
    let nu = grid.dim();
    let dk = grid.momentum_spacing();
    let kmax = grid.k_max();
    let guard = (4.0 * dk).max(0.25 * kmax);
    let mut stencils = Vec::with_capacity(grid.len());
    let mut targets = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let k = grid.momentum(i);
        let fr = flow(u, &k[..nu], -tau, &opts.flow)?;
        let p = fr.point;
        let lo = -kmax;
        let hi = kmax - dk;
        let mut outside = false;
        for &c in p.iter().take(nu) {
            if c < lo - 1e-12 || c > hi + 1e-12 {
                if c < lo - guard || c > hi + guard {
                    return Err(Error::FlowEscapes { index: i, momentum: c });
                }
                outside = true;
            }
        }
        if outside {
            stencils.push(None);
            targets.push(None);
            continue;
        }
        let w = libm::sqrt(fr.jacobian_det.max(0.0));
        match opts.interpolation {
            Interpolation::Lagrange(width) => stencils.push(Some((lagrange_stencil(grid, &p[..nu], width), w))),
            Interpolation::Trigonometric => targets.push(Some((p, w))),
        }
    }
    match opts.interpolation {
        Interpolation::Lagrange(_) => Ok(LinOp::custom(grid, Arc::new(Transport { grid: grid.clone(), stencils }))),
        Interpolation::Trigonometric => Ok(LinOp::custom(grid, Arc::new(TrigTransport::new(grid, &targets)))),
    }
}

/// Dense realization: `g_hat(k_n) = J^{1/2} c sum_x f(x) e^{-i phi(k_n).x}`.
struct TrigTransport {
    grid: Grid,
    rows: nalgebra::DMatrix<C64>,
}

impl TrigTransport {
    fn new(grid: &Grid, targets: &[Option<([f64; 3], f64)>]) -> Self {
        let n = grid.len();
        let nu = grid.dim();
        let c = libm::pow(grid.spacing() / libm::sqrt(2.0 * core::f64::consts::PI), nu as f64);
        let xs = grid.positions();
        let rows = nalgebra::DMatrix::from_fn(n, n, |r, col| match &targets[r] {
            None => C64::new(0.0, 0.0),
            Some((p, w)) => {
                let t: f64 = -(0..nu).map(|a| p[a] * xs[col][a]).sum::<f64>();
                C64::new(libm::cos(t), libm::sin(t)) * (c * w)
            }
        });
        TrigTransport { grid: grid.clone(), rows }
    }
}

impl MatrixFree for TrigTransport {
    fn apply(&self, f: &[C64]) -> Vec<C64> {
        let v = nalgebra::DVector::from_column_slice(f);
        let ghat = &self.rows * v;
        self.grid.inverse(ghat.as_slice())
    }
    fn apply_adjoint(&self, f: &[C64]) -> Vec<C64> {
        // (F^-1)^* = (dk/h)^nu F as matrices
        let nu = self.grid.dim() as f64;
        let s = libm::pow(self.grid.momentum_spacing() / self.grid.spacing(), nu);
        let fh: Vec<C64> = self.grid.forward(f).into_iter().map(|z| z * s).collect();
        let out = self.rows.adjoint() * nalgebra::DVector::from_column_slice(&fh);
        out.as_slice().to_vec()
    }
}

/// Tensor-product Lagrange weights at `p`: list of (flat storage index, weight).
fn lagrange_stencil(grid: &Grid, p: &[f64], width: usize) -> Vec<(usize, f64)> {
    let n = grid.points_per_axis();
    let dk = grid.momentum_spacing();
    let half = n as i64 / 2;
    let mut axes: Vec<Vec<(usize, f64)>> = Vec::new();
    for &c in p {
        // fractional mode index in natural order (-n/2 .. n/2-1)
        let s = c / dk;
        let base = libm::floor(s) as i64 - (width as i64 / 2 - 1);
        let nodes: Vec<i64> = (0..width as i64).map(|j| base + j).collect();
        let mut ax = Vec::with_capacity(width);
        for (a, &m) in nodes.iter().enumerate() {
            let mut w = 1.0;
            for (b, &mb) in nodes.iter().enumerate() {
                if a != b {
                    w *= (s - mb as f64) / (m - mb) as f64;
                }
            }
            // modes beyond the lattice read zero
            if m < -half || m >= half {
                continue;
            }
            ax.push((m.rem_euclid(n as i64) as usize, w));
        }
        axes.push(ax);
    }
    let mut out: Vec<(usize, f64)> = vec![(0, 1.0)];
    for (axis, ax) in axes.iter().enumerate() {
        let stride = n.pow(axis as u32);
        let mut next = Vec::with_capacity(out.len() * ax.len());
        for (idx, w) in &out {
            for (j, wj) in ax {
                next.push((idx + j * stride, w * wj));
            }
        }
        out = next;
    }
    out
}

struct Transport {
    grid: Grid,
    stencils: Vec<Option<(Vec<(usize, f64)>, f64)>>,
}

impl Transport {
    fn momentum_map(&self, fhat: &[C64]) -> Vec<C64> {
        self.stencils
            .iter()
            .map(|s| match s {
                None => C64::new(0.0, 0.0),
                Some((st, w)) => st.iter().map(|(j, c)| fhat[*j] * *c).sum::<C64>() * *w,
            })
            .collect()
    }

    fn momentum_map_adjoint(&self, ghat: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); ghat.len()];
        for (i, s) in self.stencils.iter().enumerate() {
            if let Some((st, w)) = s {
                for (j, c) in st {
                    out[*j] += ghat[i] * (*c * *w);
                }
            }
        }
        out
    }
}

impl MatrixFree for Transport {
    fn apply(&self, f: &[C64]) -> Vec<C64> {
        self.grid.inverse(&self.momentum_map(&self.grid.forward(f)))
    }
    fn apply_adjoint(&self, f: &[C64]) -> Vec<C64> {
        // forward and inverse are adjoint up to the quadrature weights, which cancel here
        self.grid.inverse(&self.momentum_map_adjoint(&self.grid.forward(f)))
    }
}

/// Growth factor `||W e^{i tau A_u} f|| / ||W f||` for `W = <p>^t <q>^s`.
pub fn invariance_growth(grid: &Grid, u: &VectorField, tau: f64, t: f64, s: f64, f: &[C64]) -> Result<f64> {
    let g = group_element(grid, u, tau, &TransportOptions::default())?;
    let w = weight_op(grid, t, s);
    let num = crate::lattice::vec_norm(&w.apply_vec(&g.apply_vec(f)));
    let den = crate::lattice::vec_norm(&w.apply_vec(f));
    Ok(num / den)
}
