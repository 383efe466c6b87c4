use std::collections::BTreeMap;

use anyhow::Result;
use mourre_core::commutator::{
    a_translation_commutator, delta, first_commutator_an, generic_commutator, nakamura_component, second_commutator_an,
    translation, wrap_mask,
};
use mourre_core::conjugate::{assemble_a, laplacian_commutator, VectorField};
use mourre_core::linop::dense_norm;
use mourre_core::norms::{dense_form_norm, form_norm, laplacian, start_vector, NormMethod, TestWindow};
use mourre_core::potentials::{realize, Cutoff, PotentialSpec};
use mourre_core::{Grid, LinOp, C64};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::RecipeOutput;
use crate::config::RunConfig;
use crate::output::{fmt_f64, Table};

const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CommutatorCheckParams {
    /// Nakamura step.
    pub a: f64,
    /// Random diagonal potentials per dense-oracle check.
    pub samples: usize,
    /// Oracle grid: `oracle_n` nodes on a box of length `oracle_l`.
    pub oracle_n: usize,
    pub oracle_l: f64,
    /// Fields for the multiplier identity `[Delta, iA_u] = 2p.u(p)`, run on the main grid.
    pub fields: Vec<VectorField>,
    pub identity_tol: f64,
    pub oracle_tol: f64,
    pub leibniz_tol: f64,
    /// Grid for the `||delta(V)|| <= a ||[p, V]||` catalog.
    pub bound_n: usize,
    pub bound_l: f64,
}

impl Default for CommutatorCheckParams {
    fn default() -> Self {
        CommutatorCheckParams {
            a: 1.0,
            samples: 10,
            oracle_n: 32,
            oracle_l: 32.0,
            fields: vec![VectorField::Nakamura { a: 1.0 }, VectorField::Arctan],
            identity_tol: 1e-8,
            oracle_tol: 1e-8,
            leibniz_tol: 1e-12,
            bound_n: 128,
            bound_l: 32.0,
        }
    }
}

struct Row {
    check: &'static str,
    case: String,
    value: f64,
    tol: f64,
}

impl Row {
    fn pass(&self) -> bool {
        self.value <= self.tol
    }
}

fn dense(op: &LinOp) -> Result<DMatrix<C64>> {
    Ok(op.to_dense()?)
}

/// Inner-window form distance, relative to the oracle's size.
fn inner_err(g: &Grid, got: &DMatrix<C64>, oracle: &DMatrix<C64>) -> Result<f64> {
    Ok(dense_form_norm(g, &(got - oracle), &TestWindow::sharp(0.5))? / dense_norm(oracle).max(1.0))
}

fn random_diagonal(g: &Grid, seed: u64) -> LinOp {
    let v: Vec<f64> = start_vector(g.len(), seed).iter().map(|c| c.re).collect();
    LinOp::diagonal_real(g, &v)
}

fn random_dense(n: usize, seed: u64) -> DMatrix<C64> {
    let v = start_vector(n * n, seed);
    DMatrix::from_fn(n, n, |r, c| v[r * n + c])
}

fn catalog() -> Vec<PotentialSpec> {
    vec![
        PotentialSpec::decay(1.0),
        PotentialSpec::decay(2.0),
        PotentialSpec::decay(3.0),
        PotentialSpec::oscillating(1.5, 1.0).with_taper(6.0),
        PotentialSpec::oscillating(2.0, 1.0).with_taper(6.0),
        PotentialSpec::exponential(Cutoff::unit()).with_taper(2.5),
        PotentialSpec::constant(1.0),
        PotentialSpec::custom("gauss", |x| (-x[0] * x[0]).exp()),
        PotentialSpec::custom("wide_gauss", |x| 3.0 * (-x[0] * x[0] / 20.0).exp()),
        PotentialSpec::custom("cos_packet", |x| (2.0 * x[0]).cos() * (-x[0] * x[0] / 8.0).exp()),
    ]
}

fn identity_rows(g: &Grid, p: &CommutatorCheckParams) -> Result<Vec<Row>> {
    p.fields
        .par_iter()
        .map(|u| {
            let c = generic_commutator(&laplacian(g), &assemble_a(g, u)).scale(I);
            let diff = c.sub(&laplacian_commutator(g, u));
            let err = form_norm(&diff, &TestWindow::band_limited(), NormMethod::default())?;
            Ok(Row { check: "multiplier-identity", case: u.label(), value: err, tol: p.identity_tol })
        })
        .collect()
}

fn oracle_rows(p: &CommutatorCheckParams, seed: u64) -> Result<Vec<Row>> {
    let g = Grid::centered(1, p.oracle_n, p.oracle_l / 2.0)?;
    let ia = dense(&nakamura_component(&g, p.a, 0).scale(I))?;
    let ia2 = &ia * C64::new(2.0, 0.0);
    let t = dense(&translation(&g, p.a, 0))?;
    let mut rows = Vec::new();
    let oracle = &ia * &t - &t * &ia;
    let got = dense(&a_translation_commutator(&g, p.a, 0, 0))?;
    rows.push(Row { check: "translation-commutator", case: "T".into(), value: inner_err(&g, &got, &oracle)?, tol: p.oracle_tol });
    let per_sample: Vec<Vec<Row>> = (0..p.samples as u64)
        .into_par_iter()
        .map(|s| {
            let v = random_diagonal(&g, seed.wrapping_mul(1000).wrapping_add(s));
            let vd = dense(&v)?;
            let first = &ia2 * &vd - &vd * &ia2;
            let e1 = inner_err(&g, &dense(&first_commutator_an(&v, p.a, 0))?, &first)?;
            let inner_c = &ia * &vd - &vd * &ia;
            let second = &ia * &inner_c - &inner_c * &ia;
            let e2 = inner_err(&g, &dense(&second_commutator_an(&v, p.a, 0, 0))?, &second)?;
            Ok(vec![
                Row { check: "first-commutator", case: format!("random-{s}"), value: e1, tol: p.oracle_tol },
                Row { check: "second-commutator", case: format!("random-{s}"), value: e2, tol: p.oracle_tol },
            ])
        })
        .collect::<Result<_>>()?;
    rows.extend(per_sample.into_iter().flatten());
    Ok(rows)
}

fn delta_rows(p: &CommutatorCheckParams, seed: u64) -> Result<Vec<Row>> {
    let g = Grid::centered(1, p.oracle_n, p.oracle_l / 2.0)?;
    let mut rows = Vec::new();
    // delta(q) = a away from the seam, exactly
    let d = dense(&delta(&LinOp::position(&g, 0), p.a, 0))?;
    let wrap = wrap_mask(&g, p.a, 0);
    let dev = (0..g.len()).filter(|&i| !wrap[i]).map(|i| (d[(i, i)] - C64::new(p.a, 0.0)).norm()).fold(0.0, f64::max);
    rows.push(Row { check: "delta-coordinate", case: "q".into(), value: dev, tol: 0.0 });
    let n = g.len();
    let t = translation(&g, p.a, 0);
    for k in 0..3u64 {
        let m = LinOp::dense(&g, random_dense(n, seed.wrapping_mul(1000).wrapping_add(500 + 2 * k)));
        let nn = LinOp::dense(&g, random_dense(n, seed.wrapping_mul(1000).wrapping_add(501 + 2 * k)));
        let lhs = dense(&delta(&m.mul(&nn), p.a, 0))?;
        let tnt = LinOp::compose(vec![t.clone(), nn.clone(), t.adjoint()])?;
        let rhs = dense(&delta(&m, p.a, 0).mul(&tnt).add(&m.mul(&delta(&nn, p.a, 0))))?;
        let rel = dense_norm(&(&lhs - &rhs)) / dense_norm(&lhs);
        rows.push(Row { check: "delta-leibniz", case: format!("random-{k}"), value: rel, tol: p.leibniz_tol });
    }
    let bg = Grid::centered(1, p.bound_n, p.bound_l / 2.0)?;
    let mom = LinOp::momentum(&bg, 0);
    let bound: Vec<Row> = catalog()
        .par_iter()
        .map(|spec| {
            let v = LinOp::diagonal(&bg, realize(spec, &bg)?.values);
            let lhs = dense_norm(&dense(&delta(&v, p.a, 0))?);
            let rhs = p.a * dense_norm(&dense(&mom.commutator(&v))?);
            // ratio - 1 <= 0 when the bound holds
            let excess = if rhs > 0.0 { lhs / rhs - 1.0 } else if lhs <= 1e-13 { -1.0 } else { f64::INFINITY };
            Ok(Row { check: "delta-bound", case: spec.label(), value: excess, tol: 1e-10 })
        })
        .collect::<Result<_>>()?;
    rows.extend(bound);
    Ok(rows)
}

pub fn run(cfg: &RunConfig, p: &CommutatorCheckParams) -> Result<RecipeOutput> {
    let g = cfg.grid.build()?;
    let ((id, or), de) =
        rayon::join(|| rayon::join(|| identity_rows(&g, p), || oracle_rows(p, cfg.seed)), || delta_rows(p, cfg.seed));
    let rows: Vec<Row> = id?.into_iter().chain(or?).chain(de?).collect();
    let mut table = Table::new("checks", &["check", "case", "value", "tol", "pass"]);
    let mut points: BTreeMap<String, String> = BTreeMap::new();
    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
    for r in &rows {
        table.push(vec![r.check.into(), r.case.clone().into(), r.value.into(), r.tol.into(), r.pass().into()]);
        let e = points.entry(r.check.to_string()).or_insert_with(|| "satisfied".into());
        if !r.pass() {
            *e = "violated".into();
        }
        let w = worst.entry(r.check).or_insert(f64::NEG_INFINITY);
        *w = w.max(r.value);
    }
    let lines = worst.iter().map(|(k, v)| format!("  {k}: worst {}  ({})", fmt_f64(*v), points[*k])).collect();
    let summary = json!({ "worst": worst, "checks": rows.len() });
    Ok(RecipeOutput { verdict: super::overall(&points), points, tables: vec![table], summary, lines })
}
