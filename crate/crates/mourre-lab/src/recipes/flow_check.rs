use std::collections::BTreeMap;
use std::f64::consts::PI;

use anyhow::{bail, Result};
use mourre_core::conjugate::{flow, sine_flow_closed_form, FlowOptions, VectorField};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::RecipeOutput;
use crate::config::RunConfig;
use crate::output::{fmt_f64, Table};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowCheckParams {
    /// Only `nakamura` has the closed form `(2/a) arctan(e^{a tau} tan(a x / 2))`.
    pub u: VectorField,
    pub taus: Vec<f64>,
    /// Scan of `x` over `(x_margin, pi/a - x_margin)`.
    pub x_margin: f64,
    pub x_points: usize,
    pub tol: f64,
    pub group_tol: f64,
    pub options: FlowOptions,
}

impl Default for FlowCheckParams {
    fn default() -> Self {
        FlowCheckParams {
            u: VectorField::Nakamura { a: 1.0 },
            taus: vec![-2.0, -1.5, -1.0, -0.5, 0.5, 1.0, 1.5, 2.0],
            x_margin: 0.05,
            x_points: 40,
            tol: 1e-8,
            group_tol: 1e-7,
            options: FlowOptions::default(),
        }
    }
}

struct TauResult {
    rows: Vec<(f64, f64, f64, f64)>,
    group: f64,
    fixed: f64,
}

pub fn run(_cfg: &RunConfig, p: &FlowCheckParams) -> Result<RecipeOutput> {
    let a = match p.u {
        VectorField::Nakamura { a } if a > 0.0 => a,
        _ => bail!("flow-check compares against the closed form of the Nakamura field, got {}", p.u.label()),
    };
    if p.x_points < 2 {
        bail!("x_points must be at least 2");
    }
    let top = PI / a;
    let xs: Vec<f64> =
        (0..p.x_points).map(|i| p.x_margin + (top - 2.0 * p.x_margin) * i as f64 / (p.x_points - 1) as f64).collect();
    let per_tau: Vec<TauResult> = p
        .taus
        .par_iter()
        .map(|&tau| {
            let mut rows = Vec::with_capacity(xs.len());
            let mut group = 0.0f64;
            for &x in &xs {
                let got = flow(&p.u, &[x], tau, &p.options)?.point[0];
                let exact = sine_flow_closed_form(a * x, a * tau) / a;
                rows.push((tau, x, got, exact));
                let half = flow(&p.u, &[x], 0.5 * tau, &p.options)?.point[0];
                let twice = flow(&p.u, &[half], 0.5 * tau, &p.options)?.point[0];
                group = group.max((twice - got).abs());
            }
            let fixed = [0.0, top]
                .iter()
                .map(|&x0| flow(&p.u, &[x0], tau, &p.options).map(|r| (r.point[0] - x0).abs()))
                .collect::<Result<Vec<f64>, _>>()?
                .into_iter()
                .fold(0.0, f64::max);
            Ok(TauResult { rows, group, fixed })
        })
        .collect::<Result<_>>()?;
    let mut table = Table::new("flow", &["tau", "x", "flow", "closed_form", "abs_error"]);
    let mut laws = Table::new("group_law", &["tau", "group_defect", "fixed_point_drift"]);
    let (mut max_err, mut max_group, mut max_fixed) = (0.0f64, 0.0f64, 0.0f64);
    for (tau, r) in p.taus.iter().zip(&per_tau) {
        for &(t, x, got, exact) in &r.rows {
            let e = (got - exact).abs();
            max_err = max_err.max(e);
            table.push(vec![t.into(), x.into(), got.into(), exact.into(), e.into()]);
        }
        laws.push(vec![(*tau).into(), r.group.into(), r.fixed.into()]);
        max_group = max_group.max(r.group);
        max_fixed = max_fixed.max(r.fixed);
    }
    let mut points = BTreeMap::new();
    let pass = |ok: bool| if ok { "satisfied" } else { "violated" }.to_string();
    points.insert("closed-form".into(), pass(max_err <= p.tol));
    points.insert("group-law".into(), pass(max_group <= p.group_tol));
    points.insert("fixed-points".into(), pass(max_fixed <= p.tol));
    let lines = vec![
        format!("  max |flow - closed form| {}", fmt_f64(max_err)),
        format!("  max group-law defect {}", fmt_f64(max_group)),
        format!("  max fixed-point drift {}", fmt_f64(max_fixed)),
    ];
    let summary = json!({
        "field": p.u.label(),
        "max_abs_error": max_err,
        "max_group_defect": max_group,
        "max_fixed_point_drift": max_fixed,
    });
    Ok(RecipeOutput { verdict: super::overall(&points), points, tables: vec![table, laws], summary, lines })
}
