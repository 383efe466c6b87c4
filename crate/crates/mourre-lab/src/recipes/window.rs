use std::collections::BTreeMap;

use anyhow::Result;
use mourre_core::conjugate::VectorField;
use mourre_core::error::Error;
use mourre_core::mourre::{nakamura_window, node_inf, window_inf};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{interval_label, RecipeOutput};
use crate::config::RunConfig;
use crate::output::{fmt_f64, Cell, Table};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowParams {
    pub u: VectorField,
    /// Energy intervals to scan; empty picks fractions of the window (or of `[0, 16]` when the
    /// field is positive everywhere).
    pub intervals: Vec<(f64, f64)>,
}

impl Default for WindowParams {
    fn default() -> Self {
        WindowParams { u: VectorField::Nakamura { a: 1.0 }, intervals: Vec::new() }
    }
}

pub fn run(cfg: &RunConfig, p: &WindowParams) -> Result<RecipeOutput> {
    let grid = cfg.grid.build()?;
    let top = match &p.u {
        VectorField::Nakamura { a } => Some(nakamura_window(*a)?.1),
        _ => None,
    };
    let intervals = if p.intervals.is_empty() {
        let t = top.unwrap_or(16.0);
        [(0.05, 0.25), (0.25, 0.5), (0.5, 0.75), (0.75, 0.95), (0.05, 0.95)].iter().map(|(a, b)| (a * t, b * t)).collect()
    } else {
        p.intervals.clone()
    };
    let rows: Vec<(f64, f64, f64, Option<f64>)> = intervals
        .par_iter()
        .map(|&(lo, hi)| {
            let w = window_inf(&grid, &p.u, (lo, hi))?;
            let n = match node_inf(&grid, &p.u, (lo, hi)) {
                Ok(v) => Some(v),
                Err(Error::EmptyShell { .. }) => None,
                Err(e) => return Err(e.into()),
            };
            Ok((lo, hi, w, n))
        })
        .collect::<Result<_>>()?;
    let mut table = Table::new("window_inf", &["lo", "hi", "window_inf", "node_inf"]);
    let mut points = BTreeMap::new();
    let mut lines = Vec::new();
    match top {
        Some(t) => lines.push(format!("window (0, {})", fmt_f64(t))),
        None => lines.push("window (0, inf)".into()),
    }
    for &(lo, hi, w, n) in &rows {
        table.push(vec![lo.into(), hi.into(), w.into(), Cell::from(n)]);
        points.insert(interval_label(lo, hi), if w > 0.0 { "positive" } else { "not-positive" }.to_string());
        lines.push(format!("  [{}, {}]  window_inf {}", fmt_f64(lo), fmt_f64(hi), fmt_f64(w)));
    }
    let verdict = super::overall(&points);
    let summary = json!({
        "field": p.u.label(),
        "window": top.map(|t| vec![0.0, t]),
        "intervals": rows.iter().map(|(lo, hi, w, n)| json!({"lo": lo, "hi": hi, "window_inf": w, "node_inf": n})).collect::<Vec<_>>(),
    });
    Ok(RecipeOutput { verdict, points, tables: vec![table], summary, lines })
}
