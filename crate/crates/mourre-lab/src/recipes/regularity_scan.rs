use std::collections::BTreeMap;

use anyhow::Result;
use mourre_core::commutator::{c11_double_difference, c11_schedule, geomspace, lr_scan, LrMode, RegularityReport};
use mourre_core::conjugate::{TransportOptions, VectorField};
use mourre_core::norms::NormMethod;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{PotentialConfig, RecipeOutput};
use crate::config::RunConfig;
use crate::output::{fmt_f64, Table};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanMode {
    /// `||xi(q/r) [V, iA_u]||`.
    Generic,
    /// `||xi(q/r) [q, V]|| + ||xi(q/r) q delta(V)||` for the Nakamura step `a`.
    Nakamura,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegularityScanParams {
    pub potentials: Vec<PotentialConfig>,
    pub u: VectorField,
    pub mode: ScanMode,
    pub a: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub r_points: usize,
    /// Also tabulate the double-difference profile (slow at large N).
    pub double_difference: bool,
    pub tau_max: f64,
    pub tau_points: usize,
}

impl Default for RegularityScanParams {
    fn default() -> Self {
        RegularityScanParams {
            potentials: vec![
                PotentialConfig::oscillating(1.5, 1.0, Some(15.0)),
                PotentialConfig::oscillating(2.0, 1.0, Some(15.0)),
                PotentialConfig::oscillating(3.0, 0.5, Some(15.0)),
            ],
            u: VectorField::Arctan,
            mode: ScanMode::Generic,
            a: 1.0,
            r_min: 1.0,
            r_max: 6.5,
            r_points: 8,
            double_difference: false,
            tau_max: 1.0,
            tau_points: 6,
        }
    }
}

struct Scan {
    label: String,
    lr: RegularityReport,
    c11: Option<RegularityReport>,
}

fn profile_table(name: String, rep: &RegularityReport) -> Table {
    let axis = rep.profile.axis_name.as_str();
    let mut t = Table::new(name, &[axis, "value"]);
    for (x, v) in rep.profile.axis_values.iter().zip(&rep.profile.values) {
        t.push(vec![(*x).into(), (*v).into()]);
    }
    t
}

fn report_json(rep: &RegularityReport) -> serde_json::Value {
    json!({
        "verdict": rep.verdict.as_str(),
        "slope": rep.fit.map(|f| f.slope),
        "fit": rep.fit,
        "dropped": rep.dropped,
        "notes": rep.notes,
    })
}

pub fn run(cfg: &RunConfig, p: &RegularityScanParams) -> Result<RecipeOutput> {
    cfg.grid.require_1d(cfg.recipe)?;
    let g = cfg.grid.build()?;
    let radii = geomspace(p.r_min, p.r_max, p.r_points);
    let mode = match p.mode {
        ScanMode::Generic => LrMode::Generic(p.u.clone()),
        ScanMode::Nakamura => LrMode::Nakamura { a: p.a, axis: 0 },
    };
    let scans: Vec<Scan> = p
        .potentials
        .par_iter()
        .map(|pc| {
            let v = pc.diagonal(&g)?;
            let lr = lr_scan(&v, &mode, &radii, NormMethod::default())?;
            let c11 = if p.double_difference {
                let taus = c11_schedule(&g, &p.u, p.tau_max, p.tau_points);
                Some(c11_double_difference(&v, &p.u, &taus, &TransportOptions::default(), NormMethod::default())?)
            } else {
                None
            };
            Ok(Scan { label: pc.label(), lr, c11 })
        })
        .collect::<Result<_>>()?;
    let mut tables = Vec::new();
    let mut points = BTreeMap::new();
    let mut lines = Vec::new();
    let mut items = Vec::new();
    for (i, s) in scans.iter().enumerate() {
        tables.push(profile_table(format!("lr-{i}"), &s.lr));
        points.insert(s.label.clone(), s.lr.verdict.as_str().to_string());
        let slope = s.lr.fit.map(|f| fmt_f64(f.slope)).unwrap_or_else(|| "-".into());
        lines.push(format!("  {}: lr {} (slope {slope})", s.label, s.lr.verdict.as_str()));
        if let Some(c) = &s.c11 {
            tables.push(profile_table(format!("c11-{i}"), c));
            lines.push(format!("    double difference: {}", c.verdict.as_str()));
        }
        items.push(json!({
            "potential": s.label,
            "table": format!("lr-{i}"),
            "lr": report_json(&s.lr),
            "double_difference": s.c11.as_ref().map(report_json),
        }));
    }
    let summary = json!({ "field": p.u.label(), "mode": p.mode, "scans": items });
    Ok(RecipeOutput { verdict: super::overall(&points), points, tables, summary, lines })
}
