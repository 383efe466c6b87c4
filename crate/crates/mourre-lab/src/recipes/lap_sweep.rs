use std::collections::BTreeMap;

use anyhow::Result;
use mourre_core::conjugate::VectorField;
use mourre_core::error::Error;
use mourre_core::lap::{halving_schedule, holder_exponent, level_spacing, mu_sweep, HolderFit, LapOptions, MuSweep};
use mourre_core::mourre::window_inf;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{PotentialConfig, RecipeOutput};
use crate::config::RunConfig;
use crate::output::{fmt_f64, Table};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HolderConfig {
    pub lambdas: Vec<f64>,
    pub s: f64,
    /// Smoothing shift as a multiple of the level spacing at `lambdas[1]`.
    pub mu_spacings: f64,
}

impl Default for HolderConfig {
    fn default() -> Self {
        HolderConfig { lambdas: vec![0.75, 1.0, 1.25, 1.5, 2.0, 2.5, 3.0, 3.5], s: 1.0, mu_spacings: 4.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LapSweepParams {
    pub potential: PotentialConfig,
    pub lambdas: Vec<f64>,
    pub s: f64,
    pub mu0: f64,
    /// Schedule end; points under the level-spacing floor are dropped anyway.
    pub mu_min: f64,
    /// Field whose multiplier positivity is reported at each `lambda` (a thin shell around it).
    pub u: VectorField,
    pub options: LapOptions,
    pub holder: Option<HolderConfig>,
}

impl Default for LapSweepParams {
    fn default() -> Self {
        LapSweepParams {
            potential: PotentialConfig::Zero,
            lambdas: vec![0.0, 1.0],
            s: 1.0,
            mu0: 2.0,
            mu_min: 1e-3,
            u: VectorField::Nakamura { a: 1.0 },
            options: LapOptions::default(),
            holder: None,
        }
    }
}

enum Point {
    Swept(Box<MuSweep>),
    Refused(Vec<f64>),
}

pub fn run(cfg: &RunConfig, p: &LapSweepParams) -> Result<RecipeOutput> {
    cfg.grid.require_1d(cfg.recipe)?;
    let g = cfg.grid.build()?;
    let h = p.potential.hamiltonian(&g)?;
    let spec = h.spectrum()?;
    let schedule = halving_schedule(p.mu0, p.mu_min);
    let swept: Vec<Point> = p
        .lambdas
        .par_iter()
        .map(|&lambda| match mu_sweep(&h, &spec, lambda, p.s, &schedule, &p.options) {
            Ok(sw) => Ok(Point::Swept(Box::new(sw))),
            Err(Error::NearEigenvalue { eigenvalues, .. }) => Ok(Point::Refused(eigenvalues)),
            Err(e) => Err(e.into()),
        })
        .collect::<Result<_>>()?;
    let holder: Option<(HolderFit, f64)> = match &p.holder {
        None => None,
        Some(hc) => {
            let anchor = hc.lambdas.get(1).or(hc.lambdas.first()).copied().unwrap_or(1.0);
            let mu = hc.mu_spacings * level_spacing(&spec, anchor)?;
            Some((holder_exponent(&h, &hc.lambdas, hc.s, mu, &p.options)?, mu))
        }
    };
    let mut tables = Vec::new();
    let mut points = BTreeMap::new();
    let mut lines = Vec::new();
    let mut items = Vec::new();
    for (i, (&lambda, pt)) in p.lambdas.iter().zip(&swept).enumerate() {
        let key = format!("lambda={}", fmt_f64(lambda));
        let shell = (lambda.max(0.0) * 0.95, lambda.max(0.0) * 1.05);
        let positivity = if lambda > 0.0 { window_inf(&g, &p.u, shell).ok() } else { None };
        match pt {
            Point::Swept(sw) => {
                let mut t = Table::new(format!("sweep-{i}"), &["mu", "norm", "residual", "solver_iters"]);
                for j in 0..sw.record.len() {
                    t.push(vec![
                        sw.record.axis_values[j].into(),
                        sw.record.values[j].into(),
                        sw.residuals[j].into(),
                        sw.solver_iters[j].into(),
                    ]);
                }
                tables.push(t);
                points.insert(key.clone(), sw.verdict.as_str().to_string());
                lines.push(format!(
                    "  {key}: {} (floor {}, last ratio {})",
                    sw.verdict.as_str(),
                    fmt_f64(sw.floor),
                    sw.last_ratio.map(fmt_f64).unwrap_or_else(|| "-".into())
                ));
                items.push(json!({
                    "lambda": lambda,
                    "table": format!("sweep-{i}"),
                    "verdict": sw.verdict.as_str(),
                    "spacing": sw.spacing,
                    "floor": sw.floor,
                    "dropped": sw.dropped,
                    "fit": sw.fit,
                    "plateau": sw.plateau,
                    "last_ratio": sw.last_ratio,
                    "multiplier_inf_near_lambda": positivity,
                }));
            }
            Point::Refused(ev) => {
                points.insert(key.clone(), "refused".into());
                lines.push(format!("  {key}: refused, eigenvalues nearby {ev:?}"));
                items.push(json!({ "lambda": lambda, "verdict": "refused", "eigenvalues": ev }));
            }
        }
    }
    // the Holder fit is reported beside the sweeps and only decides when there are none
    let verdict = super::overall(&points);
    let holder_json = holder.as_ref().map(|(hf, mu)| {
        let mut t = Table::new("holder", &["separation", "difference_norm"]);
        for (d, n) in &hf.pairs {
            t.push(vec![(*d).into(), (*n).into()]);
        }
        tables.push(t);
        let status = if hf.theta.is_some() { "fitted" } else { "inconclusive" };
        points.insert("holder".into(), status.into());
        lines.push(format!(
            "  holder: theta {} band {}",
            hf.theta.map(fmt_f64).unwrap_or_else(|| "-".into()),
            hf.band.map(|(a, b)| format!("[{}, {}]", fmt_f64(a), fmt_f64(b))).unwrap_or_else(|| "-".into())
        ));
        json!({ "mu_star": mu, "theta": hf.theta, "band": hf.band, "systematic": hf.systematic, "fit": hf.fit })
    });
    let verdict = if p.lambdas.is_empty() { super::overall(&points) } else { verdict };
    let summary = json!({
        "potential": p.potential.label(),
        "s": p.s,
        "schedule": schedule,
        "sweeps": items,
        "holder": holder_json,
    });
    Ok(RecipeOutput { verdict, points, tables, summary, lines })
}
