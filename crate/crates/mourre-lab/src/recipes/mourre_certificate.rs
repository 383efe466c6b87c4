use std::collections::BTreeMap;

use anyhow::Result;
use mourre_core::conjugate::VectorField;
use mourre_core::mourre::{mourre_constant, MourreCertificate, MourreOptions};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{PotentialConfig, RecipeOutput};
use crate::config::{GridConfig, RunConfig};
use crate::output::{fmt_f64, Table};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MourreCertificateParams {
    pub potential: PotentialConfig,
    pub u: VectorField,
    pub interval: (f64, f64),
    pub options: MourreOptions,
    /// Also certify at `2N` on the same box and compare defect counts.
    pub refine: bool,
}

impl Default for MourreCertificateParams {
    fn default() -> Self {
        MourreCertificateParams {
            potential: PotentialConfig::Zero,
            u: VectorField::Nakamura { a: 1.0 },
            interval: (0.25, 0.64),
            options: MourreOptions::default(),
            refine: false,
        }
    }
}

fn certify(grid: &GridConfig, p: &MourreCertificateParams) -> Result<MourreCertificate> {
    let g = grid.build()?;
    let h = p.potential.hamiltonian(&g)?;
    let spec = h.spectrum()?;
    Ok(mourre_constant(&h, &spec, &p.u, p.interval, &p.options)?)
}

pub fn run(cfg: &RunConfig, p: &MourreCertificateParams) -> Result<RecipeOutput> {
    let mut grids = vec![cfg.grid.clone()];
    if p.refine {
        grids.push(GridConfig { n: 2 * cfg.grid.n, ..cfg.grid.clone() });
    }
    let certs: Vec<MourreCertificate> = grids.par_iter().map(|g| certify(g, p)).collect::<Result<_>>()?;
    let mut tables = Vec::new();
    let mut points = BTreeMap::new();
    let mut lines = Vec::new();
    let mut items = Vec::new();
    for (g, c) in grids.iter().zip(&certs) {
        let key = format!("n={}", g.n);
        let mut t = Table::new(format!("compression-n{}", g.n), &["index", "eigenvalue"]);
        for (j, x) in c.compression_spectrum.iter().enumerate() {
            t.push(vec![j.into(), (*x).into()]);
        }
        tables.push(t);
        let mut e = Table::new(format!("eigenvalues-n{}", g.n), &["value", "localization"]);
        for info in &c.eigenvalues_of_h_in_i {
            e.push(vec![info.value.into(), info.localization.into()]);
        }
        tables.push(e);
        let status = if c.defect_count == 0 { "strict" } else { "defects" };
        points.insert(key.clone(), status.to_string());
        let rel = c.bottom().map(|b| (b - c.window_inf).abs() / c.window_inf.abs());
        lines.push(format!(
            "  {key}: bottom {} window_inf {} c0 {} defects {}",
            c.bottom().map(fmt_f64).unwrap_or_else(|| "-".into()),
            fmt_f64(c.window_inf),
            fmt_f64(c.c0_multiplier),
            c.defect_count
        ));
        items.push(json!({
            "n": g.n,
            "certificate": c,
            "bottom": c.bottom(),
            "bottom_vs_window_inf": rel,
        }));
    }
    let verdict = if p.refine {
        let stable = certs[0].defect_count.abs_diff(certs[1].defect_count) <= 1;
        let v = if stable { "stable" } else { "unstable" };
        points.insert("refinement".into(), v.into());
        v.to_string()
    } else {
        super::overall(&points)
    };
    let summary = json!({
        "potential": p.potential.label(),
        "field": p.u.label(),
        "interval": p.interval,
        "certificates": items,
    });
    Ok(RecipeOutput { verdict, points, tables, summary, lines })
}
