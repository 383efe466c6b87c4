use std::collections::BTreeMap;

use anyhow::Result;
use mourre_core::commutator::{geomspace, witness_sequence, WitnessKind};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{PotentialConfig, RecipeOutput};
use crate::config::RunConfig;
use crate::output::{fmt_f64, Table};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WitnessParams {
    pub kind: WitnessKind,
    /// Defaults to the family each kind is built for.
    pub potential: Option<PotentialConfig>,
    /// Defaults per kind: `2^1..2^11` (comb dilation), `2^p + 1` (comb delta bound),
    /// `10^1..10^10` and `10^0..10^6` (exponential), `geomspace(10, 1e4, 7)` (packet).
    pub schedule: Option<Vec<f64>>,
    /// Smallest last-over-first ratio of the normalized pairing that counts as growth.
    pub growth_min: f64,
}

impl Default for WitnessParams {
    fn default() -> Self {
        WitnessParams { kind: WitnessKind::CombDilation, potential: None, schedule: None, growth_min: 10.0 }
    }
}

fn default_potential(kind: WitnessKind) -> PotentialConfig {
    match kind {
        WitnessKind::CombDilation | WitnessKind::CombDeltaBound => PotentialConfig::FourierComb,
        WitnessKind::ExponentialDeltaBound | WitnessKind::ExponentialDilation => PotentialConfig::Exponential { taper: None },
        WitnessKind::PacketDilation { alpha, .. } => PotentialConfig::oscillating(alpha, 0.3, None),
    }
}

fn default_schedule(kind: WitnessKind) -> Vec<f64> {
    match kind {
        WitnessKind::CombDilation => (1..=11).map(|p| (1u64 << p) as f64).collect(),
        WitnessKind::CombDeltaBound => (1..=11).map(|p| (1u64 << p) as f64 + 1.0).collect(),
        WitnessKind::ExponentialDeltaBound => (1..=10).map(|p| 10f64.powi(p)).collect(),
        WitnessKind::ExponentialDilation => (0..=6).map(|p| 10f64.powi(p)).collect(),
        WitnessKind::PacketDilation { .. } => geomspace(10.0, 1e4, 7),
    }
}

pub fn run(cfg: &RunConfig, p: &WitnessParams) -> Result<RecipeOutput> {
    let potential = p.potential.clone().unwrap_or_else(|| default_potential(p.kind));
    let schedule = p.schedule.clone().unwrap_or_else(|| default_schedule(p.kind));
    let grid = match p.kind {
        WitnessKind::CombDilation | WitnessKind::CombDeltaBound => {
            cfg.grid.require_1d(cfg.recipe)?;
            Some(cfg.grid.build()?)
        }
        _ => None,
    };
    let rep = witness_sequence(&potential.spec(), p.kind, &schedule, grid.as_ref())?;
    let mut table = Table::new("pairings", &["n", "pairing", "norm_product", "normalized"]);
    for j in 0..rep.record.len() {
        table.push(vec![
            rep.record.axis_values[j].into(),
            rep.record.values[j].into(),
            rep.norm_products[j].into(),
            rep.normalized[j].into(),
        ]);
    }
    let grows = rep.monotone && rep.growth >= p.growth_min;
    let verdict = if grows { "growth" } else { "no-growth" }.to_string();
    let mut points = BTreeMap::new();
    points.insert(p.kind.label(), verdict.clone());
    let mut lines = vec![format!(
        "  {} on {}: growth {} monotone {}",
        p.kind.label(),
        potential.label(),
        fmt_f64(rep.growth),
        rep.monotone
    )];
    if !rep.truncated.is_empty() {
        lines.push(format!("  schedule points beyond the grid: {:?}", rep.truncated));
    }
    let summary = json!({
        "kind": p.kind.label(),
        "potential": potential.label(),
        "growth": rep.growth,
        "monotone": rep.monotone,
        "truncated": rep.truncated,
    });
    Ok(RecipeOutput { verdict, points, tables: vec![table], summary, lines })
}
