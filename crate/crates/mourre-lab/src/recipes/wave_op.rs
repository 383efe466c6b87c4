use std::collections::BTreeMap;

use anyhow::Result;
use mourre_core::commutator::geomspace;
use mourre_core::hamiltonian::{Hamiltonian, Spectrum};
use mourre_core::norms::NormMethod;
use mourre_core::potentials::{realize, short_range_integral};
use mourre_core::scattering::{
    geometric_times, intertwining_defect, wave_operator_trace, wave_packet, TraceOptions, WaveOpTrace,
};
use mourre_core::C64;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{PotentialConfig, RecipeOutput};
use crate::config::RunConfig;
use crate::output::{fmt_f64, Cell, Table};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PacketConfig {
    pub x0: f64,
    pub k0: f64,
    pub width: f64,
}

impl Default for PacketConfig {
    fn default() -> Self {
        PacketConfig { x0: 0.0, k0: 1.5, width: 4.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WaveOpParams {
    /// Potential of the reference operator `H`.
    pub h_potential: PotentialConfig,
    /// Perturbation `S`; the compared operator is `K = H + S`.
    pub s_potential: PotentialConfig,
    pub packet: PacketConfig,
    pub t0: f64,
    pub t1: f64,
    pub points: usize,
    pub trace: TraceOptions,
    /// Also trace with the roles of `H` and `K` swapped.
    pub reverse: bool,
    /// Also trace over negative times.
    pub negative: bool,
    /// Step of the intertwining check, evaluated at the kept schedule times.
    pub tau: f64,
    /// Tabulate `r -> ||xi(q/r) S||` alongside (dense, slow at large N).
    pub short_range: bool,
}

impl Default for WaveOpParams {
    fn default() -> Self {
        WaveOpParams {
            h_potential: PotentialConfig::Zero,
            s_potential: PotentialConfig::Decay { power: 2.5, taper: None },
            packet: PacketConfig::default(),
            t0: 1.0,
            t1: 200.0,
            points: 24,
            trace: TraceOptions::default(),
            reverse: true,
            negative: false,
            tau: 0.5,
            short_range: false,
        }
    }
}

fn trace_table(name: &str, tr: &WaveOpTrace) -> Table {
    let mut t = Table::new(name, &["t", "cauchy_increment", "cook_integrand", "norm_drift"]);
    for j in 0..tr.times.len() {
        let inc: Cell = if j == 0 { Cell::Empty } else { tr.cauchy_increments[j - 1].into() };
        t.push(vec![tr.times[j].into(), inc, tr.cook_integrand[j].into(), tr.norm_drift[j].into()]);
    }
    t
}

fn trace_json(tr: &WaveOpTrace) -> serde_json::Value {
    json!({
        "verdict": tr.verdict.as_str(),
        "t_box": tr.t_box,
        "truncated_at": tr.truncated_at,
        "cook_fit": tr.cook_fit,
        "cauchy_fit": tr.cauchy_fit,
        "max_norm_drift": tr.norm_drift.iter().cloned().fold(0.0, f64::max),
    })
}

fn spectra(h: &Hamiltonian, k: &Hamiltonian) -> Result<(Spectrum, Spectrum)> {
    let (hs, ks) = rayon::join(|| h.spectrum(), || k.spectrum());
    Ok((hs?, ks?))
}

pub fn run(cfg: &RunConfig, p: &WaveOpParams) -> Result<RecipeOutput> {
    cfg.grid.require_1d(cfg.recipe)?;
    let g = cfg.grid.build()?;
    let h = p.h_potential.hamiltonian(&g)?;
    let sv = p.s_potential.diagonal(&g)?;
    let kv: Vec<f64> = match &p.s_potential {
        PotentialConfig::Zero => h.potential.clone(),
        other => {
            let s = realize(&other.spec(), &g)?;
            h.potential.iter().zip(&s.values).map(|(a, b)| a + b.re).collect()
        }
    };
    let k = Hamiltonian { grid: g.clone(), potential: kv };
    let (h_spec, k_spec) = spectra(&h, &k)?;
    let psi: Vec<C64> = wave_packet(&g, p.packet.x0, p.packet.k0, p.packet.width);
    let times = geometric_times(p.t0, p.t1, p.points);
    let neg: Vec<f64> = times.iter().map(|t| -t).collect();

    let forward = wave_operator_trace(&h, &h_spec, &k, &k_spec, &psi, &times, &p.trace)?;
    let reverse = if p.reverse {
        Some(wave_operator_trace(&k, &k_spec, &h, &h_spec, &psi, &times, &p.trace)?)
    } else {
        None
    };
    let negative = if p.negative {
        Some(wave_operator_trace(&h, &h_spec, &k, &k_spec, &psi, &neg, &p.trace)?)
    } else {
        None
    };

    let mut tables = vec![trace_table("trace-forward", &forward)];
    let mut points = BTreeMap::new();
    let mut lines = Vec::new();
    let mut traces = serde_json::Map::new();
    for (name, tr) in [("forward", Some(&forward)), ("reverse", reverse.as_ref()), ("negative", negative.as_ref())] {
        let Some(tr) = tr else { continue };
        if name != "forward" {
            tables.push(trace_table(&format!("trace-{name}"), tr));
        }
        points.insert(name.to_string(), tr.verdict.as_str().to_string());
        lines.push(format!(
            "  {name}: {} (t_box {}, kept {} of {} times)",
            tr.verdict.as_str(),
            fmt_f64(tr.t_box),
            tr.times.len(),
            times.len()
        ));
        traces.insert(name.into(), trace_json(tr));
    }

    let mut inter = Table::new("intertwining", &["T", "defect"]);
    for &t in &forward.times {
        inter.push(vec![t.into(), intertwining_defect(&h_spec, &k_spec, &psi, t, p.tau)?.into()]);
    }
    tables.push(inter);

    let short_range = if p.short_range {
        let r = geomspace(1.0, 0.5 * g.half_width(), 8);
        let rep = short_range_integral(&sv, &r, NormMethod::default())?;
        lines.push(format!("  short-range tail: {}", rep.verdict.as_str()));
        Some(serde_json::to_value(rep)?)
    } else {
        None
    };

    let summary = json!({
        "h_potential": p.h_potential.label(),
        "s_potential": p.s_potential.label(),
        "packet": p.packet,
        "traces": traces,
        "short_range": short_range,
    });
    Ok(RecipeOutput { verdict: super::overall(&points), points, tables, summary, lines })
}
