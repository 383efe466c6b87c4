//! Named recipes. Each owns a parameter struct with defaults, runs on the worker pool, and returns
//! tables plus a JSON summary; writing happens in one place afterwards.

use std::collections::BTreeMap;

use anyhow::Result;
use mourre_core::hamiltonian::Hamiltonian;
use mourre_core::potentials::{realize, Cutoff, Family, PotentialSpec};
use mourre_core::{Grid, LinOp};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{GridConfig, Recipe, RunConfig};
use crate::output::Table;

mod commutator_check;
mod flow_check;
mod lap_sweep;
mod mourre_certificate;
mod regularity_scan;
mod wave_op;
mod window;
mod witness;

pub use commutator_check::CommutatorCheckParams;
pub use flow_check::FlowCheckParams;
pub use lap_sweep::{HolderConfig, LapSweepParams};
pub use mourre_certificate::MourreCertificateParams;
pub use regularity_scan::{RegularityScanParams, ScanMode};
pub use wave_op::{PacketConfig, WaveOpParams};
pub use window::WindowParams;
pub use witness::WitnessParams;

/// What a recipe hands back to the collector.
#[derive(Clone, Debug, PartialEq)]
pub struct RecipeOutput {
    pub verdict: String,
    /// Verdict per labelled sweep point.
    pub points: BTreeMap<String, String>,
    pub tables: Vec<Table>,
    pub summary: Value,
    /// Human-readable report lines for stdout.
    pub lines: Vec<String>,
}

impl RecipeOutput {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

/// The common verdict of all points, or "mixed".
pub fn overall(points: &BTreeMap<String, String>) -> String {
    let mut it = points.values();
    match it.next() {
        None => "empty".into(),
        Some(first) if it.all(|v| v == first) => first.clone(),
        Some(_) => "mixed".into(),
    }
}

/// Potential families a config can name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PotentialConfig {
    Zero,
    /// `sin(k |x|^alpha) / |x|^beta` away from the origin.
    Oscillating {
        alpha: f64,
        beta: f64,
        #[serde(default = "one")]
        k: f64,
        #[serde(default)]
        taper: Option<f64>,
    },
    /// `<x>^{-power}`.
    Decay {
        power: f64,
        #[serde(default)]
        taper: Option<f64>,
    },
    Exponential {
        #[serde(default)]
        taper: Option<f64>,
    },
    FourierComb,
    /// `-depth` on `|x| <= inner`, smoothly cut to zero at `outer`.
    Well {
        depth: f64,
        #[serde(default = "one")]
        inner: f64,
        #[serde(default = "one_and_half")]
        outer: f64,
    },
    Constant {
        value: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn one_and_half() -> f64 {
    1.5
}

impl PotentialConfig {
    pub fn oscillating(alpha: f64, beta: f64, taper: Option<f64>) -> Self {
        PotentialConfig::Oscillating { alpha, beta, k: 1.0, taper }
    }

    pub fn spec(&self) -> PotentialSpec {
        let (spec, taper) = match self {
            PotentialConfig::Zero => (PotentialSpec::constant(0.0), None),
            PotentialConfig::Oscillating { alpha, beta, k, taper } => (
                PotentialSpec::new(Family::Oscillating { alpha: *alpha, beta: *beta, k: *k, cutoff: Cutoff::unit() }),
                *taper,
            ),
            PotentialConfig::Decay { power, taper } => (PotentialSpec::decay(*power), *taper),
            PotentialConfig::Exponential { taper } => (PotentialSpec::exponential(Cutoff::unit()), *taper),
            PotentialConfig::FourierComb => (PotentialSpec::fourier_comb(), None),
            PotentialConfig::Well { depth, inner, outer } => {
                (PotentialSpec::new(Family::Well { depth: *depth, cutoff: Cutoff { inner: *inner, outer: *outer } }), None)
            }
            PotentialConfig::Constant { value } => (PotentialSpec::constant(*value), None),
        };
        match taper {
            Some(r) => spec.with_taper(r),
            None => spec,
        }
    }

    pub fn label(&self) -> String {
        match self {
            PotentialConfig::Zero => "zero".into(),
            other => other.spec().label(),
        }
    }

    pub fn hamiltonian(&self, grid: &Grid) -> Result<Hamiltonian> {
        Ok(match self {
            PotentialConfig::Zero => Hamiltonian::free(grid),
            other => Hamiltonian::new(&realize(&other.spec(), grid)?),
        })
    }

    pub fn diagonal(&self, grid: &Grid) -> Result<LinOp> {
        Ok(match self {
            PotentialConfig::Zero => LinOp::zero(grid),
            other => LinOp::diagonal(grid, realize(&other.spec(), grid)?.values),
        })
    }
}

pub fn default_grid(recipe: Recipe) -> GridConfig {
    match recipe {
        Recipe::Window => GridConfig::new(256, 40.0),
        Recipe::CommutatorCheck => GridConfig::new(256, 40.0),
        Recipe::RegularityScan => GridConfig::new(4096, 40.0),
        Recipe::LapSweep => GridConfig::new(1024, 400.0),
        // momentum spacing 1/6: the window edge k = 0.5 is a node
        Recipe::MourreCertificate => GridConfig::new(256, 12.0 * std::f64::consts::PI),
        Recipe::FlowCheck => GridConfig::new(256, 40.0),
        Recipe::Witness => GridConfig::new(65536, 10.0 * std::f64::consts::PI),
        Recipe::WaveOp => GridConfig::new(1024, 400.0),
    }
}

fn normalize<P: Serialize + for<'de> Deserialize<'de>>(v: Value) -> serde_json::Result<Value> {
    let p: P = serde_json::from_value(v)?;
    serde_json::to_value(p)
}

/// Fill recipe defaults into a user `params` tree.
pub fn resolve_params(recipe: Recipe, v: Value) -> serde_json::Result<Value> {
    match recipe {
        Recipe::Window => normalize::<WindowParams>(v),
        Recipe::CommutatorCheck => normalize::<CommutatorCheckParams>(v),
        Recipe::RegularityScan => normalize::<RegularityScanParams>(v),
        Recipe::LapSweep => normalize::<LapSweepParams>(v),
        Recipe::MourreCertificate => normalize::<MourreCertificateParams>(v),
        Recipe::FlowCheck => normalize::<FlowCheckParams>(v),
        Recipe::Witness => normalize::<WitnessParams>(v),
        Recipe::WaveOp => normalize::<WaveOpParams>(v),
    }
}

/// Run a resolved config on the current rayon pool.
pub fn execute(cfg: &RunConfig) -> Result<RecipeOutput> {
    let p = cfg.params.clone();
    match cfg.recipe {
        Recipe::Window => window::run(cfg, &serde_json::from_value(p)?),
        Recipe::CommutatorCheck => commutator_check::run(cfg, &serde_json::from_value(p)?),
        Recipe::RegularityScan => regularity_scan::run(cfg, &serde_json::from_value(p)?),
        Recipe::LapSweep => lap_sweep::run(cfg, &serde_json::from_value(p)?),
        Recipe::MourreCertificate => mourre_certificate::run(cfg, &serde_json::from_value(p)?),
        Recipe::FlowCheck => flow_check::run(cfg, &serde_json::from_value(p)?),
        Recipe::Witness => witness::run(cfg, &serde_json::from_value(p)?),
        Recipe::WaveOp => wave_op::run(cfg, &serde_json::from_value(p)?),
    }
}

/// `{lo}..{hi}` with round-trip floats.
fn interval_label(lo: f64, hi: f64) -> String {
    format!("{}..{}", crate::output::fmt_f64(lo), crate::output::fmt_f64(hi))
}
