//! Run configuration: a structured-text tree (TOML file plus flag overrides) resolved against
//! per-recipe defaults into a complete, serializable parameter tree.

use std::collections::BTreeMap;
use std::fmt;

use anyhow::{anyhow, bail, Context, Result};
use mourre_core::Grid;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::recipes;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Recipe {
    Window,
    CommutatorCheck,
    RegularityScan,
    LapSweep,
    MourreCertificate,
    FlowCheck,
    Witness,
    WaveOp,
}

impl Recipe {
    pub const ALL: [Recipe; 8] = [
        Recipe::Window,
        Recipe::CommutatorCheck,
        Recipe::RegularityScan,
        Recipe::LapSweep,
        Recipe::MourreCertificate,
        Recipe::FlowCheck,
        Recipe::Witness,
        Recipe::WaveOp,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Recipe::Window => "window",
            Recipe::CommutatorCheck => "commutator-check",
            Recipe::RegularityScan => "regularity-scan",
            Recipe::LapSweep => "lap-sweep",
            Recipe::MourreCertificate => "mourre-certificate",
            Recipe::FlowCheck => "flow-check",
            Recipe::Witness => "witness",
            Recipe::WaveOp => "wave-op",
        }
    }

    /// The statement each recipe exercises, named by role.
    pub fn anchor(&self) -> &'static str {
        match self {
            Recipe::Window => "multiplier positivity window of the Nakamura field",
            Recipe::CommutatorCheck => "commutator expansions and finite-difference algebra",
            Recipe::RegularityScan => "regularity region of oscillating potentials",
            Recipe::LapSweep => "limiting absorption and resolvent Holder continuity",
            Recipe::MourreCertificate => "Mourre estimate on an energy window",
            Recipe::FlowCheck => "flow of the conjugate vector field",
            Recipe::Witness => "witness pairings against regularity classes",
            Recipe::WaveOp => "existence and completeness of wave operators",
        }
    }

    pub fn parse(name: &str) -> Result<Recipe> {
        Recipe::ALL.into_iter().find(|r| r.name() == name).ok_or_else(|| {
            let names: Vec<&str> = Recipe::ALL.iter().map(|r| r.name()).collect();
            anyhow!("unknown recipe `{name}`{}", hint(name, &names))
        })
    }
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Box of length `l` with `n` nodes per axis, sampled at half-spacing offset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub n: usize,
    pub l: f64,
    pub dim: usize,
}

impl GridConfig {
    pub fn new(n: usize, l: f64) -> Self {
        GridConfig { n, l, dim: 1 }
    }

    pub fn build(&self) -> Result<Grid> {
        Grid::centered(self.dim, self.n, self.l / 2.0).with_context(|| format!("grid {}", self.signature()))
    }

    pub fn signature(&self) -> String {
        format!("dim={} n={} l={} offset=half-spacing", self.dim, self.n, ryu::Buffer::new().format(self.l))
    }

    pub fn require_1d(&self, recipe: Recipe) -> Result<()> {
        if self.dim != 1 {
            bail!("recipe {recipe} runs in one dimension, got dim = {}", self.dim);
        }
        Ok(())
    }
}

/// Verdicts the run is expected to reach. Violations exit with status 2.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Expect {
    pub verdict: Option<String>,
    /// Per-point verdicts, keyed by the point labels a recipe reports.
    pub points: BTreeMap<String, String>,
}

/// A fully resolved run: every default filled in, so it round-trips through a manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub recipe: Recipe,
    /// TOML integers are signed, so a config can only name seeds up to `i64::MAX`.
    pub seed: u64,
    pub workers: usize,
    pub grid: GridConfig,
    pub params: Value,
    pub expect: Expect,
}

impl RunConfig {
    /// The parameter tree as written to manifests (key-sorted JSON).
    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("run config is plain data")
    }
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// Raw user input before resolution.
#[derive(Clone, Debug, Default)]
pub struct RawConfig {
    pub tree: Map<String, Value>,
}

impl RawConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = toml::from_str(text).context("config is not valid TOML")?;
        match serde_json::to_value(table)? {
            Value::Object(tree) => Ok(RawConfig { tree }),
            _ => unreachable!("a TOML table converts to an object"),
        }
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml_str(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Set a TOML dotted key (`a.b."c.d"`) to a TOML-parsed value (bare words fall back to strings).
    pub fn set(&mut self, path: &str, raw: &str) -> Result<()> {
        self.set_value(path, parse_scalar(raw))
    }

    pub fn set_value(&mut self, path: &str, value: Value) -> Result<()> {
        let keys = key_path(path)?;
        let mut node = &mut self.tree;
        for k in &keys[..keys.len() - 1] {
            let entry = node.entry(k.clone()).or_insert_with(|| Value::Object(Map::new()));
            node = entry.as_object_mut().ok_or_else(|| anyhow!("`{path}`: `{k}` is not a table"))?;
        }
        node.insert(keys[keys.len() - 1].clone(), value);
        Ok(())
    }

    /// Resolve against the recipe defaults. `recipe` comes from the command line and must agree with
    /// the file when both name one.
    pub fn resolve(&self, recipe: Option<Recipe>) -> Result<RunConfig> {
        let from_file = match self.tree.get("recipe") {
            None => None,
            Some(Value::String(s)) => Some(Recipe::parse(s)?),
            Some(other) => bail!("`recipe` must be a string, got {other}"),
        };
        let recipe = match (recipe, from_file) {
            (Some(a), Some(b)) if a != b => bail!("command line names recipe {a} but the config names {b}"),
            (Some(a), _) | (None, Some(a)) => a,
            (None, None) => bail!("no recipe given"),
        };
        let seed = match self.tree.get("seed") {
            None => 0,
            Some(v) => serde_json::from_value(v.clone()).context("`seed` must be a non-negative integer")?,
        };
        let workers = match self.tree.get("workers") {
            None => default_workers(),
            Some(v) => serde_json::from_value(v.clone()).context("`workers` must be a positive integer")?,
        };
        if workers == 0 {
            bail!("`workers` must be at least 1");
        }
        let mut grid = serde_json::to_value(recipes::default_grid(recipe))?;
        if let Some(user) = self.tree.get("grid") {
            let user = user.as_object().ok_or_else(|| anyhow!("`grid` must be a table"))?;
            let g = grid.as_object_mut().unwrap();
            for (k, v) in user {
                g.insert(k.clone(), v.clone());
            }
        }
        let grid: GridConfig = serde_json::from_value(grid).map_err(|e| explain(e, "grid"))?;
        let params_in = self.tree.get("params").cloned().unwrap_or(Value::Object(Map::new()));
        if !params_in.is_object() {
            bail!("`params` must be a table");
        }
        let params = recipes::resolve_params(recipe, params_in).map_err(|e| explain(e, "params"))?;
        let expect: Expect = match self.tree.get("expect") {
            None => Expect::default(),
            Some(v) => serde_json::from_value(v.clone()).map_err(|e| explain(e, "expect"))?,
        };
        let resolved = RunConfig { recipe, seed, workers, grid, params, expect };
        let mut unknown = Vec::new();
        unknown_keys(&Value::Object(self.tree.clone()), &resolved.to_value(), "", &mut unknown);
        if !unknown.is_empty() {
            bail!("unknown config keys:\n  {}", unknown.join("\n  "));
        }
        Ok(resolved)
    }
}

/// Split a dotted key the way TOML does, so quoted segments may contain dots.
fn key_path(path: &str) -> Result<Vec<String>> {
    let t: toml::Table = toml::from_str(&format!("{path} = 0")).map_err(|_| anyhow!("malformed key path `{path}`"))?;
    let mut keys = Vec::new();
    let mut node = &t;
    loop {
        let (k, v) = node.iter().next().expect("one key per line");
        keys.push(k.clone());
        match v {
            toml::Value::Table(inner) => node = inner,
            _ => return Ok(keys),
        }
    }
}

fn parse_scalar(raw: &str) -> Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => serde_json::to_value(t.remove("v").unwrap()).unwrap_or(Value::String(raw.into())),
        Err(_) => Value::String(raw.into()),
    }
}

/// Keys present in `user` but absent from `resolved`, with the closest sibling as a suggestion.
fn unknown_keys(user: &Value, resolved: &Value, prefix: &str, out: &mut Vec<String>) {
    match (user, resolved) {
        (Value::Object(u), Value::Object(r)) => {
            let known: Vec<&str> = r.keys().map(|k| k.as_str()).collect();
            for (k, v) in u {
                let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                match r.get(k) {
                    Some(rv) => unknown_keys(v, rv, &path, out),
                    None => out.push(format!("`{path}`{}", hint(k, &known))),
                }
            }
        }
        (Value::Array(u), Value::Array(r)) if u.len() == r.len() => {
            for (i, (a, b)) in u.iter().zip(r).enumerate() {
                unknown_keys(a, b, &format!("{prefix}[{i}]"), out);
            }
        }
        _ => {}
    }
}

/// `; did you mean `x`?` when some candidate is close to `word`.
pub fn hint(word: &str, candidates: &[&str]) -> String {
    candidates
        .iter()
        .map(|c| (strsim::jaro_winkler(word, c), *c))
        .filter(|(s, _)| *s >= 0.8)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, c)| format!("; did you mean `{c}`?"))
        .unwrap_or_default()
}

/// Add a suggestion to serde's "unknown variant `x`, expected one of ..." messages.
fn explain(e: serde_json::Error, section: &str) -> anyhow::Error {
    let msg = e.to_string();
    let mut extra = String::new();
    if let Some(rest) = msg.strip_prefix("unknown variant `") {
        if let Some((word, tail)) = rest.split_once('`') {
            let candidates: Vec<&str> = tail.split('`').skip(1).step_by(2).collect();
            extra = hint(word, &candidates);
        }
    }
    anyhow!("in `{section}`: {msg}{extra}")
}
