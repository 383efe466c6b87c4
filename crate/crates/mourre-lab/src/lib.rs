//! Experiment runner over `mourre-core`: named recipes, TOML configs, CSV and JSON artifacts, and
//! manifests that can be replayed bit for bit.

pub mod config;
pub mod output;
pub mod recipes;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::json;

pub use config::{Expect, GridConfig, RawConfig, Recipe, RunConfig};
pub use recipes::RecipeOutput;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
}

/// Everything needed to reproduce a run and check its artifacts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub recipe: Recipe,
    pub anchor: String,
    pub tool_version: String,
    pub grid: String,
    pub seed: u64,
    pub config: RunConfig,
    pub outputs: Vec<OutputFile>,
    pub verdict: String,
    pub points: BTreeMap<String, String>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub output: RecipeOutput,
    pub manifest: Manifest,
    /// Expectation violations, empty when none were set or all held.
    pub violations: Vec<String>,
}

/// Run on a pool of `cfg.workers` threads. Results are collected in input order, so artifacts do
/// not depend on the worker count.
pub fn execute(cfg: &RunConfig) -> Result<RecipeOutput> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build()?;
    pool.install(|| recipes::execute(cfg))
}

/// Run and write `<table>.csv`, `summary.json` and `manifest.json` under `out_dir/<recipe>/`.
pub fn run(cfg: &RunConfig, out_dir: &Path) -> Result<RunOutcome> {
    let output = execute(cfg)?;
    let dir = out_dir.join(cfg.recipe.name());
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    for t in &output.tables {
        files.push((t.file_name(), t.to_csv()?));
    }
    let summary = json!({
        "recipe": cfg.recipe.name(),
        "anchor": cfg.recipe.anchor(),
        "verdict": output.verdict,
        "points": output.points,
        "results": output.summary,
    });
    files.push(("summary.json".into(), output::json_bytes(&summary)));
    let mut outputs = Vec::new();
    for (name, bytes) in &files {
        let path = dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        outputs.push(OutputFile { file: name.clone(), sha256: output::sha256_hex(bytes) });
    }
    let manifest = Manifest {
        recipe: cfg.recipe,
        anchor: cfg.recipe.anchor().into(),
        tool_version: TOOL_VERSION.into(),
        grid: cfg.grid.signature(),
        seed: cfg.seed,
        config: cfg.clone(),
        outputs,
        verdict: output.verdict.clone(),
        points: output.points.clone(),
    };
    let path = dir.join("manifest.json");
    fs::write(&path, output::json_bytes(&serde_json::to_value(&manifest)?))
        .with_context(|| format!("writing {}", path.display()))?;
    let violations = check_expectations(&cfg.expect, &output);
    Ok(RunOutcome { dir, output, manifest, violations })
}

/// Compare the reached verdicts against `expect`.
pub fn check_expectations(expect: &Expect, out: &RecipeOutput) -> Vec<String> {
    let mut v = Vec::new();
    if let Some(want) = &expect.verdict {
        if *want != out.verdict {
            v.push(format!("verdict: expected {want}, got {}", out.verdict));
        }
    }
    for (k, want) in &expect.points {
        match out.points.get(k) {
            None => v.push(format!("point {k}: not reported")),
            Some(got) if got != want => v.push(format!("point {k}: expected {want}, got {got}")),
            _ => {}
        }
    }
    v
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("{} is not a manifest", path.display()))
}

/// Re-run a manifest's config into `out_dir` and list every artifact whose hash moved.
pub fn replay(manifest_path: &Path, out_dir: &Path) -> Result<(RunOutcome, Vec<String>)> {
    let old = read_manifest(manifest_path)?;
    if old.tool_version != TOOL_VERSION {
        bail!("manifest was written by version {}, this is {TOOL_VERSION}", old.tool_version);
    }
    let outcome = run(&old.config, out_dir)?;
    let fresh: BTreeMap<&str, &str> =
        outcome.manifest.outputs.iter().map(|o| (o.file.as_str(), o.sha256.as_str())).collect();
    let mut mismatches = Vec::new();
    for o in &old.outputs {
        match fresh.get(o.file.as_str()) {
            None => mismatches.push(format!("{}: not produced", o.file)),
            Some(h) if *h != o.sha256 => mismatches.push(format!("{}: hash {} != {}", o.file, h, o.sha256)),
            _ => {}
        }
    }
    for o in &outcome.manifest.outputs {
        if !old.outputs.iter().any(|p| p.file == o.file) {
            mismatches.push(format!("{}: not in the manifest", o.file));
        }
    }
    Ok((outcome, mismatches))
}

/// Resolve a config the way the command line does: file first, then `key=value` overrides.
pub fn load_config(recipe: Option<Recipe>, file: Option<&Path>, sets: &[String]) -> Result<RunConfig> {
    let mut raw = match file {
        Some(p) => RawConfig::from_file(p)?,
        None => RawConfig::default(),
    };
    for s in sets {
        let (k, v) = split_assignment(s).ok_or_else(|| anyhow!("override `{s}` is not key=value"))?;
        raw.set(k.trim(), v.trim())?;
    }
    raw.resolve(recipe)
}

/// Split `key=value` at the first `=` outside a quoted key segment.
fn split_assignment(s: &str) -> Option<(&str, &str)> {
    let mut quote = None;
    for (i, c) in s.char_indices() {
        match (quote, c) {
            (None, '"' | '\'') => quote = Some(c),
            (Some(q), _) if c == q => quote = None,
            (None, '=') => return Some((&s[..i], &s[i + 1..])),
            _ => {}
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::split_assignment;

    #[test]
    fn assignments_split_outside_quotes() {
        assert_eq!(split_assignment("a.b=1"), Some(("a.b", "1")));
        assert_eq!(split_assignment("p.\"x=1\"=\"y\""), Some(("p.\"x=1\"", "\"y\"")));
        assert_eq!(split_assignment("p.'x=1'=2"), Some(("p.'x=1'", "2")));
        assert_eq!(split_assignment("a={b=1}"), Some(("a", "{b=1}")));
        assert_eq!(split_assignment("novalue"), None);
    }
}
