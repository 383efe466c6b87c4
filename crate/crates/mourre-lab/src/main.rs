use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use mourre_lab::{load_config, output::fmt_f64, Recipe, RunOutcome};

#[derive(Parser)]
#[command(name = "mourre-lab", version, about = "Numerical checks of Mourre theory on periodic lattices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a recipe and write its artifacts.
    Run {
        recipe: Recipe,
        /// TOML config; flags below override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        grid_n: Option<usize>,
        #[arg(long)]
        grid_l: Option<f64>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, env = "MOURRE_LAB_OUT_DIR", default_value = "mourre-out")]
        out_dir: PathBuf,
        /// Expected overall verdict; exit status 2 when missed.
        #[arg(long)]
        expect: Option<String>,
        /// `key.path=value`, value parsed as TOML. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
    },
    /// Re-run a manifest and compare artifact hashes.
    Replay {
        manifest: PathBuf,
        #[arg(long, env = "MOURRE_LAB_OUT_DIR", default_value = "mourre-replay")]
        out_dir: PathBuf,
    },
    /// List recipes with their defaults.
    Recipes,
}

fn report(o: &RunOutcome) {
    println!("{} ({})", o.manifest.recipe, o.manifest.anchor);
    println!("grid {}", o.manifest.grid);
    for l in &o.output.lines {
        println!("{l}");
    }
    println!("verdict: {}", o.output.verdict);
    println!("artifacts in {}", o.dir.display());
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { recipe, config, grid_n, grid_l, dim, seed, workers, out_dir, expect, mut sets } => {
            let mut flags = Vec::new();
            if let Some(n) = grid_n {
                flags.push(format!("grid.n={n}"));
            }
            if let Some(l) = grid_l {
                flags.push(format!("grid.l={}", fmt_f64(l)));
            }
            if let Some(d) = dim {
                flags.push(format!("grid.dim={d}"));
            }
            if let Some(s) = seed {
                flags.push(format!("seed={s}"));
            }
            if let Some(w) = workers {
                flags.push(format!("workers={w}"));
            }
            if let Some(v) = expect {
                flags.push(format!("expect.verdict={}", toml::Value::String(v)));
            }
            flags.append(&mut sets);
            let cfg = load_config(Some(recipe), config.as_deref(), &flags)?;
            let outcome = mourre_lab::run(&cfg, &out_dir)?;
            report(&outcome);
            if outcome.violations.is_empty() {
                Ok(ExitCode::SUCCESS)
            } else {
                for v in &outcome.violations {
                    eprintln!("expectation violated: {v}");
                }
                Ok(ExitCode::from(2))
            }
        }
        Command::Replay { manifest, out_dir } => {
            let (outcome, mismatches) = mourre_lab::replay(&manifest, &out_dir)?;
            report(&outcome);
            if mismatches.is_empty() {
                println!("replay: all {} artifacts match", outcome.manifest.outputs.len());
                Ok(ExitCode::SUCCESS)
            } else {
                for m in &mismatches {
                    eprintln!("replay mismatch: {m}");
                }
                Ok(ExitCode::from(2))
            }
        }
        Command::Recipes => {
            for r in Recipe::ALL {
                let g = mourre_lab::recipes::default_grid(r);
                println!("{:<20} n={:<6} l={:<10} {}", r.name(), g.n, fmt_f64(g.l), r.anchor());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
