use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use momentum_entanglement::cli::config::{Format, RunConfig};
use momentum_entanglement::cli::manifest::RunManifest;
use momentum_entanglement::cli::recipes::Recipe;
use momentum_entanglement::cli::{self, schema, Verb};
use momentum_entanglement::{Error, Result};

/// Atom-photon momentum entanglement in spontaneous emission.
#[derive(Parser)]
#[command(name = "mentangle", version)]
struct Args {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Multiplies grid densities.
    #[arg(long, global = true)]
    grid_scale: Option<f64>,

    /// Restrict emitted formats; repeat for several.
    #[arg(long = "format", global = true, value_enum)]
    formats: Vec<Format>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the joint amplitude and export the grid.
    Amplitude,
    /// R, K, PE and variances for one parameter point.
    Report,
    /// Scan a metric over the coherence (r, theta).
    Scan,
    /// Schmidt modes, spectrum and plot data.
    Modes,
    /// Reproduce a named figure.
    Reproduce {
        #[arg(value_parser = parse_recipe)]
        recipe: Recipe,
    },
    /// Replay a run from its manifest.
    Rerun { manifest: PathBuf },
    /// Check a run directory against its manifest and the output schemas.
    Validate { dir: PathBuf },
}

fn parse_recipe(s: &str) -> std::result::Result<Recipe, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn load_config(args: &Args) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(s) = args.grid_scale {
        cfg.grid.scale = s;
    }
    if !args.formats.is_empty() {
        cfg.output.formats = args.formats.clone();
    }
    Ok(cfg)
}

fn out_dir(args: &Args, cfg: &RunConfig, fallback: &str) -> PathBuf {
    args.out
        .clone()
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from(fallback))
}

fn summarize(m: &RunManifest, dir: &Path) {
    let line = serde_json::json!({
        "verb": m.verb,
        "recipe": m.recipe,
        "dir": dir,
        "headline": m.headline,
        "outputs": m.outputs.len(),
        "warnings": m.warnings,
        "wall_clock_seconds": m.wall_clock_seconds,
    });
    println!("{line}");
}

fn main_inner(args: &Args) -> Result<()> {
    let verb = match &args.command {
        Command::Amplitude => Verb::Amplitude,
        Command::Report => Verb::Report,
        Command::Scan => Verb::Scan,
        Command::Modes => Verb::Modes,
        Command::Reproduce { recipe } => Verb::Reproduce(*recipe),
        Command::Rerun { manifest } => {
            let original = RunManifest::load(manifest)?;
            let default_dir = manifest.parent().unwrap_or(Path::new(".")).join("rerun");
            let dir = args.out.clone().unwrap_or(default_dir);
            let r = cli::rerun(manifest, &dir)?;
            let line = serde_json::json!({
                "verb": original.verb,
                "dir": dir,
                "identical_headline": r.identical_headline,
                "changed_outputs": r.changed_outputs,
                "headline": r.replay.headline,
            });
            println!("{line}");
            return if r.identical_headline {
                Ok(())
            } else {
                Err(Error::Format(
                    "replayed headline numbers differ from the manifest".into(),
                ))
            };
        }
        Command::Validate { dir } => {
            let problems = schema::validate_dir(dir)?;
            println!("{}", serde_json::json!({ "dir": dir, "problems": problems }));
            return if problems.is_empty() {
                Ok(())
            } else {
                Err(Error::Format(format!(
                    "{} problems in {}",
                    problems.len(),
                    dir.display()
                )))
            };
        }
    };
    let cfg = load_config(args)?;
    let fallback = match verb {
        Verb::Reproduce(r) => format!("out/{}", r.name()),
        v => format!("out/{}", v.name()),
    };
    let dir = out_dir(args, &cfg, &fallback);
    let manifest = cli::run(verb, &cfg, &dir)?;
    summarize(&manifest, &dir);
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match main_inner(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
