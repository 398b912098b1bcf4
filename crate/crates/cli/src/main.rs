//! `randers`: run the shipped scenarios and compare their manifests.

mod config;
mod manifest;
mod oracle;
mod runs;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use config::ScenarioConfig;
use manifest::Manifest;

#[derive(Parser)]
#[command(name = "randers", version, about = "Randers and Fermat metric scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its CSV, SVG and manifest.json artifacts.
    Run(RunArgs),
    /// Compare the metrics of two manifests.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Absolute tolerance replacing the per-metric ones.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// List the scenarios.
    List,
}

#[derive(clap::Args)]
struct RunArgs {
    scenario: String,
    /// Grid nodes per axis.
    #[arg(long)]
    res: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// TOML file with the same keys; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// One-form coefficient of constant-form.
    #[arg(long)]
    a: Option<f64>,
    /// Interval of minkowski-development as `lo,hi`.
    #[arg(long = "A", allow_hyphen_values = true, value_parser = parse_interval)]
    interval: Option<[f64; 2]>,
}

fn parse_interval(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').collect();
    let [lo, hi] = parts.as_slice() else {
        return Err(format!("expected `lo,hi`, got `{s}`"));
    };
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    Ok([num(lo)?, num(hi)?])
}

/// Errors that map to exit status 2.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage<E: std::fmt::Display>(e: E) -> anyhow::Error {
    Usage(e.to_string()).into()
}

fn build_config(args: RunArgs) -> Result<ScenarioConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let cfg = ScenarioConfig::from_file(path).map_err(|e| usage(format!("{e:#}")))?;
            if cfg.scenario != args.scenario {
                return Err(usage(format!("config is for {}, not {}", cfg.scenario, args.scenario)));
            }
            cfg
        }
        None => ScenarioConfig::new(&args.scenario),
    };
    cfg.resolution = args.res.or(cfg.resolution);
    cfg.tol = args.tol.or(cfg.tol);
    cfg.out = args.out.or(cfg.out);
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if args.a.is_some() {
        cfg.params.a = args.a;
    }
    if args.interval.is_some() {
        cfg.params.interval = args.interval;
    }
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

fn run(args: RunArgs) -> Result<bool> {
    let Some(runner) = runs::runner(&args.scenario) else {
        return Err(usage(format!("unknown scenario '{}'; see `randers list`", args.scenario)));
    };
    let cfg = build_config(args)?;
    let out = cfg.out_dir();
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let mut state = runs::Run::new(&cfg, &out);
    runner(&mut state)?;
    let mut m = state.manifest;
    m.artifacts.push("manifest.json".into());
    m.artifacts.sort();
    let path = out.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&m)? + "\n").with_context(|| format!("writing {}", path.display()))?;
    for (name, metric) in &m.metrics {
        println!("{} {name} = {:.6e} (tol {:.3e})", if metric.pass { "ok  " } else { "FAIL" }, metric.value, metric.tol);
    }
    println!("{}: {} -> {}", m.scenario, if m.pass { "pass" } else { "fail" }, out.display());
    Ok(m.pass)
}

fn compare(a: PathBuf, b: PathBuf, tol: Option<f64>) -> Result<bool> {
    if tol.is_some_and(|t| !(t >= 0.0)) {
        bail!(Usage("--tol must be non-negative".into()));
    }
    let ma = Manifest::load(&a).map_err(|e| usage(format!("{e:#}")))?;
    let mb = Manifest::load(&b).map_err(|e| usage(format!("{e:#}")))?;
    let diffs = manifest::compare(&ma, &mb, tol).map_err(usage)?;
    let show = |v: Option<f64>| v.map_or("missing".to_string(), |x| format!("{x:.9e}"));
    for d in &diffs {
        println!("{}: {} vs {} (tol {:.3e})", d.key, show(d.a), show(d.b), d.tol);
    }
    Ok(diffs.is_empty())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::List => {
            for (name, summary) in randers::scenarios::SCENARIOS {
                println!("{name:<24}{summary}");
            }
            Ok(true)
        }
        Command::Run(args) => run(args),
        Command::Compare { a, b, tol } => compare(a, b, tol),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if e.downcast_ref::<Usage>().is_some() { 2 } else { 1 })
        }
    }
}
