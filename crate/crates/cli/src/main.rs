use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use lamesolve_cli::config::ExperimentConfig;
use lamesolve_cli::experiments::{self, Experiment, EXPERIMENTS};
use lamesolve_cli::{CliError, EXIT_FAIL, EXIT_PARAM};

#[derive(Debug, Parser)]
#[command(name = "lamesolve", version, about = "Run the Lame/Stokes resolvent verification experiments")]
struct Args {
    /// TOML configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Experiment name, or "all"
    #[arg(long)]
    experiment: Option<String>,
    /// Random seed (overrides the config value)
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides output_dir)
    #[arg(long)]
    out: Option<PathBuf>,
    /// List the registered experiments
    #[arg(long)]
    list: bool,
    /// Machine-readable output
    #[arg(long)]
    json: bool,
    /// Restrict --list to one module
    #[arg(long)]
    module: Option<String>,
}

fn list(args: &Args) -> Result<i32, CliError> {
    let entries = experiments::list(args.module.as_deref());
    if args.json {
        println!("{}", serde_json::to_string_pretty(&entries).map_err(|e| CliError::Io(e.to_string()))?);
    } else {
        for e in entries {
            println!("{:<20} {:<17} {}", e.name, e.module, e.anchor);
        }
    }
    Ok(0)
}

fn run(args: &Args) -> Result<i32, CliError> {
    if args.list {
        return list(args);
    }
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = &args.out {
        cfg.output_dir = o.clone();
    }
    let name = args.experiment.clone().or_else(|| cfg.experiment.clone()).ok_or_else(|| CliError::Usage("no experiment given (--experiment or config key)".into()))?;
    let selected: Vec<&'static Experiment> = if name == "all" { EXPERIMENTS.iter().collect() } else { vec![experiments::find(&name)?] };
    // validate everything before any compute
    cfg.validate()?;
    let mut failed = false;
    let mut manifests = Vec::new();
    for exp in selected {
        let s = experiments::run(exp, &cfg, &cfg.output_dir)?;
        failed |= !s.outcome.passed();
        if args.json {
            manifests.push(serde_json::from_str::<serde_json::Value>(&s.manifest).map_err(|e| CliError::Io(e.to_string()))?);
        } else {
            for c in &s.outcome.checks {
                println!("{} {:<44} {:>13.6e}  {:<22} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value, c.threshold, c.detail);
            }
            println!("{}: {:.1} s, outputs in {}", s.experiment, s.wall_time_s, s.output_dir.display());
        }
    }
    if args.json {
        let v = if manifests.len() == 1 { manifests.remove(0) } else { serde_json::Value::Array(manifests) };
        println!("{}", serde_json::to_string_pretty(&v).map_err(|e| CliError::Io(e.to_string()))?);
    }
    Ok(if failed { EXIT_FAIL } else { 0 })
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_PARAM as u8 } else { 0 });
        }
    };
    match run(&args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
