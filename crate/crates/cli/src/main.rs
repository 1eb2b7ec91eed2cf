use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use owc_aloha::montecarlo::RNG_ALGORITHM;
use owc_aloha_cli::config::ExperimentKind;
use owc_aloha_cli::{load_config, presets, run_experiment, run_sinr_cdf, write_cdf_csv, write_csv, ConfigError, Mode, Overrides};

#[derive(Parser)]
#[command(name = "owc-aloha", version, about = "Slotted ALOHA with capture in an optical-wireless IoT cell")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file and/or a figure preset.
    Run(RunArgs),
    /// List the built-in figure presets.
    Presets,
}

#[derive(clap::Args)]
struct RunArgs {
    /// TOML configuration; its keys override the preset.
    config: Option<PathBuf>,
    /// Start from a built-in figure preset.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Monte Carlo seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path (stdout if absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print a preset's TOML and exit.
    #[arg(long, value_name = "NAME")]
    show_preset: Option<String>,
    /// Check the configuration and exit without computing.
    #[arg(long)]
    validate_only: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Presets => list_presets(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn list_presets() -> Result<()> {
    let mut out = io::stdout().lock();
    for name in presets::names() {
        let spec = load_config(None, Some(name), &Overrides::default())?;
        let description = spec.meta.and_then(|m| m.description).unwrap_or_default();
        writeln!(out, "{name:<16} {description}")?;
    }
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    if let Some(name) = &args.show_preset {
        print!("{}", presets::get(name)?);
        return Ok(());
    }
    let overrides = Overrides { mode: args.mode, seed: args.seed, output: args.out };
    let spec = load_config(args.config.as_deref(), args.preset.as_deref(), &overrides)?;
    if args.validate_only {
        eprintln!(
            "configuration valid: {} point(s), sweep {}, mode {:?}",
            spec.points.len(),
            spec.sweep_label(),
            spec.run.mode
        );
        return Ok(());
    }
    let target = spec.run.output.as_ref().map_or("stdout".into(), |p| p.display().to_string());
    let mut text = Vec::new();
    let rows = match spec.run.experiment {
        ExperimentKind::Metrics => {
            let rows = run_experiment(&spec)?;
            write_csv(&mut text, &rows)?;
            rows.len()
        }
        ExperimentKind::SinrCdf => {
            let report = run_sinr_cdf(&spec)?;
            write_cdf_csv(&mut text, &report.rows)?;
            for (u, ks) in &report.ks {
                eprintln!("U_a = {u}: sup |F_analytic - F_empirical| = {ks:.3e}");
            }
            report.rows.len()
        }
    };
    match &spec.run.output {
        Some(path) => std::fs::write(path, &text).with_context(|| format!("writing {target}"))?,
        None => io::stdout().lock().write_all(&text).with_context(|| format!("writing {target}"))?,
    }
    if let (true, Some(seed)) = (spec.run.mode.monte_carlo(), spec.run.seed) {
        let meta = format!("rng = \"{RNG_ALGORITHM}\"\nseed = {seed}\nslots = {}\n", spec.run.slots);
        eprint!("{meta}");
        if let Some(path) = &spec.run.output {
            let sidecar = path.with_extension("meta.toml");
            std::fs::write(&sidecar, meta).with_context(|| format!("writing {}", sidecar.display()))?;
        }
    }
    eprintln!("wrote {rows} row(s) to {target}");
    Ok(())
}
