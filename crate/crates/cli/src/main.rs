use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use log::info;
use pengap::analysis::BreakEvenParam;
use pengap_cli::commands::{cmd_break_even, cmd_pensions, cmd_simulate, cmd_sweep_age, cmd_targets};
use pengap_cli::config::{parse_annuities, RunConfig};

/// Pension gap targets, optimal investment and Monte Carlo artifacts.
#[derive(Debug, Parser)]
#[command(name = "pengap", version)]
struct Cli {
    /// `key = value` configuration file; missing keys take base-case values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set sigma=0.2`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Mortality table CSV (`age,p` or `age,q`) used to price annuities.
    #[arg(long, global = true)]
    mortality: Option<PathBuf>,
    /// Annuity price override `AGE:VALUE`. Repeatable.
    #[arg(long = "annuity", value_name = "AGE:VALUE", global = true)]
    annuities: Vec<String>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Old and new pensions, replacement ratios and target rate.
    Pensions,
    /// Interim target curve and control coefficients.
    Targets,
    /// Monte Carlo fund and strategy percentiles plus pension histogram.
    Simulate {
        /// Keep the whole fund in the riskless asset.
        #[arg(long)]
        force_riskless: bool,
    },
    /// Parameter value at which the new pension equals the old one.
    BreakEven {
        /// beta, w or g
        parameter: BreakEvenParam,
        #[arg(long, requires = "hi")]
        lo: Option<f64>,
        #[arg(long, requires = "lo")]
        hi: Option<f64>,
    },
    /// Pensions by retirement age for both salary kinds.
    SweepAge {
        /// Comma-separated retirement ages; defaults to the `ages` key.
        #[arg(long, value_delimiter = ',')]
        ages: Option<Vec<u32>>,
    },
}

fn build_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    for kv in &cli.overrides {
        cfg.apply_override(kv)?;
    }
    if let Some(path) = &cli.mortality {
        cfg.mortality = Some(path.clone());
    }
    for pair in &cli.annuities {
        for (age, value) in parse_annuities("--annuity", pair)? {
            cfg.annuities.retain(|(a, _)| *a != age);
            cfg.annuities.push((age, value));
        }
    }
    cfg.annuities.sort_by_key(|(a, _)| *a);
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = build_config(&cli).context("invalid configuration")?;
    match cli.command {
        Command::Pensions => {
            cmd_pensions(&cfg)?;
        }
        Command::Targets => {
            cmd_targets(&cfg)?;
        }
        Command::Simulate { force_riskless } => {
            let report = cmd_simulate(&cfg, force_riskless)?;
            for run in &report.runs {
                let p = &run.total_pensions;
                let mean = p.iter().sum::<f64>() / p.len() as f64;
                info!("{}: mean final pension {mean:.4} (old pension {:.4})", run.kind, run.summary.old_pension);
            }
        }
        Command::BreakEven { parameter, lo, hi } => {
            let report = cmd_break_even(&cfg, parameter, lo.zip(hi))?;
            for r in &report.results {
                if let Some(root) = r.root {
                    info!("{}: {} break-even at {root:.6}", r.kind, parameter.name());
                }
            }
        }
        Command::SweepAge { ages } => {
            let ages = ages.unwrap_or_else(|| cfg.ages.clone());
            cmd_sweep_age(&cfg, &ages)?;
        }
    }
    info!("artifacts written to {}", cfg.output_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
