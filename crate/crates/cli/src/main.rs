use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use optomech_sr::sde::with_jobs;
use optomech_sr_cli::commands::{self, write_report};
use optomech_sr_cli::config::PRESETS;
use optomech_sr_cli::{CliError, Report, RunConfig, Sources};

/// Stochastic resonance experiments on a tristable optomechanical membrane.
#[derive(Debug, Parser)]
#[command(name = "trisr", version)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    /// Named preset applied before the config file and overrides.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// `key=value` override; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Master seed of the noise streams.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for ensembles (0 = all cores). Does not affect results.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Print the available presets and exit.
    #[arg(long)]
    list_presets: bool,
    /// Print the resolved configuration and exit.
    #[arg(long, global = true)]
    print_config: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Steady states with stability.
    FixedPoints,
    /// Branches and region boundaries over `sweep_param`.
    Bifurcation,
    /// One trajectory (optionally symbolized into wells).
    Simulate,
    /// Ensemble-averaged power spectrum and peak list.
    Spectrum,
    /// SNR at the signal frequency over `d_grid`.
    SnrSweep,
    /// SNR at the signal frequency over `phase_grid`.
    PhaseSweep,
    /// Effective potential on an x grid at `potential_times`.
    Potential,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::FixedPoints => "fixed-points",
            Command::Bifurcation => "bifurcation",
            Command::Simulate => "simulate",
            Command::Spectrum => "spectrum",
            Command::SnrSweep => "snr-sweep",
            Command::PhaseSweep => "phase-sweep",
            Command::Potential => "potential",
        }
    }

    fn run(self, cfg: &RunConfig) -> Result<Report, CliError> {
        match self {
            Command::FixedPoints => commands::fixed_points_cmd(cfg),
            Command::Bifurcation => commands::bifurcation_cmd(cfg),
            Command::Simulate => commands::simulate_cmd(cfg),
            Command::Spectrum => commands::spectrum_cmd(cfg),
            Command::SnrSweep => commands::snr_sweep_cmd(cfg),
            Command::PhaseSweep => commands::phase_sweep_cmd(cfg),
            Command::Potential => commands::potential_cmd(cfg),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if cli.list_presets {
        for (name, about) in PRESETS {
            println!("{name:<18} {about}");
        }
        return Ok(());
    }
    let sources = Sources {
        preset: cli.preset,
        config: cli.config,
        overrides: cli.overrides,
        seed: cli.seed,
        out: cli.out,
    };
    let cfg = sources.resolve()?;
    if cli.print_config {
        print!("{}", cfg.to_text());
        return Ok(());
    }
    let Some(command) = cli.command else {
        return Err(CliError::Invalid("no subcommand given (see --help)".into()));
    };
    let report = with_jobs(cli.jobs, || command.run(&cfg))?;
    write_report(command.name(), &cfg, &report)?;
    print!("{}", report.summary);
    for out in &report.outputs {
        println!("wrote {}", cfg.out.join(&out.name).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("trisr: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
