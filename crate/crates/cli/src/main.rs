//! `quadcav` command-line front end.

mod commands;
mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Solver(String),
    Io(String),
}

impl CliError {
    fn config(e: quadcav::Error) -> Self {
        Self::Config(e.to_string())
    }

    /// Bad inputs surface as config errors; everything else the core
    /// reports is a solver failure.
    fn core(e: quadcav::Error) -> Self {
        use quadcav::Error as E;
        match e {
            E::InvalidParameter(_) | E::Domain(_) | E::Degenerate(_) | E::WindowTooShort { .. } => {
                Self::Config(e.to_string())
            }
            other => Self::Solver(other.to_string()),
        }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self::Io(format!("{}: {e}", path.display()))
    }

    fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Solver(_) => 3,
            Self::Io(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Config(m) => write!(f, "config error: {m}"),
            Self::Solver(m) => write!(f, "solver failure: {m}"),
            Self::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "quadcav", version, about = "Condensate in a cavity driven on two quadratures: steady states, dynamics, stability and phase diagrams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON config, or any output of an earlier run (its embedded config is reused).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one config key by dotted path, e.g. `--set model.kappa=200`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for random perturbations (overrides `seed` in the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Stationary state by imaginary-time relaxation.
    Steady,
    /// Real-time evolution and limit-cycle check.
    Evolve,
    /// Adiabatic and dynamical-cavity spectra along a parameter path.
    Spectrum,
    /// Normal-phase threshold along a mixing-angle ray.
    Threshold,
    /// Phase diagram over the two pump strengths.
    ScanEta,
    /// Phase diagram over coupling and mixing angles.
    ScanAngle,
    /// Three-mode model: steady state, spectrum and pump sweep.
    Threemode,
    /// Three-mode vs full model on the pump grid.
    Compare,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Self::Steady => "steady",
            Self::Evolve => "evolve",
            Self::Spectrum => "spectrum",
            Self::Threshold => "threshold",
            Self::ScanEta => "scan-eta",
            Self::ScanAngle => "scan-angle",
            Self::Threemode => "threemode",
            Self::Compare => "compare",
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let mut cfg = config::load(cli.config.as_deref(), &cli.sets)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let name = cli.command.name();
    let t0 = Instant::now();
    let mut sink = output::Sink::new(&cli.out, name, &cfg)?;
    let summary = match cli.command {
        Command::Steady => commands::steady(&cfg, &mut sink),
        Command::Evolve => commands::evolve(&cfg, &mut sink),
        Command::Spectrum => commands::spectrum(&cfg, &mut sink),
        Command::Threshold => commands::threshold(&cfg, &mut sink),
        Command::ScanEta => commands::scan_eta(&cfg, &mut sink),
        Command::ScanAngle => commands::scan_angle(&cfg, &mut sink),
        Command::Threemode => commands::threemode(&cfg, &mut sink),
        Command::Compare => commands::compare(&cfg, &mut sink),
    }?;
    let files = sink.finish(t0.elapsed().as_secs_f64(), summary.clone())?;
    println!("{name}: {summary}");
    for f in files {
        println!("  wrote {}", cli.out.join(f).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("quadcav: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
