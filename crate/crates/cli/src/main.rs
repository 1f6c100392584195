use std::path::PathBuf;
use std::process::ExitCode;

use chainsim::{run_scenario, AnalysisKind, RunError, ScenarioConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "chainsim", version, about = "Oscillator-chain scenarios: spectra, Gaussian evolution, densities, hydrodynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normal-mode frequencies of a finite ring
    Modes(RunArgs),
    /// Exact Gaussian evolution with invariant checks
    Evolve(RunArgs),
    /// Block momentum (and energy) peaking ratios
    Subsection(RunArgs),
    /// Local density statistics and the decoherence scan
    Densities(RunArgs),
    /// Euler system in a harmonic trap
    Hydro(RunArgs),
    /// Approach to local equilibrium
    Equilibrium(RunArgs),
    /// Microscopic sound wave against the wave equation
    Compare(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario config (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Output directory
    #[arg(long, env = "CHAINSIM_OUT")]
    out: Option<PathBuf>,
    /// Suppress progress messages
    #[arg(long)]
    quiet: bool,
}

impl Command {
    fn split(self) -> (AnalysisKind, RunArgs) {
        match self {
            Command::Modes(a) => (AnalysisKind::Modes, a),
            Command::Evolve(a) => (AnalysisKind::Evolve, a),
            Command::Subsection(a) => (AnalysisKind::Subsection, a),
            Command::Densities(a) => (AnalysisKind::Densities, a),
            Command::Hydro(a) => (AnalysisKind::Hydro, a),
            Command::Equilibrium(a) => (AnalysisKind::Equilibrium, a),
            Command::Compare(a) => (AnalysisKind::Compare, a),
        }
    }
}

fn execute(kind: AnalysisKind, args: RunArgs) -> Result<(), RunError> {
    let config = ScenarioConfig::from_path(&args.config)?;
    if config.analysis.kind() != kind {
        return Err(RunError::config(
            "analysis.kind",
            format!("config selects {:?} but the subcommand is {:?}", config.analysis.kind(), kind),
        ));
    }
    let out = args.out.or_else(|| config.output.clone()).unwrap_or_else(|| PathBuf::from("chainsim-out"));
    let manifest = run_scenario(&config, &out)?;
    log::info!("{} files written to {}", manifest.files.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = cli.command.split();
    let level = if args.quiet { log::LevelFilter::Warn } else { log::LevelFilter::Info };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
    match execute(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
