use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qsf_cli::{run, write_error, CliError, Command, RunConfig};

#[derive(Parser)]
#[command(
    name = "qsf",
    version,
    about = "Quartic slow-fast release model: simulations, entry-exit, continuation"
)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Shipped configuration (fig3, fig4, fig5, fig6).
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Output directory.
    #[arg(long, global = true, default_value = "qsf-out")]
    out: PathBuf,
    /// Override the integrator tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Skip SVG rendering.
    #[arg(long, global = true)]
    no_plots: bool,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate the planar core (and the full model when configured).
    Simulate,
    /// Exit points by closed form, quadrature and simulation.
    EntryExit,
    /// Folds, zeros and transcritical point of the quartic.
    Folds,
    /// Equilibria S, U and Ũ with their eigenvalues.
    Equilibria,
    /// Equilibrium branch in α with its Hopf points.
    ContinueEq,
    /// Cycle branches from every Hopf point and their topology.
    ContinueLc,
    /// Cycle topology across the configured r1 values.
    Sweep,
    /// Named figure scenario: fig3 to fig7, fig9, fig11.
    Scenario { name: String },
    /// Render SVGs from tables already in the output directory.
    Plot,
}

fn resolve(cli: &Cli) -> Result<(RunConfig, Command), CliError> {
    let base = || match (&cli.config, &cli.preset) {
        (Some(path), _) => RunConfig::load(path),
        (None, Some(name)) => RunConfig::preset(name),
        (None, None) => RunConfig::preset("fig3"),
    };
    let (mut cfg, command) = match &cli.command {
        Cmd::Scenario { name } => {
            let (preset, command) = Command::scenario(name)?;
            // An explicit configuration replaces the scenario's.
            let cfg = if cli.config.is_some() || cli.preset.is_some() {
                base()?
            } else {
                preset
            };
            (cfg, command)
        }
        Cmd::Simulate => (base()?, Command::Simulate),
        Cmd::EntryExit => (base()?, Command::EntryExit),
        Cmd::Folds => (base()?, Command::Folds),
        Cmd::Equilibria => (base()?, Command::Equilibria),
        Cmd::ContinueEq => (base()?, Command::ContinueEq),
        Cmd::ContinueLc => (base()?, Command::ContinueLc),
        Cmd::Sweep => (base()?, Command::Sweep),
        Cmd::Plot => (base()?, Command::Plot),
    };
    if let Some(tol) = cli.tol {
        cfg.tol = tol;
    }
    Ok((cfg, command))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result =
        resolve(&cli).and_then(|(cfg, command)| run(command, &cfg, &cli.out, !cli.no_plots));
    match result {
        Ok(out) => {
            println!(
                "wrote {} files to {}",
                out.files.len() + 1,
                out.dir.display()
            );
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!(
                "{}",
                serde_json::to_string(&err.record()).unwrap_or_else(|_| err.to_string())
            );
            write_error(&cli.out, &err);
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
