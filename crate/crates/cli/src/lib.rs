//! Runner behind the `qsf` binary: configuration, commands, artifact tables,
//! SVG plots and the run manifest.

pub mod commands;
pub mod config;
pub mod error;
pub mod plot;
pub mod table;

use std::path::Path;

use serde_json::json;
use sha2::{Digest, Sha256};

pub use commands::Artifacts;
pub use config::RunConfig;
pub use error::{CliError, ErrorRecord};

/// What a run computes. Scenario names map onto these in [`Command::scenario`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    EntryExit,
    Folds,
    Equilibria,
    ContinueEq,
    ContinueLc,
    Sweep,
    Plot,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::EntryExit => "entry-exit",
            Command::Folds => "folds",
            Command::Equilibria => "equilibria",
            Command::ContinueEq => "continue-eq",
            Command::ContinueLc => "continue-lc",
            Command::Sweep => "sweep",
            Command::Plot => "plot",
        }
    }

    /// Configuration and command of a named scenario. `fig3` to `fig6` are
    /// transients; `fig7` and `fig9` are cycle diagrams for `r1 = 6.4` and
    /// `r1 = 5`; `fig11` is the `r1` sweep.
    pub fn scenario(name: &str) -> Result<(RunConfig, Command), CliError> {
        match name {
            "fig3" | "fig4" | "fig5" | "fig6" => Ok((RunConfig::preset(name)?, Command::Simulate)),
            "fig7" => Ok((RunConfig::preset("fig3")?, Command::ContinueLc)),
            "fig9" => Ok((RunConfig::preset("fig6")?, Command::ContinueLc)),
            "fig11" => Ok((RunConfig::preset("fig3")?, Command::Sweep)),
            _ => Err(CliError::Config(format!(
                "unknown scenario {name:?}; expected fig3 to fig7, fig9 or fig11"
            ))),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Run `command`, write its artifacts into `dir` and finish with
/// `manifest.json`. With `plots`, SVGs are rendered from whatever tables exist.
pub fn run(
    command: Command,
    cfg: &RunConfig,
    dir: &Path,
    plots: bool,
) -> Result<Artifacts, CliError> {
    cfg.validate()?;
    let mut out = Artifacts::new(dir)?;
    match command {
        Command::Simulate => commands::simulate(cfg, &mut out)?,
        Command::EntryExit => commands::entry_exit(cfg, &mut out)?,
        Command::Folds => commands::folds(cfg, &mut out)?,
        Command::Equilibria => commands::equilibria(cfg, &mut out)?,
        Command::ContinueEq => commands::continue_eq(cfg, &mut out)?,
        Command::ContinueLc => commands::continue_lc(cfg, &mut out)?,
        Command::Sweep => commands::sweep(cfg, &mut out)?,
        Command::Plot => {}
    }
    if plots || command == Command::Plot {
        let written = plot::emit_plots(dir)?;
        if command == Command::Plot && written.is_empty() {
            return Err(CliError::MissingArtifact(dir.join("trajectory.csv")));
        }
        for path in written {
            if let Some(name) = path.file_name().and_then(|n| n.to_str()) {
                if !out.files.iter().any(|f| f == name) {
                    out.files.push(name.to_string());
                }
            }
        }
    }
    write_manifest(command, cfg, &mut out)?;
    Ok(out)
}

fn write_manifest(command: Command, cfg: &RunConfig, out: &mut Artifacts) -> Result<(), CliError> {
    let mut files = Vec::new();
    for name in &out.files {
        let path = out.dir.join(name);
        let bytes = std::fs::read(&path).map_err(error::io_err(&path))?;
        files.push(json!({ "name": name, "sha256": sha256_hex(&bytes) }));
    }
    let canonical = cfg.canonical_json();
    let s = &cfg.continuation.settings;
    let manifest = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": command.name(),
        "config_hash": sha256_hex(canonical.as_bytes()),
        "config": cfg,
        "tolerances": {
            "integrator": cfg.tol,
            "continuation": s.tol,
            "residual": s.residual_tol,
            "t_max": s.t_max,
            "ds_min": s.ds_min,
        },
        "files": files,
    });
    out.json("manifest.json", &manifest)?;
    // The manifest does not list itself.
    out.files.retain(|f| f != "manifest.json");
    Ok(())
}

/// Write the error record next to the artifacts; failures here are ignored
/// because the record is also printed.
pub fn write_error(dir: &Path, err: &CliError) {
    let mut s = serde_json::to_string_pretty(&err.record()).unwrap_or_default();
    s.push('\n');
    if std::fs::create_dir_all(dir).is_ok() {
        let _ = std::fs::write(dir.join("error.json"), s);
    }
}
