//! Run configuration: one JSON document holding the model parameters and
//! the per-command blocks.

use std::path::Path;

use qsf_core::continuation::ContinuationSettings;
use qsf_core::{FullState, ModelParams, Scenario, SlowFastState, Timescale};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEEP_P11_MAX: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelParams,
    /// Integrator tolerance for simulations and simulated exits.
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub simulate: SimulateBlock,
    #[serde(default)]
    pub entry_exit: EntryExitBlock,
    #[serde(default)]
    pub equilibria: EquilibriaBlock,
    #[serde(default)]
    pub continuation: ContinuationBlock,
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateBlock {
    /// Also integrate the six-dimensional model.
    #[serde(default)]
    pub full: bool,
    /// Planar start; `(-b/a, ε)` when absent.
    #[serde(default)]
    pub initial_state: Option<SlowFastState>,
    /// Full-model start; rest with `p2 = ε` when absent.
    #[serde(default)]
    pub initial_full_state: Option<FullState>,
    /// Horizon of the planar run in fast time.
    pub t_end: f64,
    #[serde(default)]
    pub timescale: Timescale,
}

impl Default for SimulateBlock {
    fn default() -> Self {
        Self {
            full: false,
            initial_state: None,
            initial_full_state: None,
            t_end: 4000.0,
            timescale: Timescale::Fast,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntryExitBlock {
    /// Explicit entries; otherwise `n` points spread over the admissible range.
    #[serde(default)]
    pub p10: Option<Vec<f64>>,
    pub n: usize,
    /// Distance kept from both ends of the admissible range.
    pub margin: f64,
    /// Section height of the simulated exit; `ε` when absent.
    #[serde(default)]
    pub delta: Option<f64>,
    pub simulate: bool,
    /// Root search limit. Deep entries exit near 1e9, far beyond the core's
    /// fold-based default, so the table searches much further.
    #[serde(default)]
    pub p11_max: Option<f64>,
}

impl Default for EntryExitBlock {
    fn default() -> Self {
        Self {
            p10: None,
            n: 20,
            margin: 0.05,
            delta: None,
            simulate: true,
            p11_max: Some(DEEP_P11_MAX),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct EquilibriaBlock {
    /// Range of the equilibrium branch; the fold range of the quartic when absent.
    #[serde(default)]
    pub alpha_range: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuationBlock {
    #[serde(default)]
    pub settings: ContinuationSettings,
    /// Values of the largest quartic zero for the topology sweep.
    pub r1_values: Vec<f64>,
}

impl Default for ContinuationBlock {
    fn default() -> Self {
        Self {
            settings: ContinuationSettings::default(),
            r1_values: vec![6.0, 6.08, 6.15],
        }
    }
}

impl RunConfig {
    pub fn from_params(model: ModelParams) -> Self {
        Self {
            model,
            tol: DEFAULT_TOL,
            simulate: SimulateBlock::default(),
            entry_exit: EntryExitBlock::default(),
            equilibria: EquilibriaBlock::default(),
            continuation: ContinuationBlock::default(),
        }
    }

    /// Built-in configuration of a transient scenario.
    pub fn for_scenario(sc: Scenario) -> Self {
        let mut c = Self::from_params(sc.params());
        c.simulate.t_end = sc.horizon();
        c.simulate.initial_state = Some(sc.initial_state());
        c.simulate.full = true;
        c
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let c: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Shipped preset `figN`.
    pub fn preset(name: &str) -> Result<Self, CliError> {
        let text = match name {
            "fig3" => include_str!("../../../presets/fig3.json"),
            "fig4" => include_str!("../../../presets/fig4.json"),
            "fig5" => include_str!("../../../presets/fig5.json"),
            "fig6" => include_str!("../../../presets/fig6.json"),
            _ => {
                return Err(CliError::Config(format!(
                    "unknown preset {name:?}; expected fig3 to fig6"
                )))
            }
        };
        Self::from_json(text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.model
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(CliError::Config(format!(
                "tol must lie in (0, 1), got {}",
                self.tol
            )));
        }
        if !(self.simulate.t_end > 0.0 && self.simulate.t_end.is_finite()) {
            return Err(CliError::Config(format!(
                "simulate.t_end must be positive, got {}",
                self.simulate.t_end
            )));
        }
        if self.entry_exit.p10.is_none() && self.entry_exit.n == 0 {
            return Err(CliError::Config(
                "entry_exit needs p10 values or n > 0".into(),
            ));
        }
        if let Some(d) = self.entry_exit.delta {
            if !(d > 0.0 && d < 1.0) {
                return Err(CliError::Config(format!(
                    "entry_exit.delta must lie in (0, 1), got {d}"
                )));
            }
        }
        self.continuation
            .settings
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if self.continuation.r1_values.iter().any(|r| !r.is_finite()) {
            return Err(CliError::Config(
                "continuation.r1_values must be finite".into(),
            ));
        }
        Ok(())
    }

    /// Canonical JSON used for hashing and the manifest.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
