//! Parameter sets of the four transient scenarios.

use serde::{Deserialize, Serialize};

use crate::model::{ModelParams, SlowFastState, Stimulus, TailParams};
use crate::quartic::QuarticSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Fig3,
    Fig4,
    Fig5,
    Fig6,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::Fig3,
        Scenario::Fig4,
        Scenario::Fig5,
        Scenario::Fig6,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Fig3 => "fig3",
            Scenario::Fig4 => "fig4",
            Scenario::Fig5 => "fig5",
            Scenario::Fig6 => "fig6",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }

    pub fn params(self) -> ModelParams {
        let mut p = ModelParams {
            epsilon: 0.02,
            a: -1.0,
            b: -2.3,
            a_tilde: -1.0,
            b_tilde: -2.2,
            alpha: 0.22,
            quartic: standard_quartic(6.4),
            stimulus: Stimulus::step(2700.0, 0.0, 0.04),
            tail: TailParams::default(),
        };
        match self {
            Scenario::Fig3 => {}
            Scenario::Fig4 => p.b_tilde = -1.2,
            Scenario::Fig5 => {
                p.alpha = 0.05;
                p.b = -1.3;
                p.b_tilde = -1.2;
                p.stimulus.amplitude = 1350.0;
            }
            Scenario::Fig6 => p.quartic = standard_quartic(5.0),
        }
        p
    }

    /// Start slightly above the stable axis equilibrium, at height `ε`.
    pub fn initial_state(self) -> SlowFastState {
        let p = self.params();
        SlowFastState::new(-p.b / p.a, p.epsilon)
    }

    /// Fast-time horizon long enough to decide the asymptotic regime.
    pub fn horizon(self) -> f64 {
        match self {
            Scenario::Fig3 => 4000.0,
            Scenario::Fig4 => 2.0e4,
            Scenario::Fig5 => 2.0e5,
            Scenario::Fig6 => 2000.0,
        }
    }
}

fn standard_quartic(r1: f64) -> QuarticSpec {
    QuarticSpec {
        q: 0.05,
        c: [-3.0; 4],
        r: [r1, 4.0, 2.0, 0.0],
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}
