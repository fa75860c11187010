//! Stiff time integration: a Radau IIA stepper driven over pieces of constant
//! input, sign-change event location on the dense output, and the recorded
//! trajectory type.

mod events;
mod radau;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use events::{Detector, Direction, EventFn, Hit};
pub use radau::{solve, Outcome, StepView};

/// Autonomous field `y' = F(y; input)`; the input is constant on each piece.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, y: &[f64], input: f64, dy: &mut [f64]);
    fn jacobian(&self, y: &[f64], input: f64, jac: &mut DMatrix<f64>);
    /// `∂F/∂α` for the continuation parameter; zero unless overridden.
    fn rhs_param(&self, _y: &[f64], _input: f64, out: &mut [f64]) {
        out.fill(0.0);
    }
}

/// Time interval with a constant input value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub t0: f64,
    pub t1: f64,
    pub input: f64,
}

impl Piece {
    pub fn autonomous(t0: f64, t1: f64) -> Self {
        Self { t0, t1, input: 0.0 }
    }
}

/// Split `[t0, t1]` at the ends of a step input `value·χ_[s0, s1)`.
pub fn step_input_pieces(t0: f64, t1: f64, s0: f64, s1: f64, value: f64) -> Vec<Piece> {
    let mut cuts = vec![t0];
    for c in [s0, s1] {
        if c > t0 && c < t1 {
            cuts.push(c);
        }
    }
    cuts.push(t1);
    cuts.windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            let input = if mid >= s0 && mid < s1 { value } else { 0.0 };
            Piece {
                t0: w[0],
                t1: w[1],
                input,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sensitivity {
    None,
    State,
    StateAndParameter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: Option<f64>,
    pub h_max: f64,
    pub max_steps: usize,
    /// Caps `h·Re λ` over the Jacobian eigenvalues with positive real part,
    /// so that sensitivities stay accurate in expanding directions.
    #[serde(default)]
    pub growth_limit: Option<f64>,
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            h_init: None,
            h_max: f64::INFINITY,
            max_steps: 2_000_000,
            growth_limit: None,
        }
    }
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self::with_tol(1e-9)
    }
}

pub enum Control {
    Continue,
    /// Stop at the given time inside the current step.
    Stop(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    SpikeOn,
    SpikeOff,
    Landing,
    Exit,
    FoldFalloff,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::SpikeOn => "spike_on",
            EventKind::SpikeOff => "spike_off",
            EventKind::Landing => "landing",
            EventKind::Exit => "exit",
            EventKind::FoldFalloff => "fold_falloff",
        }
    }
}

/// Event with the physical state at the event time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    pub time: f64,
    pub state: Vec<f64>,
}

/// Physical states `[p1, p2]` or `[p1, p2, d, f, g_syn, v]` at accepted steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub timescale: crate::model::Timescale,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub events: Vec<Event>,
    /// Local maxima of `p2`, located as downward zeros of its growth rate.
    pub peaks: Vec<Event>,
    pub steps: usize,
    pub rejected: usize,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn last_state(&self) -> Option<&[f64]> {
        self.states.last().map(Vec::as_slice)
    }

    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.kind == kind)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pieces_split_at_stimulus() {
        let p = step_input_pieces(0.0, 10.0, 0.0, 0.04, 2700.0);
        assert_eq!(p.len(), 2);
        assert_eq!((p[0].t0, p[0].t1, p[0].input), (0.0, 0.04, 2700.0));
        assert_eq!((p[1].t0, p[1].t1, p[1].input), (0.04, 10.0, 0.0));
        let q = step_input_pieces(0.0, 10.0, 1.0, 2.0, 5.0);
        assert_eq!(
            q.iter().map(|x| x.input).collect::<Vec<_>>(),
            vec![0.0, 5.0, 0.0]
        );
        let r = step_input_pieces(3.0, 10.0, 0.0, 0.04, 5.0);
        assert_eq!(
            r,
            vec![Piece {
                t0: 3.0,
                t1: 10.0,
                input: 0.0
            }]
        );
    }
}
