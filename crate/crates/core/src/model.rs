//! Parameters and vector fields of the planar slow-fast core and of the full
//! six-dimensional release model.
//!
//! Fast time `t` and slow time `τ = ε·t`. In fast time
//!
//! ```text
//! p1' = ε·(g(p1, p2) + V_in(t)),   g = (p2 - (a p1 + b))·(p2 - (ã p1 + b̃))·(α - p2)
//! p2' = p2·(p1 - Γ(p2))
//! ```
//!
//! and the slow-time field is the fast one divided by `ε`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quartic::QuarticSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Timescale {
    #[default]
    Fast,
    Slow,
}

/// Step input `V·χ_[t_start, t_end)`, declared in the time variable `timescale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stimulus {
    #[serde(rename = "V")]
    pub amplitude: f64,
    pub t_start: f64,
    pub t_end: f64,
    #[serde(default)]
    pub timescale: Timescale,
}

impl Stimulus {
    pub fn none() -> Self {
        Self {
            amplitude: 0.0,
            t_start: 0.0,
            t_end: 1.0,
            timescale: Timescale::Fast,
        }
    }

    pub fn step(amplitude: f64, t_start: f64, t_end: f64) -> Self {
        Self {
            amplitude,
            t_start,
            t_end,
            timescale: Timescale::Fast,
        }
    }

    /// Value at `t` measured in the stimulus' own time variable.
    pub fn eval(&self, t: f64) -> f64 {
        if t >= self.t_start && t < self.t_end {
            self.amplitude
        } else {
            0.0
        }
    }

    /// Switching times expressed in the time variable `ts`.
    pub fn interval_in(&self, ts: Timescale, epsilon: f64) -> (f64, f64) {
        let k = time_factor(self.timescale, ts, epsilon);
        (self.t_start * k, self.t_end * k)
    }

    /// Value at time `t` measured in `ts`.
    pub fn eval_in(&self, t: f64, ts: Timescale, epsilon: f64) -> f64 {
        let (s, e) = self.interval_in(ts, epsilon);
        if t >= s && t < e {
            self.amplitude
        } else {
            0.0
        }
    }

    pub fn is_active(&self) -> bool {
        self.amplitude != 0.0 && self.t_end > self.t_start
    }
}

/// Multiplier converting a time in `from` units to `to` units.
fn time_factor(from: Timescale, to: Timescale, epsilon: f64) -> f64 {
    match (from, to) {
        (Timescale::Fast, Timescale::Slow) => epsilon,
        (Timescale::Slow, Timescale::Fast) => 1.0 / epsilon,
        _ => 1.0,
    }
}

/// Constants of the depression/facilitation, conductance and membrane equations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailParams {
    #[serde(rename = "tau_D")]
    pub tau_d: f64,
    #[serde(rename = "tau_F")]
    pub tau_f: f64,
    pub f0: f64,
    #[serde(rename = "F_fac")]
    pub f_fac: f64,
    pub tau_syn: f64,
    pub gbar_syn: f64,
    #[serde(rename = "C_cap")]
    pub c_cap: f64,
    #[serde(rename = "g_L")]
    pub g_l: f64,
    #[serde(rename = "E_L")]
    pub e_l: f64,
    #[serde(rename = "E_syn")]
    pub e_syn: f64,
}

impl Default for TailParams {
    fn default() -> Self {
        Self {
            tau_d: 200.0,
            tau_f: 2500.0,
            f0: 0.3,
            f_fac: 0.25,
            tau_syn: 20.0,
            gbar_syn: 0.4,
            c_cap: 0.196,
            g_l: 1.0 / 220.0,
            e_l: -55.0,
            e_syn: -57.0,
        }
    }
}

impl TailParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tau_D", self.tau_d),
            ("tau_F", self.tau_f),
            ("tau_syn", self.tau_syn),
            ("gbar_syn", self.gbar_syn),
            ("C_cap", self.c_cap),
            ("g_L", self.g_l),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.f0) {
            return Err(Error::InvalidParameter(format!(
                "f0 must lie in [0, 1], got {}",
                self.f0
            )));
        }
        if !(self.f_fac >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "F_fac must be non-negative, got {}",
                self.f_fac
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub epsilon: f64,
    pub a: f64,
    pub b: f64,
    pub a_tilde: f64,
    pub b_tilde: f64,
    pub alpha: f64,
    #[serde(flatten)]
    pub quartic: QuarticSpec,
    pub stimulus: Stimulus,
    #[serde(default)]
    pub tail: TailParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlowFastState {
    pub p1: f64,
    pub p2: f64,
}

impl SlowFastState {
    pub fn new(p1: f64, p2: f64) -> Self {
        Self { p1, p2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FullState {
    pub p1: f64,
    pub p2: f64,
    pub d: f64,
    pub f: f64,
    pub g_syn: f64,
    pub v: f64,
}

impl FullState {
    pub fn to_array(self) -> [f64; 6] {
        [self.p1, self.p2, self.d, self.f, self.g_syn, self.v]
    }

    pub fn from_array(x: [f64; 6]) -> Self {
        Self {
            p1: x[0],
            p2: x[1],
            d: x[2],
            f: x[3],
            g_syn: x[4],
            v: x[5],
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "alpha must be non-negative, got {}",
                self.alpha
            )));
        }
        if self.a == 0.0 || self.a_tilde == 0.0 {
            return Err(Error::InvalidParameter(
                "slopes a and a_tilde must be non-zero".into(),
            ));
        }
        if ![self.a, self.b, self.a_tilde, self.b_tilde]
            .iter()
            .all(|x| x.is_finite())
        {
            return Err(Error::InvalidParameter(
                "non-finite line coefficient".into(),
            ));
        }
        self.quartic.validate()?;
        if !self.quartic.tc_point(self.a_tilde, self.b_tilde).valid {
            return Err(Error::InvalidParameter(format!(
                "Γ(0) = {} lies left of the unstable axis equilibrium -b̃/ã = {}",
                self.quartic.eval(0.0),
                -self.b_tilde / self.a_tilde
            )));
        }
        let s = &self.stimulus;
        if !(s.amplitude >= 0.0) || !(s.t_start < s.t_end) {
            return Err(Error::InvalidParameter(format!(
                "stimulus needs V >= 0 and t_start < t_end, got V = {}, [{}, {})",
                s.amplitude, s.t_start, s.t_end
            )));
        }
        self.tail.validate()
    }

    /// Stable axis equilibrium `S = (-b/a, 0)`.
    pub fn s_point(&self) -> SlowFastState {
        SlowFastState::new(-self.b / self.a, 0.0)
    }

    /// Unstable axis equilibrium `U = (-b̃/ã, 0)`.
    pub fn u_point(&self) -> SlowFastState {
        SlowFastState::new(-self.b_tilde / self.a_tilde, 0.0)
    }

    /// Equilibrium on the quartic, `(Γ(α), α)`.
    pub fn u_tilde_point(&self) -> SlowFastState {
        SlowFastState::new(self.quartic.eval(self.alpha), self.alpha)
    }

    pub fn gamma0(&self) -> f64 {
        self.quartic.eval(0.0)
    }

    /// `g(p1, p2)`, the cubic slow nullcline product.
    pub fn slow_product(&self, p1: f64, p2: f64) -> f64 {
        let (l1, l2) = self.line_gaps(p1, p2);
        l1 * l2 * (self.alpha - p2)
    }

    /// `(p2 - (a p1 + b), p2 - (ã p1 + b̃))`.
    pub fn line_gaps(&self, p1: f64, p2: f64) -> (f64, f64) {
        (
            p2 - (self.a * p1 + self.b),
            p2 - (self.a_tilde * p1 + self.b_tilde),
        )
    }

    /// `(∂g/∂p1, ∂g/∂p2, ∂g/∂α)`.
    pub fn slow_product_grad(&self, p1: f64, p2: f64) -> (f64, f64, f64) {
        let (l1, l2) = self.line_gaps(p1, p2);
        let m = self.alpha - p2;
        let d1 = -self.a * l2 * m - self.a_tilde * l1 * m;
        let d2 = l2 * m + l1 * m - l1 * l2;
        (d1, d2, l1 * l2)
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        Self { alpha, ..*self }
    }
}

/// Planar field at `t` (in units of `timescale`), stimulus included.
pub fn core_field(
    params: &ModelParams,
    state: SlowFastState,
    t: f64,
    timescale: Timescale,
) -> [f64; 2] {
    let input = params.stimulus.eval_in(t, timescale, params.epsilon);
    core_field_with_input(params, state, input, timescale)
}

pub(crate) fn core_field_with_input(
    params: &ModelParams,
    state: SlowFastState,
    input: f64,
    timescale: Timescale,
) -> [f64; 2] {
    let g = params.slow_product(state.p1, state.p2);
    let h = state.p2 * (state.p1 - params.quartic.eval(state.p2));
    match timescale {
        Timescale::Fast => [params.epsilon * (g + input), h],
        Timescale::Slow => [g + input, h / params.epsilon],
    }
}

/// Layer equation: `p1` frozen at `p1_frozen`; returns `dp2/dt`.
pub fn layer_field(params: &ModelParams, state: SlowFastState, p1_frozen: f64) -> f64 {
    state.p2 * (p1_frozen - params.quartic.eval(state.p2))
}

/// Reduced flow on the axis `p2 = 0` in slow time: `α (a p1 + b)(ã p1 + b̃)`.
pub fn axis_reduced_rate(params: &ModelParams, p1: f64) -> f64 {
    params.alpha * (params.a * p1 + params.b) * (params.a_tilde * p1 + params.b_tilde)
}

/// Six-dimensional field in slow time `τ`.
pub fn full_field(params: &ModelParams, state: FullState, tau: f64) -> [f64; 6] {
    let input = params
        .stimulus
        .eval_in(tau, Timescale::Slow, params.epsilon);
    full_field_with_input(params, state, input)
}

pub(crate) fn full_field_with_input(params: &ModelParams, x: FullState, input: f64) -> [f64; 6] {
    let tp = &params.tail;
    let core = core_field_with_input(
        params,
        SlowFastState::new(x.p1, x.p2),
        input,
        Timescale::Slow,
    );
    let release = x.d * x.f * x.p2;
    [
        core[0],
        core[1],
        (1.0 - x.d) / tp.tau_d - release,
        (tp.f0 - x.f) / tp.tau_f + tp.f_fac * (1.0 - x.f) * x.p2,
        -x.g_syn / tp.tau_syn + tp.gbar_syn * release,
        (-tp.g_l * (x.v - tp.e_l) - x.g_syn * (x.v - tp.e_syn)) / tp.c_cap,
    ]
}

/// Rest state of the full model: `(-b/a, 0, 1, f0, 0, E_L)`.
pub fn full_rest_state(params: &ModelParams) -> FullState {
    FullState {
        p1: -params.b / params.a,
        p2: 0.0,
        d: 1.0,
        f: params.tail.f0,
        g_syn: 0.0,
        v: params.tail.e_l,
    }
}
