//! The planar core and the six-dimensional model as [`OdeSystem`]s.
//!
//! Orbits of the core spend long stretches exponentially close to the axis
//! `p2 = 0` (down to `p2 ~ e^-40000` for some parameter sets), far below the
//! smallest positive double. The height is therefore integrated as
//! `u = ln p2`, for which the fast equation becomes `u' = p1 - Γ(e^u)`. On the
//! invariant axis itself (`p2 = 0` exactly) linear coordinates are used.

use nalgebra::DMatrix;

use crate::integrator::OdeSystem;
use crate::model::{ModelParams, Timescale};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coords {
    /// Second component is `ln p2`.
    Log,
    /// Second component is `p2`.
    Linear,
}

impl Coords {
    /// Log coordinates unless the start lies on the axis.
    pub fn for_height(p2: f64) -> Self {
        if p2 > 0.0 {
            Coords::Log
        } else {
            Coords::Linear
        }
    }

    pub fn to_internal(self, p2: f64) -> f64 {
        match self {
            Coords::Log => p2.ln(),
            Coords::Linear => p2,
        }
    }

    pub fn to_physical(self, y2: f64) -> f64 {
        match self {
            Coords::Log => y2.exp(),
            Coords::Linear => y2,
        }
    }
}

/// Planar core in the chosen clock and height coordinate.
#[derive(Debug, Clone, Copy)]
pub struct CoreSystem {
    pub params: ModelParams,
    pub timescale: Timescale,
    pub coords: Coords,
}

impl CoreSystem {
    pub fn new(params: ModelParams, timescale: Timescale, coords: Coords) -> Self {
        Self {
            params,
            timescale,
            coords,
        }
    }

    /// `(k1, k2)` multiplying the p1 and height equations for the clock.
    fn clock(&self) -> (f64, f64) {
        match self.timescale {
            Timescale::Fast => (self.params.epsilon, 1.0),
            Timescale::Slow => (1.0, 1.0 / self.params.epsilon),
        }
    }
}

impl OdeSystem for CoreSystem {
    fn dim(&self) -> usize {
        2
    }

    fn rhs(&self, y: &[f64], input: f64, dy: &mut [f64]) {
        let p = &self.params;
        let (k1, k2) = self.clock();
        let p2 = self.coords.to_physical(y[1]);
        let gap = y[0] - p.quartic.eval(p2);
        dy[0] = k1 * (p.slow_product(y[0], p2) + input);
        dy[1] = k2
            * match self.coords {
                Coords::Log => gap,
                Coords::Linear => p2 * gap,
            };
    }

    fn jacobian(&self, y: &[f64], _input: f64, jac: &mut DMatrix<f64>) {
        let p = &self.params;
        let (k1, k2) = self.clock();
        let p2 = self.coords.to_physical(y[1]);
        let (g1, g2, _) = p.slow_product_grad(y[0], p2);
        let q = &p.quartic;
        match self.coords {
            Coords::Log => {
                jac[(0, 0)] = k1 * g1;
                jac[(0, 1)] = k1 * g2 * p2;
                jac[(1, 0)] = k2;
                jac[(1, 1)] = -k2 * q.deriv(p2) * p2;
            }
            Coords::Linear => {
                jac[(0, 0)] = k1 * g1;
                jac[(0, 1)] = k1 * g2;
                jac[(1, 0)] = k2 * p2;
                jac[(1, 1)] = k2 * (y[0] - q.eval(p2) - p2 * q.deriv(p2));
            }
        }
    }

    fn rhs_param(&self, y: &[f64], _input: f64, out: &mut [f64]) {
        let (k1, _) = self.clock();
        let p2 = self.coords.to_physical(y[1]);
        let (l1, l2) = self.params.line_gaps(y[0], p2);
        out[0] = k1 * l1 * l2;
        out[1] = 0.0;
    }
}

/// Six-dimensional model in slow time; state `[p1, h, d, f, g_syn, v]` with
/// `h` the height in `coords`.
#[derive(Debug, Clone, Copy)]
pub struct FullSystem {
    pub params: ModelParams,
    pub coords: Coords,
}

impl OdeSystem for FullSystem {
    fn dim(&self) -> usize {
        6
    }

    fn rhs(&self, y: &[f64], input: f64, dy: &mut [f64]) {
        let p = &self.params;
        let t = &p.tail;
        let p2 = self.coords.to_physical(y[1]);
        let (d, f, g, v) = (y[2], y[3], y[4], y[5]);
        let gap = y[0] - p.quartic.eval(p2);
        let release = d * f * p2;
        dy[0] = p.slow_product(y[0], p2) + input;
        dy[1] = match self.coords {
            Coords::Log => gap,
            Coords::Linear => p2 * gap,
        } / p.epsilon;
        dy[2] = (1.0 - d) / t.tau_d - release;
        dy[3] = (t.f0 - f) / t.tau_f + t.f_fac * (1.0 - f) * p2;
        dy[4] = -g / t.tau_syn + t.gbar_syn * release;
        dy[5] = (-t.g_l * (v - t.e_l) - g * (v - t.e_syn)) / t.c_cap;
    }

    fn jacobian(&self, y: &[f64], _input: f64, jac: &mut DMatrix<f64>) {
        let p = &self.params;
        let t = &p.tail;
        let p2 = self.coords.to_physical(y[1]);
        let (d, f, g, v) = (y[2], y[3], y[4], y[5]);
        // dp2/dh
        let chain = match self.coords {
            Coords::Log => p2,
            Coords::Linear => 1.0,
        };
        let (g1, g2, _) = p.slow_product_grad(y[0], p2);
        let q = &p.quartic;
        jac.fill(0.0);
        jac[(0, 0)] = g1;
        jac[(0, 1)] = g2 * chain;
        match self.coords {
            Coords::Log => {
                jac[(1, 0)] = 1.0 / p.epsilon;
                jac[(1, 1)] = -q.deriv(p2) * p2 / p.epsilon;
            }
            Coords::Linear => {
                jac[(1, 0)] = p2 / p.epsilon;
                jac[(1, 1)] = (y[0] - q.eval(p2) - p2 * q.deriv(p2)) / p.epsilon;
            }
        }
        jac[(2, 1)] = -d * f * chain;
        jac[(2, 2)] = -1.0 / t.tau_d - f * p2;
        jac[(2, 3)] = -d * p2;
        jac[(3, 1)] = t.f_fac * (1.0 - f) * chain;
        jac[(3, 3)] = -1.0 / t.tau_f - t.f_fac * p2;
        jac[(4, 1)] = t.gbar_syn * d * f * chain;
        jac[(4, 2)] = t.gbar_syn * f * p2;
        jac[(4, 3)] = t.gbar_syn * d * p2;
        jac[(4, 4)] = -1.0 / t.tau_syn;
        jac[(5, 4)] = -(v - t.e_syn) / t.c_cap;
        jac[(5, 5)] = (-t.g_l - g) / t.c_cap;
    }
}
