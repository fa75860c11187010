//! Multiple shooting for periodic orbits of the planar core.
//!
//! Unknowns are the segment start points `x_i = (p1, ln p2)`, the period `T`
//! and `α`. Segment `i` runs for `T/m`; the `2m` matching conditions
//! `φ(T/m, x_i; α) - x_{i+1} = 0` are closed by two linear rows (a phase
//! condition and either an arclength or an amplitude condition).

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{solve, Control, OdeSystem, Piece, Sensitivity, SolverOptions};
use crate::model::{ModelParams, SlowFastState, Stimulus, Timescale};
use crate::systems::{Coords, CoreSystem};

/// Bound on `h·Re λ` in expanding directions; keeps the segment transition
/// matrices faithful along repelling slow branches.
const GROWTH_LIMIT: f64 = 0.5;

/// Closed orbit sampled at `m` equally spaced times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub alpha: f64,
    pub period: f64,
    /// Segment start points `(p1, ln p2)`.
    pub nodes: Vec<[f64; 2]>,
}

impl PeriodicOrbit {
    pub fn segments(&self) -> usize {
        self.nodes.len()
    }

    pub fn segment_time(&self) -> f64 {
        self.period / self.nodes.len() as f64
    }

    pub fn node_state(&self, i: usize) -> SlowFastState {
        let x = self.nodes[i];
        SlowFastState::new(x[0], x[1].exp())
    }

    pub(crate) fn pack(&self) -> DVector<f64> {
        let m = self.nodes.len();
        let mut z = DVector::zeros(2 * m + 2);
        for (i, x) in self.nodes.iter().enumerate() {
            z[2 * i] = x[0];
            z[2 * i + 1] = x[1];
        }
        z[2 * m] = self.period;
        z[2 * m + 1] = self.alpha;
        z
    }

    pub(crate) fn unpack(z: &DVector<f64>) -> Self {
        let m = (z.len() - 2) / 2;
        let nodes = (0..m).map(|i| [z[2 * i], z[2 * i + 1]]).collect();
        Self {
            alpha: z[2 * m + 1],
            period: z[2 * m],
            nodes,
        }
    }

    /// Physical states along the orbit, `per_segment` samples per segment,
    /// each segment integrated from its own node.
    pub fn sample(
        &self,
        params: &ModelParams,
        per_segment: usize,
        tol: f64,
    ) -> Result<Vec<(f64, SlowFastState)>> {
        let sys = system(params, self.alpha);
        let h = self.segment_time();
        let per = per_segment.max(1);
        let mut out = Vec::with_capacity(self.nodes.len() * per + 1);
        for (i, x) in self.nodes.iter().enumerate() {
            let t0 = i as f64 * h;
            out.push((t0, SlowFastState::new(x[0], x[1].exp())));
            let mut y = x.to_vec();
            for k in 1..per {
                let piece = [Piece::autonomous(0.0, h / per as f64)];
                let o = solve(
                    &sys,
                    &piece,
                    &y,
                    &SolverOptions::with_tol(tol),
                    Sensitivity::None,
                    &mut |_| Control::Continue,
                )?;
                y = o.y;
                out.push((
                    t0 + k as f64 * h / per as f64,
                    SlowFastState::new(y[0], y[1].exp()),
                ));
            }
        }
        let x0 = self.nodes[0];
        out.push((self.period, SlowFastState::new(x0[0], x0[1].exp())));
        Ok(out)
    }

    /// Same orbit on `m` segments, rebuilt by integrating from the old nodes.
    pub(crate) fn remeshed(&self, params: &ModelParams, m: usize, tol: f64) -> Result<Self> {
        let sys = system(params, self.alpha);
        let old = self.nodes.len();
        let (h_old, h_new) = (self.segment_time(), self.period / m as f64);
        let mut nodes = Vec::with_capacity(m);
        for j in 0..m {
            let t = j as f64 * h_new;
            let k = ((t / h_old).floor() as usize).min(old - 1);
            let dt = t - k as f64 * h_old;
            if dt <= 1e-12 * h_old {
                nodes.push(self.nodes[k]);
                continue;
            }
            let o = solve(
                &sys,
                &[Piece::autonomous(0.0, dt)],
                &self.nodes[k],
                &SolverOptions::with_tol(tol),
                Sensitivity::None,
                &mut |_| Control::Continue,
            )?;
            nodes.push([o.y[0], o.y[1]]);
        }
        Ok(Self {
            alpha: self.alpha,
            period: self.period,
            nodes,
        })
    }
}

pub(crate) fn system(params: &ModelParams, alpha: f64) -> CoreSystem {
    let mut p = params.with_alpha(alpha);
    p.stimulus = Stimulus::none();
    CoreSystem::new(p, Timescale::Fast, Coords::Log)
}

pub(crate) fn field(sys: &CoreSystem, x: [f64; 2]) -> Vector2<f64> {
    let mut f = [0.0; 2];
    sys.rhs(&x, 0.0, &mut f);
    Vector2::new(f[0], f[1])
}

/// Segment end points and their derivatives.
pub(crate) struct Evaluation {
    pub ends: Vec<Vector2<f64>>,
    pub stm: Vec<Matrix2<f64>>,
    /// `ln det` of each segment map, accumulated step by step.
    pub log_det: Vec<f64>,
    pub dalpha: Vec<Vector2<f64>>,
    pub f_end: Vec<Vector2<f64>>,
    pub p1_min: f64,
    pub p1_max: f64,
    pub p2_max: f64,
    pub residual: f64,
}

/// Integrate every segment with sensitivities. `hints` carries the last
/// accepted step size per segment between calls.
pub(crate) fn evaluate(
    params: &ModelParams,
    orbit: &PeriodicOrbit,
    tol: f64,
    hints: &mut Vec<f64>,
) -> Result<Evaluation> {
    let m = orbit.nodes.len();
    let h = orbit.segment_time();
    if !(h > 0.0) || !orbit.alpha.is_finite() {
        return Err(Error::Precondition(format!(
            "invalid shooting data: T = {}, alpha = {}",
            orbit.period, orbit.alpha
        )));
    }
    if hints.len() != m {
        *hints = vec![f64::NAN; m];
    }
    let sys = system(params, orbit.alpha);
    let mut ev = Evaluation {
        ends: Vec::with_capacity(m),
        stm: Vec::with_capacity(m),
        log_det: Vec::with_capacity(m),
        dalpha: Vec::with_capacity(m),
        f_end: Vec::with_capacity(m),
        p1_min: f64::INFINITY,
        p1_max: f64::NEG_INFINITY,
        p2_max: f64::NEG_INFINITY,
        residual: 0.0,
    };
    for (i, x) in orbit.nodes.iter().enumerate() {
        let opts = SolverOptions {
            h_init: hints[i].is_finite().then_some(hints[i]),
            max_steps: 200_000,
            growth_limit: Some(GROWTH_LIMIT),
            ..SolverOptions::with_tol(tol)
        };
        let (mut lo, mut hi, mut top) = (x[0], x[0], x[1]);
        let o = solve(
            &sys,
            &[Piece::autonomous(0.0, h)],
            x,
            &opts,
            Sensitivity::StateAndParameter,
            &mut |st| {
                lo = lo.min(st.y1[0]);
                hi = hi.max(st.y1[0]);
                top = top.max(st.y1[1]);
                Control::Continue
            },
        )?;
        hints[i] = o.h_next.min(h);
        let stm = o.stm.expect("sensitivities requested");
        let dp = o.param_sens.expect("sensitivities requested");
        let end = [o.y[0], o.y[1]];
        if !end.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { t: h });
        }
        ev.p1_min = ev.p1_min.min(lo);
        ev.p1_max = ev.p1_max.max(hi);
        ev.p2_max = ev.p2_max.max(top);
        ev.ends.push(Vector2::new(end[0], end[1]));
        ev.log_det
            .push(o.stm_log_det.expect("sensitivities requested"));
        ev.stm.push(Matrix2::new(
            stm[(0, 0)],
            stm[(0, 1)],
            stm[(1, 0)],
            stm[(1, 1)],
        ));
        ev.dalpha.push(Vector2::new(dp[0], dp[1]));
        ev.f_end.push(field(&sys, end));
    }
    ev.p2_max = ev.p2_max.exp();
    ev.residual = residual(orbit, &ev);
    Ok(ev)
}

/// Largest matching defect, relative to `1 + |x|` componentwise.
fn residual(orbit: &PeriodicOrbit, ev: &Evaluation) -> f64 {
    let m = orbit.nodes.len();
    let mut r: f64 = 0.0;
    for i in 0..m {
        let next = orbit.nodes[(i + 1) % m];
        for k in 0..2 {
            r = r.max((ev.ends[i][k] - next[k]).abs() / (1.0 + next[k].abs()));
        }
    }
    r
}

/// Linear condition `row · z = rhs` on the packed unknowns.
#[derive(Debug, Clone)]
pub(crate) struct LinearRow {
    pub row: DVector<f64>,
    pub rhs: f64,
}

impl LinearRow {
    /// Discrete integral phase condition against `reference`.
    pub fn phase(params: &ModelParams, reference: &PeriodicOrbit) -> Self {
        let m = reference.nodes.len();
        let sys = system(params, reference.alpha);
        let mut row = DVector::zeros(2 * m + 2);
        for (i, x) in reference.nodes.iter().enumerate() {
            let f = field(&sys, *x);
            row[2 * i] = f[0] / m as f64;
            row[2 * i + 1] = f[1] / m as f64;
        }
        let rhs = row.dot(&reference.pack());
        Self { row, rhs }
    }
}

/// Newton matrix: matching rows followed by the linear rows.
pub(crate) fn newton_matrix(
    orbit: &PeriodicOrbit,
    ev: &Evaluation,
    rows: &[&LinearRow],
) -> DMatrix<f64> {
    let m = orbit.nodes.len();
    let n = 2 * m + 2;
    let mut j = DMatrix::zeros(2 * m + rows.len(), n);
    let frac = 1.0 / m as f64;
    for i in 0..m {
        let next = (i + 1) % m;
        for r in 0..2 {
            for c in 0..2 {
                j[(2 * i + r, 2 * i + c)] += ev.stm[i][(r, c)];
            }
            j[(2 * i + r, 2 * next + r)] -= 1.0;
            j[(2 * i + r, 2 * m)] = frac * ev.f_end[i][r];
            j[(2 * i + r, 2 * m + 1)] = ev.dalpha[i][r];
        }
    }
    for (k, lr) in rows.iter().enumerate() {
        j.row_mut(2 * m + k).copy_from(&lr.row.transpose());
    }
    j
}

fn defects(orbit: &PeriodicOrbit, ev: &Evaluation, rows: &[&LinearRow]) -> DVector<f64> {
    let m = orbit.nodes.len();
    let z = orbit.pack();
    let mut f = DVector::zeros(2 * m + rows.len());
    for i in 0..m {
        let next = orbit.nodes[(i + 1) % m];
        f[2 * i] = ev.ends[i][0] - next[0];
        f[2 * i + 1] = ev.ends[i][1] - next[1];
    }
    for (k, lr) in rows.iter().enumerate() {
        f[2 * m + k] = lr.row.dot(&z) - lr.rhs;
    }
    f
}

pub(crate) struct Corrected {
    pub orbit: PeriodicOrbit,
    pub eval: Evaluation,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct NewtonOptions {
    pub tol: f64,
    pub residual_tol: f64,
    pub max_iter: usize,
}

/// Newton's method on the matching rows plus two linear rows.
pub(crate) fn correct(
    params: &ModelParams,
    guess: PeriodicOrbit,
    rows: [&LinearRow; 2],
    opts: &NewtonOptions,
    hints: &mut Vec<f64>,
) -> Result<Corrected> {
    let mut orbit = guess;
    let mut last_res = f64::INFINITY;
    let fail = |orbit: &PeriodicOrbit, why: &str| {
        Error::SeedCorrectionFailed(format!(
            "{why} at alpha = {}, T = {}",
            orbit.alpha, orbit.period
        ))
    };
    for it in 0..=opts.max_iter {
        let ev = evaluate(params, &orbit, opts.tol, hints)?;
        let f = defects(&orbit, &ev, &rows);
        let linear_ok = rows
            .iter()
            .enumerate()
            .all(|(k, r)| f[2 * orbit.nodes.len() + k].abs() <= 1e-10 * (1.0 + r.rhs.abs()));
        if ev.residual <= opts.residual_tol && linear_ok {
            return Ok(Corrected {
                orbit,
                eval: ev,
                iterations: it,
            });
        }
        if it == opts.max_iter {
            return Err(fail(&orbit, "no convergence"));
        }
        if it >= 2 && ev.residual > 0.5 * last_res {
            return Err(fail(&orbit, "residual stagnates"));
        }
        last_res = ev.residual;
        let j = newton_matrix(&orbit, &ev, &rows);
        let dz = j
            .lu()
            .solve(&(-f))
            .ok_or_else(|| fail(&orbit, "singular Newton matrix"))?;
        if !dz.iter().all(|v| v.is_finite()) {
            return Err(fail(&orbit, "non-finite Newton step"));
        }
        let next = PeriodicOrbit::unpack(&(orbit.pack() + dz));
        if !(next.period > 0.0) {
            return Err(fail(&orbit, "period became non-positive"));
        }
        orbit = next;
    }
    Err(fail(&orbit, "no convergence"))
}

/// `(trivial, nontrivial)` Floquet multipliers. The trivial one is the
/// product over segments of the growth of the field vector from node to
/// node (chaining full products would amplify roundoff along expanding
/// directions); the other follows from `det M = Π det Φ_i`, each
/// determinant accumulated over integrator steps.
pub(crate) fn floquet(params: &ModelParams, orbit: &PeriodicOrbit, ev: &Evaluation) -> (f64, f64) {
    let sys = system(params, orbit.alpha);
    let mut log_trivial = 0.0;
    let mut sign_trivial = 1.0;
    let log_det: f64 = ev.log_det.iter().sum();
    for (i, phi) in ev.stm.iter().enumerate() {
        let f0 = field(&sys, orbit.nodes[i]);
        let f1 = ev.f_end[i];
        let ratio = (phi * f0).dot(&f1) / f1.dot(&f1);
        log_trivial += ratio.abs().ln();
        sign_trivial *= ratio.signum();
    }
    let trivial = sign_trivial * log_trivial.exp();
    (trivial, sign_trivial * (log_det - log_trivial).exp())
}
