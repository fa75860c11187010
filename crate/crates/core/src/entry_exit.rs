//! Delayed loss of stability along the axis `p2 = 0`.
//!
//! An orbit that reaches the axis at `p10 < Γ(0)` (attracting part) drifts
//! past the transcritical point and leaves at the `p11 > Γ(0)` where the
//! accumulated contraction and expansion balance:
//!
//! ```text
//! I(p10, p11) = ∫_{p10}^{p11} (x - Γ(0)) / ((a x + b)(ã x + b̃)) dx = 0
//! ```
//!
//! `I` is evaluated from its logarithmic antiderivative and, independently,
//! by double-exponential quadrature.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{
    solve, Detector, Direction, EventFn, EventKind, Piece, Sensitivity, SolverOptions, Trajectory,
};
use crate::model::{ModelParams, Timescale};
use crate::quartic::FoldKind;
use crate::systems::{Coords, CoreSystem};

/// Absolute error targeted by the quadrature route.
pub const QUADRATURE_TOL: f64 = 1e-13;
/// Multiple of the largest fold `|p1|` used as the default search limit.
pub const P11_MAX_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitMethod {
    ClosedForm,
    Quadrature,
    Simulation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntryExitResult {
    pub p10: f64,
    pub p11: f64,
    pub method: ExitMethod,
    pub residual: f64,
}

/// Partial-fraction data: `I = ca·ln|a x + b| + cb·ln|ã x + b̃|` between the limits.
#[derive(Debug, Clone, Copy)]
struct Fractions {
    ca: f64,
    cb: f64,
    gamma0: f64,
}

fn fractions(params: &ModelParams) -> Result<Fractions> {
    let (a, b, at, bt) = (params.a, params.b, params.a_tilde, params.b_tilde);
    let d = a * bt - at * b;
    if d == 0.0 || !d.is_finite() {
        return Err(Error::InvalidParameter(
            "lines a·p1 + b and ã·p1 + b̃ share their zero".into(),
        ));
    }
    let g = params.gamma0();
    Ok(Fractions {
        ca: -(b + a * g) / (a * d),
        cb: (bt + at * g) / (at * d),
        gamma0: g,
    })
}

fn poles(params: &ModelParams) -> [f64; 2] {
    [-params.b / params.a, -params.b_tilde / params.a_tilde]
}

fn check_poles(params: &ModelParams, lo: f64, hi: f64) -> Result<()> {
    let (lo, hi) = (lo.min(hi), lo.max(hi));
    for pole in poles(params) {
        if pole >= lo && pole <= hi {
            return Err(Error::PoleInInterval { pole });
        }
    }
    Ok(())
}

/// The integrand `(x - Γ(0)) / ((a x + b)(ã x + b̃))`.
pub fn exit_integrand(params: &ModelParams, x: f64) -> f64 {
    (x - params.gamma0()) / ((params.a * x + params.b) * (params.a_tilde * x + params.b_tilde))
}

/// Residual of the implicit entry-exit relation written without the
/// partial-fraction denominators:
/// `a(ãΓ(0) + b̃)·ln((ã p10 + b̃)/(ã p11 + b̃)) - ã(aΓ(0) + b)·ln((a p10 + b)/(a p11 + b))`.
/// It equals `-a·ã·(a b̃ - ã b)·I(p10, p11)`.
pub fn implicit_relation_residual(params: &ModelParams, p10: f64, p11: f64) -> f64 {
    let (a, b, at, bt) = (params.a, params.b, params.a_tilde, params.b_tilde);
    let g = params.gamma0();
    a * (at * g + bt) * ((at * p10 + bt) / (at * p11 + bt)).ln()
        - at * (a * g + b) * ((a * p10 + b) / (a * p11 + b)).ln()
}

fn closed_form_unchecked(params: &ModelParams, fr: &Fractions, p10: f64, p11: f64) -> f64 {
    let (a, b, at, bt) = (params.a, params.b, params.a_tilde, params.b_tilde);
    fr.ca * ((a * p11 + b) / (a * p10 + b)).ln() + fr.cb * ((at * p11 + bt) / (at * p10 + bt)).ln()
}

/// Quadrature in `s = ln(x - P)`, `P` the nearest pole below the interval,
/// which keeps the integrand bounded for exits far out on the axis.
fn quadrature_unchecked(params: &ModelParams, p10: f64, p11: f64) -> f64 {
    if p10 == p11 {
        return 0.0;
    }
    let (lo, hi) = (p10.min(p11), p10.max(p11));
    let shift = poles(params)
        .into_iter()
        .filter(|p| *p < lo)
        .fold(f64::NEG_INFINITY, f64::max);
    let value = if shift.is_finite() {
        let (s0, s1) = ((lo - shift).ln(), (hi - shift).ln());
        quadrature::integrate(
            |s: f64| {
                let w = s.exp();
                exit_integrand(params, shift + w) * w
            },
            s0,
            s1,
            QUADRATURE_TOL,
        )
        .integral
    } else {
        quadrature::integrate(|x: f64| exit_integrand(params, x), lo, hi, QUADRATURE_TOL).integral
    };
    if p11 >= p10 {
        value
    } else {
        -value
    }
}

/// `I(p10, p11)` by the requested route.
pub fn exit_integral(params: &ModelParams, p10: f64, p11: f64, method: ExitMethod) -> Result<f64> {
    check_poles(params, p10, p11)?;
    match method {
        ExitMethod::ClosedForm => Ok(closed_form_unchecked(params, &fractions(params)?, p10, p11)),
        ExitMethod::Quadrature => Ok(quadrature_unchecked(params, p10, p11)),
        ExitMethod::Simulation => Err(Error::Precondition(
            "the integral has no simulation route".into(),
        )),
    }
}

/// Default upper limit of the exit search.
pub fn default_p11_max(params: &ModelParams) -> Result<f64> {
    let folds = params.quartic.fold_points()?;
    let m = folds.iter().map(|f| f.p1.abs()).fold(0.0, f64::max);
    Ok(P11_MAX_FACTOR * m.max(params.gamma0().abs()).max(1.0))
}

fn check_entry(params: &ModelParams, p10: f64) -> Result<()> {
    let lo = -params.b_tilde / params.a_tilde;
    let hi = params.gamma0();
    if !(p10 > lo && p10 <= hi) {
        return Err(Error::EntryOutOfRange { p10, lo, hi });
    }
    Ok(())
}

/// Root of the increasing map `p11 ↦ I(p10, p11)` on `(Γ(0), p11_max]`,
/// searched in `s = ln(p11 - P)` with bisection safeguarding Newton.
fn exit_root<F: FnMut(f64) -> f64>(
    params: &ModelParams,
    p10: f64,
    p11_max: f64,
    mut value: F,
) -> Result<(f64, f64)> {
    let g = params.gamma0();
    let shift = poles(params)
        .into_iter()
        .filter(|p| *p < p10)
        .fold(f64::NEG_INFINITY, f64::max);
    let shift = if shift.is_finite() { shift } else { p10 - 1.0 };
    let to_x = |s: f64| shift + s.exp();
    let (mut lo, mut hi) = ((g - shift).ln(), (p11_max - shift).ln());
    let f_hi = value(p11_max);
    if !(f_hi > 0.0) {
        return Err(Error::NoExit { p11_max });
    }
    let mut s = hi.min(lo + 1.0);
    let mut best = (p11_max, f_hi.abs());
    for _ in 0..200 {
        let x = to_x(s);
        let fx = value(x);
        if fx.abs() < best.1 {
            best = (x, fx.abs());
        }
        if fx == 0.0 {
            break;
        }
        if fx > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let slope = exit_integrand(params, x) * (x - shift);
        let newton = s - fx / slope;
        let next = if slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - s).abs() <= 4.0 * f64::EPSILON * s.abs().max(1.0)
            || hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(1.0)
        {
            let xn = to_x(next);
            let fn_ = value(xn);
            if fn_.abs() < best.1 {
                best = (xn, fn_.abs());
            }
            break;
        }
        s = next;
    }
    Ok(best)
}

/// Exit point by the closed form (default search limit).
pub fn exit_point(params: &ModelParams, p10: f64) -> Result<EntryExitResult> {
    exit_point_with(params, p10, ExitMethod::ClosedForm, None)
}

/// Exit point by the closed form or by quadrature, up to `p11_max`.
pub fn exit_point_with(
    params: &ModelParams,
    p10: f64,
    method: ExitMethod,
    p11_max: Option<f64>,
) -> Result<EntryExitResult> {
    check_entry(params, p10)?;
    let fr = fractions(params)?;
    let g = fr.gamma0;
    if p10 == g {
        return Ok(EntryExitResult {
            p10,
            p11: g,
            method,
            residual: 0.0,
        });
    }
    let p11_max = match p11_max {
        Some(m) => m,
        None => default_p11_max(params)?,
    };
    if !(p11_max > g) {
        return Err(Error::Precondition(format!(
            "p11_max = {p11_max} must exceed Γ(0) = {g}"
        )));
    }
    check_poles(params, p10, p11_max)?;
    let (p11, residual) = match method {
        ExitMethod::ClosedForm => exit_root(params, p10, p11_max, |x| {
            closed_form_unchecked(params, &fr, p10, x)
        })?,
        ExitMethod::Quadrature => exit_root(params, p10, p11_max, |x| {
            quadrature_unchecked(params, p10, x)
        })?,
        ExitMethod::Simulation => {
            return Err(Error::Precondition(
                "use simulated_exit for the simulation route".into(),
            ));
        }
    };
    Ok(EntryExitResult {
        p10,
        p11,
        method,
        residual,
    })
}

/// Integrate the unforced fast-time core from `(p10, delta)` until `p2`
/// climbs back through `delta`; the exit is `p1` at that crossing.
pub fn simulated_exit(params: &ModelParams, p10: f64, delta: f64) -> Result<EntryExitResult> {
    simulated_exit_with(params, p10, delta, 1e-10, 1e7)
}

pub fn simulated_exit_with(
    params: &ModelParams,
    p10: f64,
    delta: f64,
    tol: f64,
    t_max: f64,
) -> Result<EntryExitResult> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Precondition(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    params.validate()?;
    let sys = CoreSystem::new(*params, Timescale::Fast, Coords::Log);
    let level = delta.ln();
    // Exits beyond this are reported as escapes, not integrated to blow-up.
    let escape = 1e6f64.max(10.0 * default_p11_max(params)?);
    let fns = vec![
        EventFn {
            tag: true,
            direction: Direction::Up,
            terminal: true,
            f: Box::new(move |y: &[f64]| y[1] - level),
        },
        EventFn {
            tag: false,
            direction: Direction::Up,
            terminal: true,
            f: Box::new(move |y: &[f64]| y[0] - escape),
        },
    ];
    let y0 = [p10, level];
    let mut det = Detector::new(fns, &y0);
    let opts = SolverOptions::with_tol(tol);
    let out = solve(
        &sys,
        &[Piece::autonomous(0.0, t_max)],
        &y0,
        &opts,
        Sensitivity::None,
        &mut |st| det.on_step(st),
    )?;
    match det.hits.last() {
        Some(hit) if out.stopped && hit.tag => Ok(EntryExitResult {
            p10,
            p11: hit.state[0],
            method: ExitMethod::Simulation,
            residual: (hit.state[1].exp() - delta).abs(),
        }),
        _ => Err(Error::NoExitBeforeTmax { t_max }),
    }
}

/// Whether an orbit entering at `p10` leaves the axis beyond the local
/// maximum of `Γ`, so that it can reach the upper quartic branch.
pub fn upper_branch_accessible(params: &ModelParams, p10: f64) -> Result<bool> {
    let folds = params.quartic.fold_points()?;
    let peak = folds
        .iter()
        .find(|f| f.kind == FoldKind::LocalMax)
        .map(|f| f.p1)
        .ok_or(Error::FoldNotFound { lo: 0.0, hi: 0.0 })?;
    match exit_point(params, p10) {
        Ok(r) => Ok(r.p11 > peak),
        // The search limit already lies far beyond the local maximum.
        Err(Error::NoExit { .. }) => Ok(true),
        Err(e) => Err(e),
    }
}

/// A fall from a local-minimum fold and the axis landing that ended it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandingOffset {
    pub fold_p1: f64,
    pub landing_p1: f64,
    /// `landing_p1 - fold_p1`; negative when the orbit overshoots the fold.
    pub offset: f64,
}

/// Measured landing points after each fold fall-off in `traj`. The fall
/// leaves the quartic slightly beyond its fold, so the orbit lands a little
/// to the left of `min Γ`; this quantifies by how much.
pub fn landing_offsets(params: &ModelParams, traj: &Trajectory) -> Result<Vec<LandingOffset>> {
    let folds = params.quartic.fold_points()?;
    let mut out = Vec::new();
    let mut pending: Option<f64> = None;
    for ev in &traj.events {
        match ev.kind {
            // A fall from the upper fold passes the lower fold's height too.
            EventKind::FoldFalloff if pending.is_none() => {
                let p2 = ev.state[1];
                pending = folds
                    .iter()
                    .filter(|f| f.kind == FoldKind::LocalMin)
                    .min_by(|x, y| (x.p2 - p2).abs().total_cmp(&(y.p2 - p2).abs()))
                    .map(|f| f.p1);
            }
            EventKind::Landing => {
                if let Some(fold_p1) = pending.take() {
                    let landing_p1 = ev.state[0];
                    out.push(LandingOffset {
                        fold_p1,
                        landing_p1,
                        offset: landing_p1 - fold_p1,
                    });
                }
            }
            // Climbing back up ends the fall without a landing.
            EventKind::SpikeOn | EventKind::Exit => pending = None,
            EventKind::SpikeOff | EventKind::FoldFalloff => {}
        }
    }
    Ok(out)
}
