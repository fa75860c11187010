//! Branches in `α` of the quartic equilibrium `Ũ(α) = (Γ(α), α)` and of the
//! limit cycles born at its Hopf points.

mod cycles;
mod shooting;
mod topology;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::equilibria::{eigenvalues_2x2, jacobian, stability_from, Eigenvalue, Stability};
use crate::error::{Error, Result};
use crate::model::{ModelParams, SlowFastState};
use crate::roots::illinois;

pub use cycles::{lc_continue, lc_seed_near_hopf, AlphaDirection, ContinuationSettings, CycleSeed};
pub use shooting::PeriodicOrbit;
pub use topology::{
    branch_topology, continue_all, r1_sweep, topology_changes, BifurcationDiagram, Connection,
    SweepEntry, TopologyReport,
};

/// `|trace|` accepted at a located Hopf point.
pub const HOPF_TRACE_TOL: f64 = 1e-10;
const EQ_GRID: usize = 400;
/// Largest `|Δp1|` between neighbouring equilibrium samples.
const EQ_MAX_DP1: f64 = 0.02;

/// Hopf points are labelled `H1, H2, …` by decreasing `α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopfPoint {
    pub label: usize,
    pub alpha: f64,
    pub location: SlowFastState,
    /// Imaginary part of the critical eigenvalue pair.
    pub frequency: f64,
    pub trace: f64,
    pub det: f64,
}

impl HopfPoint {
    pub fn name(&self) -> String {
        format!("H{}", self.label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchKind {
    Equilibrium,
    LimitCycle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Hopf(usize),
    Seed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// `α` left the requested range.
    DomainEdge,
    /// Period exceeded `T_max`.
    PeriodOverflow,
    /// Arclength step fell below its floor.
    StepUnderflow,
    /// Amplitude collapsed onto another Hopf point.
    ConnectsTo(usize),
    /// Branch returned to the Hopf point it started from.
    FoldTurnaround,
    /// Point budget exhausted.
    PointLimit,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Termination::DomainEdge => write!(f, "domain_edge"),
            Termination::PeriodOverflow => write!(f, "period_overflow"),
            Termination::StepUnderflow => write!(f, "step_underflow"),
            Termination::ConnectsTo(h) => write!(f, "connects_to(H{h})"),
            Termination::FoldTurnaround => write!(f, "fold_turnaround"),
            Termination::PointLimit => write!(f, "point_limit"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub alpha: f64,
    pub p1_max: f64,
    pub p1_min: f64,
    pub p2_max: f64,
    pub period: Option<f64>,
    pub stability: Stability,
    /// Trivial multiplier first; empty for equilibria.
    pub floquet: Vec<Eigenvalue>,
    /// Scaled matching defect of the periodic problem; zero for equilibria.
    pub residual: f64,
    pub n_segments: usize,
    /// Nontrivial multiplier crossed 1 since the previous point.
    pub fold_of_cycles: bool,
}

impl BranchPoint {
    pub fn amplitude(&self) -> f64 {
        self.p1_max - self.p1_min
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub kind: BranchKind,
    pub origin: Origin,
    pub termination: Termination,
    pub points: Vec<BranchPoint>,
    pub hopf: Vec<HopfPoint>,
    /// Converged orbits, one per point of a limit-cycle branch.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub orbits: Vec<PeriodicOrbit>,
    pub t_max: f64,
    pub ds_min: f64,
}

fn trace_at(params: &ModelParams, alpha: f64) -> f64 {
    let p = params.with_alpha(alpha);
    let j = jacobian(&p, p.u_tilde_point());
    j[0][0] + j[1][1]
}

fn det_at(params: &ModelParams, alpha: f64) -> f64 {
    let p = params.with_alpha(alpha);
    let j = jacobian(&p, p.u_tilde_point());
    j[0][0] * j[1][1] - j[0][1] * j[1][0]
}

fn check_range(alpha_range: (f64, f64)) -> Result<()> {
    let (lo, hi) = alpha_range;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::Precondition(format!(
            "alpha range must satisfy 0 < lo < hi, got [{lo}, {hi}]"
        )));
    }
    Ok(())
}

/// Hopf points of `Ũ(α)` in `alpha_range`: sign changes of the trace with
/// positive determinant, refined by bisection.
pub fn hopf_points(params: &ModelParams, alpha_range: (f64, f64)) -> Result<Vec<HopfPoint>> {
    check_range(alpha_range)?;
    let (lo, hi) = alpha_range;
    let grid: Vec<f64> = (0..=EQ_GRID)
        .map(|k| lo + (hi - lo) * k as f64 / EQ_GRID as f64)
        .collect();
    let mut found = Vec::new();
    for w in grid.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (ta, tb) = (trace_at(params, a), trace_at(params, b));
        if ta == 0.0 || ta.signum() != tb.signum() {
            let alpha = if ta == 0.0 {
                a
            } else if tb == 0.0 {
                continue;
            } else {
                illinois(
                    |x| trace_at(params, x),
                    a,
                    b,
                    ta,
                    tb,
                    1e-15 * b.abs().max(1.0),
                )
            };
            let det = det_at(params, alpha);
            if det <= 0.0 {
                continue;
            }
            let trace = trace_at(params, alpha);
            let p = params.with_alpha(alpha);
            found.push((alpha, p.u_tilde_point(), trace, det));
        }
    }
    found.sort_by(|x, y| y.0.total_cmp(&x.0));
    found
        .into_iter()
        .enumerate()
        .map(|(k, (alpha, location, trace, det))| {
            if trace.abs() >= HOPF_TRACE_TOL {
                return Err(Error::Precondition(format!(
                    "trace {trace:e} at Hopf candidate alpha = {alpha} not resolved"
                )));
            }
            Ok(HopfPoint {
                label: k + 1,
                alpha,
                location,
                frequency: (det - 0.25 * trace * trace).sqrt(),
                trace,
                det,
            })
        })
        .collect()
}

fn equilibrium_point(params: &ModelParams, alpha: f64) -> BranchPoint {
    let p = params.with_alpha(alpha);
    let x = p.u_tilde_point();
    let eigs = eigenvalues_2x2(jacobian(&p, x));
    BranchPoint {
        alpha,
        p1_max: x.p1,
        p1_min: x.p1,
        p2_max: x.p2,
        period: None,
        stability: stability_from(&eigs),
        floquet: Vec::new(),
        residual: 0.0,
        n_segments: 0,
        fold_of_cycles: false,
    }
}

/// `Ũ(α)` over `alpha_range`, refined where `p1` varies quickly or the
/// stability changes, with the Hopf points inserted.
pub fn equilibrium_branch(params: &ModelParams, alpha_range: (f64, f64)) -> Result<Branch> {
    params.validate()?;
    let hopf = hopf_points(params, alpha_range)?;
    let (lo, hi) = alpha_range;
    let mut alphas: Vec<f64> = (0..=EQ_GRID)
        .map(|k| lo + (hi - lo) * k as f64 / EQ_GRID as f64)
        .collect();
    alphas.extend(hopf.iter().map(|h| h.alpha));
    alphas.sort_by(f64::total_cmp);
    alphas.dedup();
    let mut points: Vec<BranchPoint> = Vec::with_capacity(alphas.len());
    let mut queue: Vec<(f64, f64)> = alphas.windows(2).map(|w| (w[0], w[1])).collect();
    let mut all = alphas;
    while let Some((a, b)) = queue.pop() {
        let (pa, pb) = (equilibrium_point(params, a), equilibrium_point(params, b));
        if (pa.p1_max - pb.p1_max).abs() > EQ_MAX_DP1 && b - a > 1e-9 {
            let mid = 0.5 * (a + b);
            all.push(mid);
            queue.push((a, mid));
            queue.push((mid, b));
        }
    }
    all.sort_by(f64::total_cmp);
    all.dedup();
    points.extend(all.into_iter().map(|a| equilibrium_point(params, a)));
    Ok(Branch {
        kind: BranchKind::Equilibrium,
        origin: Origin::Seed,
        termination: Termination::DomainEdge,
        points,
        hopf,
        orbits: Vec::new(),
        t_max: f64::INFINITY,
        ds_min: 0.0,
    })
}

/// `α` range covering all folds with margin.
pub fn default_alpha_range(params: &ModelParams) -> Result<(f64, f64)> {
    let folds = params.quartic.fold_points()?;
    let top = folds.iter().map(|f| f.p2).fold(0.0, f64::max);
    Ok((1e-3, top + 0.5))
}
