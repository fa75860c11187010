//! Long-time regime of a trajectory: rest at an equilibrium, a periodic
//! sequence of loops, or undecided.

use serde::{Deserialize, Serialize};

use crate::equilibria::EquilibriumLabel;
use crate::error::Result;
use crate::integrator::{EventKind, Trajectory};
use crate::model::ModelParams;
use crate::quartic::FoldKind;

/// Relative drift in period and peak height tolerated between loops.
pub const CYCLE_DRIFT_TOL: f64 = 1e-3;
/// Consecutive loop comparisons that must all pass.
pub const CYCLE_COMPARISONS: usize = 3;
pub const EQUILIBRIUM_TOL: f64 = 1e-6;
/// Trailing fraction of the time span that must stay at the equilibrium.
const SETTLE_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Asymptotics {
    Equilibrium { label: EquilibriumLabel },
    LimitCycle { period: f64, amplitude: f64 },
    Undecided,
}

/// One loop: from a `spike_on` to the next.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopSummary {
    pub start: f64,
    /// Time to the next `spike_on`; absent for the last loop.
    pub period: Option<f64>,
    pub peak_p2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub regime: Asymptotics,
    pub transient_loops: usize,
    pub loops: Vec<LoopSummary>,
}

pub fn loop_summaries(traj: &Trajectory) -> Vec<LoopSummary> {
    let starts: Vec<f64> = traj.events_of(EventKind::SpikeOn).map(|e| e.time).collect();
    let t_end = traj.times.last().copied().unwrap_or(0.0);
    (0..starts.len())
        .map(|k| {
            let a = starts[k];
            let b = starts.get(k + 1).copied();
            let hi = b.unwrap_or(t_end);
            let from_peaks = traj
                .peaks
                .iter()
                .filter(|e| e.time >= a && e.time < hi)
                .map(|e| e.state[1])
                .fold(f64::NAN, f64::max);
            let peak_p2 = if from_peaks.is_nan() {
                traj.times
                    .iter()
                    .zip(&traj.states)
                    .filter(|(t, _)| **t >= a && **t <= hi)
                    .map(|(_, s)| s[1])
                    .fold(0.0, f64::max)
            } else {
                from_peaks
            };
            LoopSummary {
                start: a,
                period: b.map(|b| b - a),
                peak_p2,
            }
        })
        .collect()
}

fn settled_at(params: &ModelParams, traj: &Trajectory) -> Option<EquilibriumLabel> {
    let (t0, t1) = (*traj.times.first()?, *traj.times.last()?);
    let from = t1 - SETTLE_FRACTION * (t1 - t0);
    let candidates = [
        (EquilibriumLabel::S, params.s_point()),
        (EquilibriumLabel::U, params.u_point()),
        (EquilibriumLabel::UTilde, params.u_tilde_point()),
    ];
    candidates.into_iter().find_map(|(label, eq)| {
        let near = |s: &Vec<f64>| (s[0] - eq.p1).hypot(s[1] - eq.p2) < EQUILIBRIUM_TOL;
        let all = traj
            .times
            .iter()
            .zip(&traj.states)
            .filter(|(t, _)| **t >= from)
            .all(|(_, s)| near(s));
        all.then_some(label)
    })
}

pub fn classify_asymptotics(params: &ModelParams, traj: &Trajectory) -> Classification {
    let loops = loop_summaries(traj);
    if let Some(label) = settled_at(params, traj) {
        return Classification {
            regime: Asymptotics::Equilibrium { label },
            transient_loops: loops.len(),
            loops,
        };
    }
    let complete: Vec<(f64, f64)> = loops
        .iter()
        .filter_map(|l| l.period.map(|p| (p, l.peak_p2)))
        .collect();
    let close = |x: f64, y: f64| (y - x).abs() < CYCLE_DRIFT_TOL * x.abs();
    let steady = |k: usize| {
        (k..k + CYCLE_COMPARISONS).all(|j| {
            let (p0, a0) = complete[j];
            let (p1, a1) = complete[j + 1];
            close(p0, p1) && close(a0, a1)
        })
    };
    if complete.len() > CYCLE_COMPARISONS {
        if let Some(k) = (0..complete.len() - CYCLE_COMPARISONS).find(|&k| steady(k)) {
            let (period, amplitude) = *complete.last().expect("non-empty");
            return Classification {
                regime: Asymptotics::LimitCycle { period, amplitude },
                transient_loops: k,
                loops,
            };
        }
    }
    Classification {
        regime: Asymptotics::Undecided,
        transient_loops: loops.len(),
        loops,
    }
}

/// Share of one loop's duration spent drifting slowly along the two attracting
/// quartic branches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlowPassage {
    /// Branch between the first local minimum and the local maximum of `Γ`.
    pub lower_branch: f64,
    /// Branch above the second local minimum.
    pub upper_branch: f64,
    pub loop_start: f64,
    pub loop_end: f64,
}

/// Slow-passage fractions over the last complete loop. A sample is slow when
/// the fast-time rate `|p2·(p1 - Γ(p2))|` of the height does not exceed the
/// largest rate `ε·|g|` reached by `p1` over the loop.
pub fn slow_passages(params: &ModelParams, traj: &Trajectory) -> Result<Option<SlowPassage>> {
    let folds = params.quartic.fold_points()?;
    let lower = (folds[0].p2, folds[1].p2);
    let upper = folds
        .iter()
        .rev()
        .find(|f| f.kind == FoldKind::LocalMin)
        .map_or(f64::INFINITY, |f| f.p2);
    let loops = loop_summaries(traj);
    let Some(last) = loops.iter().rev().find(|l| l.period.is_some()) else {
        return Ok(None);
    };
    let (a, b) = (last.start, last.start + last.period.unwrap_or(0.0));
    let q = &params.quartic;
    let in_loop = |i: usize| traj.times[i] >= a && traj.times[i] <= b;
    let threshold = params.epsilon
        * (0..traj.times.len())
            .filter(|&i| in_loop(i))
            .map(|i| {
                params
                    .slow_product(traj.states[i][0], traj.states[i][1])
                    .abs()
            })
            .fold(0.0, f64::max);
    let (mut lo_t, mut up_t) = (0.0, 0.0);
    for i in 0..traj.times.len().saturating_sub(1) {
        let (t0, t1) = (traj.times[i].max(a), traj.times[i + 1].min(b));
        if t1 <= t0 {
            continue;
        }
        let s = &traj.states[i];
        let rate = (s[1] * (s[0] - q.eval(s[1]))).abs();
        if rate >= threshold {
            continue;
        }
        if s[1] > lower.0 && s[1] < lower.1 {
            lo_t += t1 - t0;
        } else if s[1] > upper {
            up_t += t1 - t0;
        }
    }
    let span = b - a;
    Ok(Some(SlowPassage {
        lower_branch: lo_t / span,
        upper_branch: up_t / span,
        loop_start: a,
        loop_end: b,
    }))
}
