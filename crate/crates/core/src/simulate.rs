//! Trajectories of the planar core and of the full model with the event log
//! used for loop counting, landing/exit detection and fold fall-off.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{
    solve, step_input_pieces, Control, Detector, Direction, Event, EventFn, EventKind, OdeSystem,
    Sensitivity, SolverOptions, Trajectory,
};
use crate::model::{FullState, ModelParams, SlowFastState, Timescale};
use crate::quartic::FoldKind;
use crate::systems::{Coords, CoreSystem, FullSystem};

/// `p2` level separating a loop from a passage near the axis.
pub const SPIKE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    pub spike_threshold: f64,
    /// Landing/exit height; `ε` when absent.
    pub delta: Option<f64>,
    pub fold_falloff: bool,
    /// Stop at the first event of this kind.
    pub terminal: Option<EventKind>,
}

impl Default for EventSpec {
    fn default() -> Self {
        Self {
            spike_threshold: SPIKE_THRESHOLD,
            delta: None,
            fold_falloff: true,
            terminal: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub timescale: Timescale,
    pub tol: f64,
    pub max_steps: usize,
    /// Keep every accepted step; otherwise only the endpoints.
    pub record: bool,
    pub events: EventSpec,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            timescale: Timescale::Fast,
            tol: 1e-9,
            max_steps: 2_000_000,
            record: true,
            events: EventSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Tag {
    Event(EventKind),
    Peak,
}

fn event_fns(params: &ModelParams, coords: Coords, spec: &EventSpec) -> Result<Vec<EventFn<Tag>>> {
    let mut fns = Vec::new();
    let level = |x: f64| coords.to_internal(x);
    let terminal = |k: EventKind| spec.terminal == Some(k);
    let mut crossing = |kind: EventKind, height: f64, direction: Direction| {
        let l = level(height);
        fns.push(EventFn {
            tag: Tag::Event(kind),
            direction,
            terminal: terminal(kind),
            f: Box::new(move |y: &[f64]| y[1] - l),
        });
    };
    crossing(EventKind::SpikeOn, spec.spike_threshold, Direction::Up);
    crossing(EventKind::SpikeOff, spec.spike_threshold, Direction::Down);
    let delta = spec.delta.unwrap_or(params.epsilon);
    crossing(EventKind::Landing, delta, Direction::Down);
    crossing(EventKind::Exit, delta, Direction::Up);
    if spec.fold_falloff {
        for fold in params.quartic.fold_points()? {
            if fold.kind == FoldKind::LocalMin {
                crossing(EventKind::FoldFalloff, fold.p2, Direction::Down);
            }
        }
    }
    let q = params.quartic;
    fns.push(EventFn {
        tag: Tag::Peak,
        direction: Direction::Down,
        terminal: false,
        f: Box::new(move |y: &[f64]| {
            let p2 = coords.to_physical(y[1]);
            if p2 > 0.0 {
                y[0] - q.eval(p2)
            } else {
                0.0
            }
        }),
    });
    Ok(fns)
}

fn to_physical(coords: Coords, y: &[f64]) -> Vec<f64> {
    let mut out = y.to_vec();
    out[1] = coords.to_physical(y[1]);
    out
}

fn run<S: OdeSystem>(
    sys: &S,
    params: &ModelParams,
    coords: Coords,
    y0: Vec<f64>,
    t_span: (f64, f64),
    timescale: Timescale,
    opts: &SimOptions,
) -> Result<Trajectory> {
    if !(t_span.1 > t_span.0) {
        return Err(Error::Precondition(format!(
            "empty time span [{}, {}]",
            t_span.0, t_span.1
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::Precondition(format!(
            "tolerance must be positive, got {}",
            opts.tol
        )));
    }
    let (s0, s1) = params.stimulus.interval_in(timescale, params.epsilon);
    let pieces = step_input_pieces(t_span.0, t_span.1, s0, s1, params.stimulus.amplitude);
    let mut det = Detector::new(event_fns(params, coords, &opts.events)?, &y0);
    let mut times = vec![t_span.0];
    let mut states = vec![to_physical(coords, &y0)];
    let solver = SolverOptions {
        max_steps: opts.max_steps,
        ..SolverOptions::with_tol(opts.tol)
    };
    let record = opts.record;
    let out = solve(sys, &pieces, &y0, &solver, Sensitivity::None, &mut |st| {
        let c = det.on_step(st);
        if record {
            if let Control::Continue = c {
                times.push(st.t1);
                states.push(to_physical(coords, st.y1));
            }
        }
        c
    })?;
    if !record || out.stopped {
        times.push(out.t);
        states.push(to_physical(coords, &out.y));
    }
    let mut events = Vec::new();
    let mut peaks = Vec::new();
    for hit in det.hits {
        let ev = Event {
            kind: EventKind::SpikeOn,
            time: hit.time,
            state: to_physical(coords, &hit.state),
        };
        match hit.tag {
            Tag::Event(kind) => events.push(Event { kind, ..ev }),
            Tag::Peak => peaks.push(ev),
        }
    }
    Ok(Trajectory {
        timescale,
        times,
        states,
        events,
        peaks,
        steps: out.steps,
        rejected: out.rejected,
    })
}

/// Integrate the planar core from `state0` over `t_span` (in `opts.timescale`).
pub fn simulate_core(
    params: &ModelParams,
    state0: SlowFastState,
    t_span: (f64, f64),
    opts: &SimOptions,
) -> Result<Trajectory> {
    params.validate()?;
    if !(state0.p2 >= 0.0) || !state0.p1.is_finite() {
        return Err(Error::Precondition(format!(
            "initial state needs p2 >= 0, got {state0:?}"
        )));
    }
    let coords = Coords::for_height(state0.p2);
    let sys = CoreSystem::new(*params, opts.timescale, coords);
    run(
        &sys,
        params,
        coords,
        vec![state0.p1, coords.to_internal(state0.p2)],
        t_span,
        opts.timescale,
        opts,
    )
}

/// Integrate the six-dimensional model in slow time.
pub fn simulate_full(
    params: &ModelParams,
    state0: FullState,
    t_span: (f64, f64),
    opts: &SimOptions,
) -> Result<Trajectory> {
    params.validate()?;
    if !(state0.p2 >= 0.0) || !state0.to_array().iter().all(|x| x.is_finite()) {
        return Err(Error::Precondition(format!(
            "initial state needs p2 >= 0, got {state0:?}"
        )));
    }
    let coords = Coords::for_height(state0.p2);
    let sys = FullSystem {
        params: *params,
        coords,
    };
    let mut y0 = state0.to_array().to_vec();
    y0[1] = coords.to_internal(state0.p2);
    run(
        &sys,
        params,
        coords,
        y0,
        t_span,
        Timescale::Slow,
        &SimOptions {
            timescale: Timescale::Slow,
            ..*opts
        },
    )
}
