//! Sign-change event location on the dense output of each accepted step.

use super::{Control, StepView};
use crate::roots::illinois;

const SUBSAMPLES: usize = 8;
/// Absolute time tolerance for located events.
pub const EVENT_TIME_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Up,
    Down,
    Both,
}

pub type ScalarFn = Box<dyn Fn(&[f64]) -> f64>;

/// Scalar event function of the internal state.
pub struct EventFn<T> {
    pub tag: T,
    pub direction: Direction,
    pub terminal: bool,
    pub f: ScalarFn,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hit<T> {
    pub tag: T,
    pub time: f64,
    pub state: Vec<f64>,
}

pub struct Detector<T> {
    fns: Vec<EventFn<T>>,
    prev: Vec<f64>,
    pub hits: Vec<Hit<T>>,
    /// Events earlier than this time are ignored.
    pub t_min: f64,
}

impl<T: Copy> Detector<T> {
    pub fn new(fns: Vec<EventFn<T>>, y0: &[f64]) -> Self {
        let prev = fns.iter().map(|e| (e.f)(y0)).collect();
        Self {
            fns,
            prev,
            hits: Vec::new(),
            t_min: f64::NEG_INFINITY,
        }
    }

    /// Scan one accepted step; stops at the earliest terminal event.
    pub fn on_step(&mut self, step: &StepView) -> Control {
        let n = step.y1.len();
        let mut y = vec![0.0; n];
        let mut ta = step.t0;
        for k in 1..=SUBSAMPLES {
            let tb = if k == SUBSAMPLES {
                step.t1
            } else {
                step.t0 + (step.t1 - step.t0) * k as f64 / SUBSAMPLES as f64
            };
            step.dense(tb, &mut y);
            let mut found: Vec<(usize, f64)> = Vec::new();
            for (i, e) in self.fns.iter().enumerate() {
                let ga = self.prev[i];
                let gb = (e.f)(&y);
                self.prev[i] = gb;
                let up = ga < 0.0 && gb >= 0.0;
                let down = ga > 0.0 && gb <= 0.0;
                let hit = match e.direction {
                    Direction::Up => up,
                    Direction::Down => down,
                    Direction::Both => up || down,
                };
                if !hit {
                    continue;
                }
                let mut w = vec![0.0; n];
                let g = |t: f64| {
                    step.dense(t, &mut w);
                    (e.f)(&w)
                };
                let tol = EVENT_TIME_TOL.max(4.0 * f64::EPSILON * tb.abs());
                let te = if gb == 0.0 {
                    tb
                } else {
                    illinois(g, ta, tb, ga, gb, tol)
                };
                if te >= self.t_min {
                    found.push((i, te));
                }
            }
            found.sort_by(|a, b| a.1.total_cmp(&b.1));
            for (i, te) in found {
                let mut state = vec![0.0; n];
                step.dense(te, &mut state);
                self.hits.push(Hit {
                    tag: self.fns[i].tag,
                    time: te,
                    state,
                });
                if self.fns[i].terminal {
                    return Control::Stop(te);
                }
            }
            ta = tb;
        }
        Control::Continue
    }
}
