//! Quartic slow-fast model of neurotransmitter release: nullcline geometry,
//! equilibria, entry-exit delays, stiff simulation and continuation in `α`.

// `!(x > 0.0)` rejects NaN together with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops mirror the matrix formulas they implement.
#![allow(clippy::needless_range_loop)]

mod error;
mod roots;

pub mod classify;
pub mod continuation;
pub mod entry_exit;
pub mod equilibria;
pub mod integrator;
pub mod model;
pub mod quartic;
pub mod scenario;
pub mod simulate;
pub mod systems;

pub use classify::{classify_asymptotics, Asymptotics, Classification};
pub use error::{Error, Result};
pub use integrator::{Event, EventKind, Trajectory};
pub use model::{FullState, ModelParams, SlowFastState, Stimulus, TailParams, Timescale};
pub use quartic::{BranchStability, FoldKind, FoldPoint, QuarticSpec, TcPoint};
pub use scenario::Scenario;
