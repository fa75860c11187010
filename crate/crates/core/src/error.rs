use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quartic zeros {0} and {1} coincide")]
    DuplicateZero(f64, f64),

    #[error("smallest quartic zero {0} is negative")]
    NonNegativityViolation(f64),

    #[error("no fold of the quartic found in [{lo}, {hi}]")]
    FoldNotFound { lo: f64, hi: f64 },

    #[error("line p2 = {slope}*p1 + {offset} meets the quartic near p2 = {p2}")]
    AssumptionViolated { slope: f64, offset: f64, p2: f64 },

    #[error("not an equilibrium: residual {residual:e}")]
    NotAnEquilibrium { residual: f64 },

    #[error("integrand pole at {pole} lies inside the integration interval")]
    PoleInInterval { pole: f64 },

    #[error("entry point {p10} outside the admissible range ({lo}, {hi}]")]
    EntryOutOfRange { p10: f64, lo: f64, hi: f64 },

    #[error("no exit point found below p11_max = {p11_max}")]
    NoExit { p11_max: f64 },

    #[error("orbit did not leave the axis before t = {t_max}")]
    NoExitBeforeTmax { t_max: f64 },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("maximum number of steps ({steps}) exceeded at t = {t}")]
    MaxStepsExceeded { t: f64, steps: usize },

    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },

    #[error("periodic seed correction failed: {0}")]
    SeedCorrectionFailed(String),

    #[error("continuation corrector diverged at alpha = {alpha} with step {step:e}")]
    CorrectorDiverged { alpha: f64, step: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),
}
