//! Event characterization by fitting a drift-plus-tone model to the
//! cumulative phase of a detected event, then labeling it from the fitted
//! slope and tone amplitude.

mod classify;
mod fit;
mod model;
mod trace;

pub use classify::{classify, temperature_rate, ClassifyConfig, EventClass, EventKind};
pub use fit::{
    cost, cost_gradient, fit_phase_model, fit_trace, frequency_band, initial_guess, FitResult, MAX_ITERATIONS, MIN_FIT_SAMPLES,
    REL_COST_TOL,
};
pub use model::PhaseModel;
pub use trace::{accumulate_span_trace, accumulate_trace, PhaseTrace, MIN_TRACE_FRAMES};
