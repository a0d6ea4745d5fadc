//! Simulation of trajectory pairs and observers, and numerical evaluation of
//! max-form and sum-form i-IOSS estimates along them.

mod bounds;
mod monte_carlo;
mod observer;
mod signal;
mod simulate;

pub use bounds::{eval_max_bound, eval_sum_bound, VerificationReport};
pub use monte_carlo::{monte_carlo_verify, AggregateReport, MarginSummary, McConfig, SpecFamily};
pub use observer::{
    check_output_injection, check_reduction, check_rgas_estimate, luenberger_observer, offset_observer,
    simulate_observer, InjectionReport, ObserverFn, ObserverRun, ObserverScenario, ObserverSignals, ObserverSpec,
    ReductionReport, RgasReport,
};
pub use signal::SignalSpec;
pub use simulate::{simulate_pair, DifferenceTrace, PairSignals, TrajectoryPair};

use thiserror::Error;

use crate::comparison::ComparisonError;

/// Default relative violation tolerance.
pub const DEFAULT_TOL: f64 = 1e-9;
/// Absolute floor under the relative tolerance.
pub const ABS_FLOOR: f64 = 1e-12;

/// `max(tol·|rhs|, 1e−12)`; a margin below its negative counts as a violation.
pub fn threshold(tol: f64, rhs: f64) -> f64 {
    (tol * rhs.abs()).max(ABS_FLOOR)
}

/// [`threshold`] at the default tolerance.
pub fn violation_threshold(rhs: f64) -> f64 {
    threshold(DEFAULT_TOL, rhs)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("invalid signal: {0}")]
    InvalidSignal(String),
    #[error("evaluation failed at t = {t}: {detail}")]
    EvaluationFailure { t: u64, detail: String },
    #[error(transparent)]
    Comparison(#[from] ComparisonError),
    #[error("invalid configuration: {0}")]
    Config(String),
}
