//! Comparison functions and the constructions built on them.

mod family;
mod kappa;
mod kl;
mod scalar;
mod summability;

pub use family::{MaxBoundFamily, SumBoundFamily};
pub use kappa::{construct_kappa, iterate_kappa, KAPPA_MAX_POINTS, KAPPA_MAX_REFINEMENTS};
pub use kl::KlFn;
pub use scalar::{invert_k, ClassFlags, PiecewiseLinear, ScalarFn, DEFAULT_DOMAIN_CAP, DEFAULT_TOL};
pub use summability::{
    certify_kappa_envelope, exp_sum_to_max, kl_to_classical, linear_lower_bound_holds, premise_holds,
    summability_sigma, SigmaBranch, SummabilityEnvelope, PREMISE_GRID_POINTS,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ComparisonError {
    #[error("argument {r} outside the certified domain [0, {cap}]")]
    DomainExceeded { r: f64, cap: f64 },
    #[error("value {y} outside the range [0, {max}] of the function")]
    RangeExceeded { y: f64, max: f64 },
    #[error("function is not of class K")]
    NotKFunction,
    #[error("κ({r}) = {value} exceeds its argument; not a contraction")]
    NotContraction { r: f64, value: f64 },
    #[error("κ sandwich could not be certified after {refinements} refinements (first failure at r = {r})")]
    RefinementFailed { refinements: u32, r: f64 },
    #[error("linear lower bound α(r) ≥ {k}·r fails at r = {r} (α(r) = {alpha})")]
    PremiseViolated { k: f64, r: f64, alpha: f64 },
    #[error("no summability envelope can be certified: {0}")]
    NotSummable(String),
    #[error("KL table has {len} time slices; t = {t} requested")]
    HorizonExceeded { t: u64, len: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
