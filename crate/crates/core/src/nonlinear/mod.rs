//! KL bounds from i-IOSS Lyapunov data for nonlinear systems.
//!
//! A [`LyapunovCandidate`] bundles `V(x, χ)` with its sandwich functions
//! `α₁, α₂`, decrease function `α₃` and gains `ρ_w, ρ_v, ρ_u, ρ_y`. The
//! conditions on them are only ever sample-checked here
//! ([`check_lyapunov_conditions`]); [`max_bounds`] and [`sum_bounds`] assume
//! they hold.

mod bounds;
mod conditions;

pub use bounds::{kappa_from_decrease, max_bounds, phi_gain, sum_bounds, NonlinMaxBounds, NonlinSumBounds, SumPath};
pub use conditions::{
    check_contraction, check_lyapunov_conditions, ConditionReport, LyapunovReport, SampleSpec, Witness,
};

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use thiserror::Error;

use crate::comparison::{ComparisonError, ScalarFn};
use crate::linear::{CertError, LinearSystem, MaxCertificate};
use crate::system::{BoxDomain, Dims, Dynamics};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NonlinError {
    #[error(transparent)]
    Comparison(#[from] ComparisonError),
    #[error(transparent)]
    Cert(#[from] CertError),
    #[error("invalid Lyapunov candidate: {0}")]
    InvalidCandidate(String),
}

pub type MapFn = Arc<dyn Fn(&DVector<f64>, &DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type PairFn = Arc<dyn Fn(&DVector<f64>, &DVector<f64>) -> f64 + Send + Sync>;

/// `x⁺ = f(x, u, w)`, `y = h(x, u, v)` given by closures.
#[derive(Clone)]
pub struct NonlinSystem {
    pub name: String,
    dims: Dims,
    f: MapFn,
    h: MapFn,
    state_box: Option<BoxDomain>,
    metric: Option<PairFn>,
}

impl fmt::Debug for NonlinSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonlinSystem")
            .field("name", &self.name)
            .field("dims", &self.dims)
            .field("state_box", &self.state_box)
            .finish_non_exhaustive()
    }
}

impl NonlinSystem {
    pub fn new(name: impl Into<String>, dims: Dims, f: MapFn, h: MapFn) -> Self {
        Self { name: name.into(), dims, f, h, state_box: None, metric: None }
    }

    /// Declares the box on which `f` and `h` are total.
    pub fn with_state_box(mut self, b: BoxDomain) -> Self {
        self.state_box = Some(b);
        self
    }

    /// Replaces the Euclidean state metric.
    pub fn with_metric(mut self, metric: PairFn) -> Self {
        self.metric = Some(metric);
        self
    }

    pub fn from_linear(sys: LinearSystem) -> Self {
        let sys = Arc::new(sys);
        let (s1, s2) = (sys.clone(), sys.clone());
        Self::new(
            "linear",
            sys.dims(),
            Arc::new(move |x, u, w| s1.step(x, u, w)),
            Arc::new(move |x, u, v| s2.output(x, u, v)),
        )
    }
}

impl Dynamics for NonlinSystem {
    fn dims(&self) -> Dims {
        self.dims
    }

    fn step(&self, x: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        (self.f)(x, u, w)
    }

    fn output(&self, x: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        (self.h)(x, u, v)
    }

    fn state_box(&self) -> Option<&BoxDomain> {
        self.state_box.as_ref()
    }

    fn state_distance(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        match &self.metric {
            Some(m) => m(a, b),
            None => (a - b).norm(),
        }
    }
}

/// `V` together with the comparison functions of the i-IOSS Lyapunov conditions:
///
/// ```text
/// α₁(|x̄, χ̄|) ≤ V(x̄, χ̄) ≤ α₂(|x̄, χ̄|)
/// V(f(x̄, ū, w̄), f(χ̄, ῡ, ω̄)) ≤ V − α₃(V) + ρ_w(|w̄, ω̄|) + ρ_v(|v̄, ν̄|)
///                              + ρ_u(|ū, ῡ|) + ρ_y(|h(x̄, ū, v̄), h(χ̄, ῡ, ν̄)|)
/// ```
#[derive(Clone)]
pub struct LyapunovCandidate {
    pub v: PairFn,
    pub alpha1: ScalarFn,
    pub alpha2: ScalarFn,
    pub alpha3: ScalarFn,
    pub rho_w: ScalarFn,
    pub rho_v: ScalarFn,
    pub rho_u: ScalarFn,
    pub rho_y: ScalarFn,
}

impl fmt::Debug for LyapunovCandidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LyapunovCandidate")
            .field("alpha1", &self.alpha1)
            .field("alpha2", &self.alpha2)
            .field("alpha3", &self.alpha3)
            .field("rho_w", &self.rho_w)
            .field("rho_v", &self.rho_v)
            .field("rho_u", &self.rho_u)
            .field("rho_y", &self.rho_y)
            .finish_non_exhaustive()
    }
}

impl LyapunovCandidate {
    /// α₁–α₃ must be of class K; the gains may also be identically zero.
    pub fn validate(&self) -> Result<(), NonlinError> {
        for (name, f) in [("alpha1", &self.alpha1), ("alpha2", &self.alpha2), ("alpha3", &self.alpha3)] {
            if !f.class().is_k {
                return Err(NonlinError::InvalidCandidate(format!("{name} is not of class K")));
            }
        }
        for (name, f) in self.gains_named() {
            if !f.is_k_or_zero() {
                return Err(NonlinError::InvalidCandidate(format!("{name} is neither of class K nor zero")));
            }
        }
        Ok(())
    }

    pub fn gains(&self) -> [&ScalarFn; 4] {
        [&self.rho_w, &self.rho_v, &self.rho_u, &self.rho_y]
    }

    fn gains_named(&self) -> [(&'static str, &ScalarFn); 4] {
        [("rho_w", &self.rho_w), ("rho_v", &self.rho_v), ("rho_u", &self.rho_u), ("rho_y", &self.rho_y)]
    }

    /// `V(x, χ) = ‖P^½(x − χ)‖` with the slopes of a linear max certificate.
    pub fn from_linear(cert: &MaxCertificate) -> Result<Self, NonlinError> {
        let (p_half, _) = crate::linear::spd_sqrt(&cert.lyap.p)?;
        Ok(Self {
            v: Arc::new(move |x, chi| (&p_half * (x - chi)).norm()),
            alpha1: ScalarFn::linear(cert.alpha1_slope),
            alpha2: ScalarFn::linear(cert.alpha2_slope),
            alpha3: ScalarFn::linear(cert.decrease_rate),
            rho_w: ScalarFn::linear(cert.rho_w),
            rho_v: ScalarFn::linear(cert.rho_v),
            rho_u: ScalarFn::linear(cert.rho_u),
            rho_y: ScalarFn::linear(cert.rho_y),
        })
    }
}
