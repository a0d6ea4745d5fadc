use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::simulate::{check_dim, check_state};
use super::{eval_max_bound, eval_sum_bound, DifferenceTrace, SignalSpec, VerificationReport, VerifyError};
use crate::comparison::{MaxBoundFamily, SumBoundFamily};
use crate::linear::LinearSystem;
use crate::nonlinear::{SampleSpec, Witness};
use crate::rng::{channel, stream};
use crate::system::Dynamics;

/// `g(x̃, ũ, w̃, ṽ, ỹ)`
pub type ObserverFn =
    Arc<dyn Fn(&DVector<f64>, &DVector<f64>, &DVector<f64>, &DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync>;

/// Full-order observer `x̃⁺ = g(x̃, ũ, w̃, ṽ, ỹ)` started at `x0`.
#[derive(Clone)]
pub struct ObserverSpec {
    pub name: String,
    pub g: ObserverFn,
    pub x0: DVector<f64>,
}

impl fmt::Debug for ObserverSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ObserverSpec").field("name", &self.name).field("x0", &self.x0).finish_non_exhaustive()
    }
}

/// `g = Ax̃ + Bũ + Ew̃ + L(Cx̃ + Dũ + Fṽ − ỹ)`
pub fn luenberger_observer(sys: &LinearSystem, l: &DMatrix<f64>, x0: DVector<f64>) -> ObserverSpec {
    injection_observer("luenberger", sys, l, 0.0, x0)
}

/// A Luenberger observer with `offset` added to every entry of the injection
/// term. Breaks the output-injection identity for any nonzero offset.
pub fn offset_observer(sys: &LinearSystem, l: &DMatrix<f64>, offset: f64, x0: DVector<f64>) -> ObserverSpec {
    injection_observer("offset", sys, l, offset, x0)
}

fn injection_observer(name: &str, sys: &LinearSystem, l: &DMatrix<f64>, offset: f64, x0: DVector<f64>) -> ObserverSpec {
    let sys = sys.clone();
    let l = l.clone();
    ObserverSpec {
        name: name.into(),
        g: Arc::new(move |x, u, w, v, y| {
            let innovation = sys.output(x, u, v) - y;
            let injection = (&l * innovation).add_scalar(offset);
            sys.step(x, u, w) + injection
        }),
        x0,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InjectionReport {
    pub pass: bool,
    pub tol: f64,
    pub samples: usize,
    /// Largest `|g(x, u, w, v, h(x, u, v)) − f(x, u, w)|`.
    pub worst_residual: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

/// Samples `g(x̄, ū, w̄, v̄, h(x̄, ū, v̄)) = f(x̄, ū, w̄)`.
pub fn check_output_injection(obs: &ObserverSpec, sys: &dyn Dynamics, spec: &SampleSpec, tol: f64) -> InjectionReport {
    let residuals: Vec<(f64, Witness)> = (0..spec.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(spec.seed, i as u64, channel::INITIAL);
            let x = spec.x.sample(&mut rng);
            let u = spec.u.sample(&mut rng);
            let w = spec.w.sample(&mut rng);
            let v = spec.v.sample(&mut rng);
            let y = sys.output(&x, &u, &v);
            let r = ((obs.g)(&x, &u, &w, &v, &y) - sys.step(&x, &u, &w)).norm();
            let s = |d: &DVector<f64>| d.as_slice().to_vec();
            let witness = Witness {
                x: s(&x),
                chi: s(&x),
                u: s(&u),
                upsilon: s(&u),
                w: s(&w),
                omega: s(&w),
                v: s(&v),
                nu: s(&v),
            };
            (r, witness)
        })
        .collect();
    let mut worst: Option<&(f64, Witness)> = None;
    for r in &residuals {
        if worst.is_none_or(|w| r.0 > w.0 || r.0.is_nan()) {
            worst = Some(r);
        }
    }
    let worst_residual = worst.map_or(0.0, |w| w.0);
    let pass = worst_residual <= tol;
    InjectionReport {
        pass,
        tol,
        samples: spec.samples,
        worst_residual,
        witness: if pass { None } else { worst.map(|w| w.1.clone()) },
    }
}

/// Plant signals and the observer's view of them.
///
/// The observer receives `ũ = u + u_offset`, `w̃ = w_guess`, `ṽ = v_guess`
/// and `ỹ = y + y_offset`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ObserverSignals {
    #[serde(default)]
    pub u: SignalSpec,
    #[serde(default)]
    pub w: SignalSpec,
    #[serde(default)]
    pub v: SignalSpec,
    #[serde(default)]
    pub u_offset: SignalSpec,
    #[serde(default)]
    pub w_guess: SignalSpec,
    #[serde(default)]
    pub v_guess: SignalSpec,
    #[serde(default)]
    pub y_offset: SignalSpec,
}

/// Plant and observer trajectories over `t = 0..T`.
#[derive(Clone, Debug, PartialEq)]
pub struct ObserverRun {
    pub x: Vec<DVector<f64>>,
    pub x_hat: Vec<DVector<f64>>,
    pub u: Vec<DVector<f64>>,
    pub u_tilde: Vec<DVector<f64>>,
    pub w: Vec<DVector<f64>>,
    pub w_tilde: Vec<DVector<f64>>,
    pub v: Vec<DVector<f64>>,
    pub v_tilde: Vec<DVector<f64>>,
    pub y: Vec<DVector<f64>>,
    pub y_tilde: Vec<DVector<f64>>,
}

impl ObserverRun {
    /// Estimation error and channel mismatches `(w − w̃, v − ṽ, u − ũ, y − ỹ)`.
    pub fn trace(&self, sys: &dyn Dynamics) -> DifferenceTrace {
        let d = |a: &[DVector<f64>], b: &[DVector<f64>]| a.iter().zip(b).map(|(p, q)| (p - q).norm()).collect();
        DifferenceTrace {
            state: self.x.iter().zip(&self.x_hat).map(|(a, b)| sys.state_distance(a, b)).collect(),
            channels: [d(&self.w, &self.w_tilde), d(&self.v, &self.v_tilde), d(&self.u, &self.u_tilde), d(&self.y, &self.y_tilde)],
        }
    }
}

struct Realized {
    u: Vec<DVector<f64>>,
    u_tilde: Vec<DVector<f64>>,
    w: Vec<DVector<f64>>,
    w_tilde: Vec<DVector<f64>>,
    v: Vec<DVector<f64>>,
    v_tilde: Vec<DVector<f64>>,
    y_offset: Vec<DVector<f64>>,
}

fn realize(sys: &dyn Dynamics, s: &ObserverSignals, horizon: u64, seed: u64) -> Result<Realized, VerifyError> {
    let d = sys.dims();
    let r = |spec: &SignalSpec, dim, ch| spec.realize(dim, horizon, seed, 0, ch);
    let u = r(&s.u, d.n_u, channel::U)?;
    let u_off = r(&s.u_offset, d.n_u, channel::UPSILON)?;
    Ok(Realized {
        u_tilde: u.iter().zip(&u_off).map(|(a, b)| a + b).collect(),
        u,
        w: r(&s.w, d.n_w, channel::W)?,
        w_tilde: r(&s.w_guess, d.n_w, channel::OMEGA)?,
        v: r(&s.v, d.n_v, channel::V)?,
        v_tilde: r(&s.v_guess, d.n_v, channel::NU)?,
        y_offset: r(&s.y_offset, d.n_y, channel::SPECS)?,
    })
}

/// Runs the plant from `x0` and the observer from `obs.x0` on measured outputs.
pub fn simulate_observer(
    sys: &dyn Dynamics,
    obs: &ObserverSpec,
    x0: &DVector<f64>,
    signals: &ObserverSignals,
    horizon: u64,
    seed: u64,
) -> Result<ObserverRun, VerifyError> {
    if horizon == 0 {
        return Err(VerifyError::ZeroHorizon);
    }
    let n_x = sys.dims().n_x;
    check_dim(x0, n_x, "x0")?;
    check_dim(&obs.x0, n_x, "observer x0")?;
    let s = realize(sys, signals, horizon, seed)?;
    let n = horizon as usize;
    let mut x = vec![x0.clone()];
    let mut x_hat = vec![obs.x0.clone()];
    let (mut y, mut y_tilde) = (Vec::with_capacity(n), Vec::with_capacity(n));
    check_state(sys, x0, 0, "x")?;
    for t in 0..n {
        let yt = sys.output(&x[t], &s.u[t], &s.v[t]);
        let yt_tilde = &yt + &s.y_offset[t];
        let x1 = sys.step(&x[t], &s.u[t], &s.w[t]);
        let xh1 = (obs.g)(&x_hat[t], &s.u_tilde[t], &s.w_tilde[t], &s.v_tilde[t], &yt_tilde);
        check_state(sys, &x1, t as u64 + 1, "x")?;
        if !xh1.iter().all(|v| v.is_finite()) {
            return Err(VerifyError::EvaluationFailure { t: t as u64 + 1, detail: "observer state is not finite".into() });
        }
        x.push(x1);
        x_hat.push(xh1);
        y.push(yt);
        y_tilde.push(yt_tilde);
    }
    Ok(ObserverRun {
        x,
        x_hat,
        u: s.u,
        u_tilde: s.u_tilde,
        w: s.w,
        w_tilde: s.w_tilde,
        v: s.v,
        v_tilde: s.v_tilde,
        y,
        y_tilde,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObserverScenario {
    pub x0: Vec<f64>,
    #[serde(default)]
    pub signals: ObserverSignals,
    pub horizon: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// When set, `|x(T) − x̃(T)|` must not exceed it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminal_threshold: Option<f64>,
}

fn default_tol() -> f64 {
    super::DEFAULT_TOL
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RgasReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<VerificationReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sum: Option<VerificationReport>,
    pub terminal_error: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminal_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asymptotic_pass: Option<bool>,
    pub pass: bool,
}

/// Simulates plant and observer and checks the estimation error against the
/// given bound families, whose channels are read as `(w − w̃, v − ṽ, u − ũ, y − ỹ)`.
pub fn check_rgas_estimate(
    sys: &dyn Dynamics,
    obs: &ObserverSpec,
    max: Option<&MaxBoundFamily>,
    sum: Option<&SumBoundFamily>,
    scenario: &ObserverScenario,
) -> Result<RgasReport, VerifyError> {
    let x0 = DVector::from_column_slice(&scenario.x0);
    let run = simulate_observer(sys, obs, &x0, &scenario.signals, scenario.horizon, scenario.seed)?;
    let trace = run.trace(sys);
    let max = max.map(|f| eval_max_bound(&trace, f, scenario.tol)).transpose()?;
    let sum = sum.map(|f| eval_sum_bound(&trace, f, scenario.tol)).transpose()?;
    let terminal_error = *trace.state.last().expect("non-empty trace");
    let asymptotic_pass = scenario.terminal_threshold.map(|th| terminal_error <= th);
    let pass = max.as_ref().is_none_or(|r| r.pass()) && sum.as_ref().is_none_or(|r| r.pass()) && asymptotic_pass != Some(false);
    Ok(RgasReport { max, sum, terminal_error, terminal_threshold: scenario.terminal_threshold, asymptotic_pass, pass })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub horizon: u64,
    /// Largest `|x̃_obs(t) − x̃_model(t)|` over the horizon.
    pub max_deviation: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Feeds the observer its own predicted output `ỹ = h(x̃, ũ, ṽ)` and compares
/// against the open-loop model `x̃⁺ = f(x̃, ũ, w̃)` from the same start.
pub fn check_reduction(
    sys: &dyn Dynamics,
    obs: &ObserverSpec,
    signals: &ObserverSignals,
    horizon: u64,
    seed: u64,
    tol: f64,
) -> Result<ReductionReport, VerifyError> {
    if horizon == 0 {
        return Err(VerifyError::ZeroHorizon);
    }
    check_dim(&obs.x0, sys.dims().n_x, "observer x0")?;
    let s = realize(sys, signals, horizon, seed)?;
    let (mut fed, mut model) = (obs.x0.clone(), obs.x0.clone());
    let mut max_deviation = 0.0f64;
    for t in 0..horizon as usize {
        let y_pred = sys.output(&fed, &s.u_tilde[t], &s.v_tilde[t]);
        fed = (obs.g)(&fed, &s.u_tilde[t], &s.w_tilde[t], &s.v_tilde[t], &y_pred);
        model = sys.step(&model, &s.u_tilde[t], &s.w_tilde[t]);
        let dev = (&fed - &model).norm();
        max_deviation = if dev.is_nan() { f64::NAN } else { max_deviation.max(dev) };
    }
    Ok(ReductionReport { horizon, max_deviation, tol, pass: max_deviation <= tol })
}
