//! JSON scenario runners behind the command-line front end.
//!
//! Each runner takes a parsed scenario plus overrides and returns a report
//! that echoes the effective configuration. Errors carry the exit code the
//! CLI should use.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::comparison::{
    certify_kappa_envelope, construct_kappa, iterate_kappa, premise_holds, summability_sigma, ComparisonError,
    KlFn, MaxBoundFamily, ScalarFn, SumBoundFamily, SummabilityEnvelope, PREMISE_GRID_POINTS,
};
use crate::linear::{
    certify, max_certificate, sum_certificate, synthesize_observer_gain, CertError, CertificateBundle, CertifyOptions,
    LinearSystem,
};
use crate::matrix_serde;
use crate::nonlinear::{
    check_lyapunov_conditions, max_bounds, sum_bounds, LyapunovCandidate, LyapunovReport, NonlinError, NonlinSystem,
    SampleSpec,
};
use crate::system::{BoxDomain, Dynamics};
use crate::systems::{linear_builtin, nonlinear_builtin};
use crate::verifier::{
    check_output_injection, check_reduction, check_rgas_estimate, luenberger_observer, monte_carlo_verify,
    offset_observer, AggregateReport, InjectionReport, McConfig, ObserverScenario, ObserverSignals, ReductionReport,
    RgasReport, SpecFamily, VerifyError,
};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NOT_DETECTABLE: i32 = 2;
pub const EXIT_VIOLATION: i32 = 3;
pub const EXIT_CONSTRUCTION: i32 = 4;

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    NotDetectable(CertError),
    #[error("construction failed: {0}")]
    Construction(String),
}

impl CampaignError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CampaignError::Input(_) => EXIT_INPUT,
            CampaignError::NotDetectable(_) => EXIT_NOT_DETECTABLE,
            CampaignError::Construction(_) => EXIT_CONSTRUCTION,
        }
    }
}

impl From<CertError> for CampaignError {
    fn from(e: CertError) -> Self {
        match e {
            CertError::NotDetectable { .. } => CampaignError::NotDetectable(e),
            CertError::Dimension(_) | CertError::NotSymmetric { .. } | CertError::NotPositiveDefinite { .. } => {
                CampaignError::Input(e.to_string())
            }
            _ => CampaignError::Construction(e.to_string()),
        }
    }
}

impl From<ComparisonError> for CampaignError {
    fn from(e: ComparisonError) -> Self {
        match e {
            ComparisonError::RefinementFailed { .. }
            | ComparisonError::NotContraction { .. }
            | ComparisonError::RangeExceeded { .. }
            | ComparisonError::NotSummable(_)
            | ComparisonError::PremiseViolated { .. } => CampaignError::Construction(e.to_string()),
            _ => CampaignError::Input(e.to_string()),
        }
    }
}

impl From<NonlinError> for CampaignError {
    fn from(e: NonlinError) -> Self {
        match e {
            NonlinError::Comparison(c) => c.into(),
            NonlinError::Cert(c) => c.into(),
            NonlinError::InvalidCandidate(_) => CampaignError::Input(e.to_string()),
        }
    }
}

impl From<VerifyError> for CampaignError {
    fn from(e: VerifyError) -> Self {
        match e {
            VerifyError::Comparison(c) => c.into(),
            other => CampaignError::Input(other.to_string()),
        }
    }
}

/// Reads and parses a JSON file, mapping every failure to an input error.
pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CampaignError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CampaignError::Input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CampaignError::Input(format!("cannot parse {}: {e}", path.display())))
}

/// Reads a matrix stored as a JSON array of rows.
pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>, CampaignError> {
    let rows: Vec<Vec<f64>> = read_json(path)?;
    matrix_serde::from_rows(&rows).map_err(|e| CampaignError::Input(format!("{}: {e}", path.display())))
}

/// A system named in a scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemRef {
    /// A built-in system by name.
    Builtin(String),
    /// An inline linear system.
    Linear(LinearSystem),
    /// A linear system JSON file, relative to the scenario file.
    Path(PathBuf),
}

pub enum ResolvedSystem {
    Linear(LinearSystem),
    Nonlinear(Box<NonlinSystem>, Box<LyapunovCandidate>),
}

impl SystemRef {
    pub fn resolve(&self, base: &Path) -> Result<ResolvedSystem, CampaignError> {
        match self {
            SystemRef::Builtin(name) => {
                if let Some(s) = linear_builtin(name) {
                    Ok(ResolvedSystem::Linear(s))
                } else if let Some((s, c)) = nonlinear_builtin(name) {
                    Ok(ResolvedSystem::Nonlinear(Box::new(s), Box::new(c)))
                } else {
                    Err(CampaignError::Input(format!("unknown built-in system {name:?}")))
                }
            }
            SystemRef::Linear(s) => Ok(ResolvedSystem::Linear(s.clone())),
            SystemRef::Path(p) => Ok(ResolvedSystem::Linear(read_json(&base.join(p))?)),
        }
    }

    pub fn resolve_linear(&self, base: &Path) -> Result<LinearSystem, CampaignError> {
        match self.resolve(base)? {
            ResolvedSystem::Linear(s) => Ok(s),
            ResolvedSystem::Nonlinear(..) => Err(CampaignError::Input("a linear system is required here".into())),
        }
    }
}

/// Optional `L` and `Q` overrides shared by the runners.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GainOverrides {
    #[serde(rename = "gain_L", default, with = "matrix_serde::option", skip_serializing_if = "Option::is_none")]
    pub gain: Option<DMatrix<f64>>,
    #[serde(rename = "weight_Q", default, with = "matrix_serde::option", skip_serializing_if = "Option::is_none")]
    pub weight: Option<DMatrix<f64>>,
}

impl GainOverrides {
    /// Values from `other` take precedence.
    pub fn merged(&self, other: &GainOverrides) -> GainOverrides {
        GainOverrides {
            gain: other.gain.clone().or_else(|| self.gain.clone()),
            weight: other.weight.clone().or_else(|| self.weight.clone()),
        }
    }

    fn options(&self, horizon: u64) -> CertifyOptions {
        CertifyOptions { gain: self.gain.clone(), weight: self.weight.clone(), horizon, ..Default::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifyConfig {
    pub system: SystemRef,
    #[serde(flatten)]
    pub overrides: GainOverrides,
    pub horizon: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifyReport {
    pub config: CertifyConfig,
    #[serde(flatten)]
    pub certificate: CertificateBundle,
}

pub fn run_certify(sys: &LinearSystem, config: CertifyConfig) -> Result<CertifyReport, CampaignError> {
    if config.horizon == 0 {
        return Err(CampaignError::Input("horizon must be positive".into()));
    }
    let certificate = certify(sys, &config.overrides.options(config.horizon))?;
    Ok(CertifyReport { config, certificate })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundSelection {
    Max,
    Sum,
    #[default]
    Both,
}

/// Which construction supplies the bound families.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundPath {
    /// Linear certificates; nonlinear built-ins always use the Lyapunov path.
    #[default]
    Linear,
    /// Lyapunov-data bounds; a linear system is wrapped with `V = ‖P^½(x − χ)‖`.
    Nonlinear,
}

fn default_trials() -> u64 {
    1000
}
fn default_tol() -> f64 {
    crate::verifier::DEFAULT_TOL
}
fn default_grid_step() -> f64 {
    0.01
}
fn default_extent() -> f64 {
    100.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyScenario {
    pub system: SystemRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateBundle>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate_path: Option<PathBuf>,
    #[serde(flatten)]
    pub overrides: GainOverrides,
    #[serde(default)]
    pub bounds: BoundSelection,
    #[serde(default)]
    pub path: BoundPath,
    #[serde(default = "default_trials")]
    pub trials: u64,
    pub horizon: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    pub family: SpecFamily,
    /// Multiplies every process-disturbance slope of the sum-form family.
    /// Used to exercise violation detection with a deliberately wrong bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_scale: Option<f64>,
    /// Sample check of the Lyapunov conditions on the nonlinear path.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conditions: Option<SampleSpec>,
    #[serde(default = "default_grid_step")]
    pub grid_step: f64,
    #[serde(default = "default_extent")]
    pub extent: f64,
}

/// Command-line values that take precedence over the scenario file.
#[derive(Clone, Debug, Default)]
pub struct RunOverrides {
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub horizon: Option<u64>,
    pub tol: Option<f64>,
    pub gains: GainOverrides,
}

impl VerifyScenario {
    pub fn apply(&mut self, o: &RunOverrides) {
        self.seed = o.seed.unwrap_or(self.seed);
        self.trials = o.trials.unwrap_or(self.trials);
        self.horizon = o.horizon.unwrap_or(self.horizon);
        self.tol = o.tol.unwrap_or(self.tol);
        self.overrides = self.overrides.merged(&o.gains);
        if let Some(c) = &mut self.conditions {
            c.seed = self.seed;
        }
    }

    fn validate(&self) -> Result<(), CampaignError> {
        if self.horizon == 0 {
            return Err(CampaignError::Input("horizon must be at least 1".into()));
        }
        if self.trials == 0 {
            return Err(CampaignError::Input("trials must be at least 1".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(CampaignError::Input("tol must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub config: VerifyScenario,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lyapunov: Option<LyapunovReport>,
    pub campaign: AggregateReport,
    pub violations: usize,
    pub pass: bool,
}

fn scale_slopes(f: &mut KlFn, factor: f64) -> Result<(), CampaignError> {
    match f {
        KlFn::Slopes { slopes, .. } => {
            slopes.iter_mut().for_each(|s| *s *= factor);
            Ok(())
        }
        KlFn::Exponential { gain, .. } | KlFn::Separable { gain, .. } => {
            *gain = gain.clone().scaled(factor);
            Ok(())
        }
        KlFn::Table { slices } => {
            for s in slices.iter_mut() {
                *s = s.clone().scaled(factor);
            }
            Ok(())
        }
    }
}

struct Families {
    sys: Box<dyn Dynamics>,
    max: Option<MaxBoundFamily>,
    sum: Option<SumBoundFamily>,
    lyapunov: Option<LyapunovReport>,
}

fn linear_bundle(sys: &LinearSystem, sc: &VerifyScenario, base: &Path) -> Result<CertificateBundle, CampaignError> {
    if let Some(c) = &sc.certificate {
        return Ok(c.clone());
    }
    if let Some(p) = &sc.certificate_path {
        let value: serde_json::Value = read_json(&base.join(p))?;
        return serde_json::from_value(value)
            .map_err(|e| CampaignError::Input(format!("certificate {}: {e}", p.display())));
    }
    Ok(certify(sys, &sc.overrides.options(sc.horizon))?)
}

fn nonlinear_families(
    sys: NonlinSystem,
    cand: &LyapunovCandidate,
    sc: &VerifyScenario,
) -> Result<Families, CampaignError> {
    cand.validate()?;
    let lyapunov = sc.conditions.as_ref().map(|spec| check_lyapunov_conditions(&sys, cand, spec));
    let want_max = sc.bounds != BoundSelection::Sum;
    let want_sum = sc.bounds != BoundSelection::Max;
    let max = if want_max { Some(max_bounds(cand, sc.grid_step, sc.extent)?.family()) } else { None };
    let sum = if want_sum { Some(sum_bounds(cand, None, None, sc.grid_step, sc.extent)?.family) } else { None };
    Ok(Families { sys: Box::new(sys), max, sum, lyapunov })
}

fn families(sc: &VerifyScenario, base: &Path) -> Result<Families, CampaignError> {
    match (sc.system.resolve(base)?, sc.path) {
        (ResolvedSystem::Nonlinear(sys, cand), _) => nonlinear_families(*sys, &cand, sc),
        (ResolvedSystem::Linear(sys), BoundPath::Nonlinear) => {
            let bundle = linear_bundle(&sys, sc, base)?;
            let cand = LyapunovCandidate::from_linear(&bundle.max)?;
            nonlinear_families(NonlinSystem::from_linear(sys), &cand, sc)
        }
        (ResolvedSystem::Linear(sys), BoundPath::Linear) => {
            let bundle = linear_bundle(&sys, sc, base)?;
            let max = (sc.bounds != BoundSelection::Sum).then(|| bundle.max.max_family());
            let sum = (sc.bounds != BoundSelection::Max).then(|| bundle.sum.family());
            Ok(Families { sys: Box::new(sys), max, sum, lyapunov: None })
        }
    }
}

/// Monte-Carlo verification of a system's bound families.
///
/// `base` resolves relative paths in the scenario.
pub fn run_verify(mut sc: VerifyScenario, overrides: &RunOverrides, base: &Path) -> Result<VerifyReport, CampaignError> {
    sc.apply(overrides);
    sc.validate()?;
    let mut fam = families(&sc, base)?;
    if let Some(factor) = sc.gamma_scale {
        if let Some(s) = &mut fam.sum {
            scale_slopes(&mut s.gamma, factor)?;
        }
    }
    let cfg = McConfig { trials: sc.trials, horizon: sc.horizon, seed: sc.seed, tol: sc.tol, family: sc.family.clone() };
    let campaign = monte_carlo_verify(fam.sys.as_ref(), fam.max.as_ref(), fam.sum.as_ref(), &cfg)?;
    let violations = campaign.violations();
    let pass = violations == 0 && fam.lyapunov.as_ref().is_none_or(|l| l.pass());
    Ok(VerifyReport { config: sc, lyapunov: fam.lyapunov, campaign, violations, pass })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObserverKind {
    #[default]
    Luenberger,
    /// Luenberger with a constant added to the injection term.
    Offset { offset: f64 },
}

fn default_injection_samples() -> usize {
    1000
}
fn default_injection_radius() -> f64 {
    1.0
}
fn default_injection_tol() -> f64 {
    1e-10
}
fn default_reduction_tol() -> f64 {
    1e-12
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InjectionSampling {
    #[serde(default = "default_injection_samples")]
    pub samples: usize,
    /// Half-width of the sampling box on every space.
    #[serde(default = "default_injection_radius")]
    pub radius: f64,
    #[serde(default = "default_injection_tol")]
    pub tol: f64,
}

impl Default for InjectionSampling {
    fn default() -> Self {
        Self { samples: default_injection_samples(), radius: default_injection_radius(), tol: default_injection_tol() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObserverCampaign {
    pub system: SystemRef,
    #[serde(default)]
    pub observer: ObserverKind,
    #[serde(flatten)]
    pub overrides: GainOverrides,
    pub x0: Vec<f64>,
    pub x_hat0: Vec<f64>,
    #[serde(default)]
    pub signals: ObserverSignals,
    pub horizon: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminal_threshold: Option<f64>,
    #[serde(default)]
    pub injection: InjectionSampling,
    #[serde(default = "default_reduction_tol")]
    pub reduction_tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObserverReport {
    pub config: ObserverCampaign,
    #[serde(rename = "gain_L", with = "matrix_serde")]
    pub gain: DMatrix<f64>,
    pub injection: InjectionReport,
    pub rgas: RgasReport,
    pub reduction: ReductionReport,
    pub pass: bool,
}

/// Output-injection identity, estimate along a plant/observer run, and the
/// reduction to the open-loop model.
pub fn run_observer(mut sc: ObserverCampaign, overrides: &RunOverrides, base: &Path) -> Result<ObserverReport, CampaignError> {
    sc.seed = overrides.seed.unwrap_or(sc.seed);
    sc.horizon = overrides.horizon.unwrap_or(sc.horizon);
    sc.tol = overrides.tol.unwrap_or(sc.tol);
    sc.overrides = sc.overrides.merged(&overrides.gains);
    if sc.horizon == 0 {
        return Err(CampaignError::Input("horizon must be at least 1".into()));
    }
    let sys = sc.system.resolve_linear(base)?;
    let n_x = sys.a.nrows();
    let gain = match &sc.overrides.gain {
        Some(l) => {
            sys.check_gain(l)?;
            l.clone()
        }
        None => synthesize_observer_gain(&sys, 10_000, 1e-12)?,
    };
    let q = sc.overrides.weight.clone().unwrap_or_else(|| DMatrix::identity(n_x, n_x));
    if sc.x_hat0.len() != n_x || sc.x0.len() != n_x {
        return Err(CampaignError::Input(format!("initial states must have dimension {n_x}")));
    }
    let x_hat0 = DVector::from_column_slice(&sc.x_hat0);
    let obs = match sc.observer {
        ObserverKind::Luenberger => luenberger_observer(&sys, &gain, x_hat0),
        ObserverKind::Offset { offset } => offset_observer(&sys, &gain, offset, x_hat0),
    };
    let d = sys.dims();
    let r = sc.injection.radius;
    let spec = SampleSpec {
        x: BoxDomain::symmetric(d.n_x, r),
        u: BoxDomain::symmetric(d.n_u, r),
        w: BoxDomain::symmetric(d.n_w, r),
        v: BoxDomain::symmetric(d.n_v, r),
        samples: sc.injection.samples,
        seed: sc.seed,
    };
    let injection = check_output_injection(&obs, &sys, &spec, sc.injection.tol);

    let max = max_certificate(&sys, &gain, &q)?.max_family();
    let sum = sum_certificate(&sys, &gain, &q, sc.horizon)?.family();
    let scenario = ObserverScenario {
        x0: sc.x0.clone(),
        signals: sc.signals.clone(),
        horizon: sc.horizon,
        seed: sc.seed,
        tol: sc.tol,
        terminal_threshold: sc.terminal_threshold,
    };
    let rgas = check_rgas_estimate(&sys, &obs, Some(&max), Some(&sum), &scenario)?;
    let reduction = check_reduction(&sys, &obs, &sc.signals, sc.horizon, sc.seed, sc.reduction_tol)?;
    let pass = injection.pass && rgas.pass && reduction.pass;
    Ok(ObserverReport { config: sc, gain, injection, rgas, reduction, pass })
}

fn default_rows() -> usize {
    1001
}
fn default_kappa_extent() -> f64 {
    10.0
}
fn default_r_bar() -> f64 {
    1.0
}

/// Input of the κ table dump. A bare `ScalarFn` is accepted as `alpha3`
/// with all defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaRequest {
    pub alpha3: ScalarFn,
    #[serde(default = "default_grid_step")]
    pub grid_step: f64,
    #[serde(default = "default_kappa_extent")]
    pub extent: f64,
    #[serde(default = "default_rows")]
    pub rows: usize,
    /// Lower-bound slope for the summability premise; derived from `α₃` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(default = "default_r_bar")]
    pub r_bar: f64,
    /// Iterate counts `t` for extra `κᵗ(r)` columns.
    #[serde(default)]
    pub powers: Vec<u64>,
}

impl KappaRequest {
    pub fn from_value(v: serde_json::Value) -> Result<Self, CampaignError> {
        if v.get("alpha3").is_some() {
            serde_json::from_value(v).map_err(|e| CampaignError::Input(e.to_string()))
        } else {
            let alpha3: ScalarFn = serde_json::from_value(v).map_err(|e| CampaignError::Input(e.to_string()))?;
            Ok(Self {
                alpha3,
                grid_step: default_grid_step(),
                extent: default_kappa_extent(),
                rows: default_rows(),
                k: None,
                r_bar: default_r_bar(),
                powers: Vec::new(),
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaRow {
    pub r: f64,
    pub kappa: f64,
    pub r_minus_alpha3: f64,
    pub powers: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaReport {
    pub config: KappaRequest,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envelope: Option<SummabilityEnvelope>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
    pub rows: Vec<KappaRow>,
}

impl KappaReport {
    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["r".to_string(), "kappa".into(), "r_minus_alpha3".into()];
        h.extend(self.config.powers.iter().map(|t| format!("kappa_pow_{t}")));
        if self.envelope.is_some() {
            h.push("sigma".into());
        }
        h
    }

    pub fn csv_rows(&self) -> impl Iterator<Item = Vec<String>> + '_ {
        self.rows.iter().map(|row| {
            let mut v = vec![row.r.to_string(), row.kappa.to_string(), row.r_minus_alpha3.to_string()];
            v.extend(row.powers.iter().map(f64::to_string));
            if let Some(s) = row.sigma {
                v.push(s.to_string());
            }
            v
        })
    }
}

/// Smallest ratio `α(r)/r` on the premise grid, shrunk by a relative margin.
fn derived_k(alpha: &ScalarFn, r_bar: f64) -> Result<f64, ComparisonError> {
    let n = PREMISE_GRID_POINTS - 1;
    let mut k = f64::INFINITY;
    for i in 1..=n {
        let r = r_bar * i as f64 / n as f64;
        k = k.min(alpha.eval(r)? / r);
    }
    Ok((k * (1.0 - 1e-9)).min(1.0 - 1e-9))
}

fn envelope_for(req: &KappaRequest, kappa: &ScalarFn) -> Result<SummabilityEnvelope, ComparisonError> {
    let k = match req.k {
        Some(k) => k,
        None => derived_k(&req.alpha3, req.r_bar)?,
    };
    premise_holds(&req.alpha3, k, req.r_bar)?;
    let env = summability_sigma(&req.alpha3, k, req.r_bar)?;
    certify_kappa_envelope(kappa, &env)?;
    Ok(env)
}

pub fn run_kappa(req: KappaRequest) -> Result<KappaReport, CampaignError> {
    if !(req.grid_step > 0.0 && req.extent > 0.0) || req.rows < 2 {
        return Err(CampaignError::Input("grid_step and extent must be positive and rows at least 2".into()));
    }
    if !req.alpha3.class().is_k {
        return Err(CampaignError::Input("alpha3 is not of class K".into()));
    }
    let kappa = construct_kappa(&req.alpha3, req.grid_step, req.extent)?;
    let (envelope, warning) = match envelope_for(&req, &kappa) {
        Ok(env) => (Some(env), None),
        Err(e) => (None, Some(format!("summability premise not established, σ omitted: {e}"))),
    };
    let last = (req.rows - 1) as f64;
    let mut rows = Vec::with_capacity(req.rows);
    for i in 0..req.rows {
        let r = req.extent * i as f64 / last;
        let powers = req.powers.iter().map(|t| iterate_kappa(&kappa, r, *t)).collect::<Result<_, _>>()?;
        rows.push(KappaRow {
            r,
            kappa: kappa.eval(r)?,
            r_minus_alpha3: r - req.alpha3.eval(r)?,
            powers,
            sigma: envelope.as_ref().map(|e| e.eval(r)).transpose()?,
        });
    }
    Ok(KappaReport { config: req, envelope, warning, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verifier::{PairSignals, SignalSpec};

    fn here() -> PathBuf {
        PathBuf::from(".")
    }

    fn scalar_scenario() -> VerifyScenario {
        serde_json::from_value(serde_json::json!({
            "system": {"builtin": "scalar_demo"},
            "trials": 50,
            "horizon": 60,
            "family": {"kind": "mixed", "state_radius": 2.0, "signal_radius": 1.0}
        }))
        .unwrap()
    }

    #[test]
    fn verify_scalar_demo_passes() {
        let r = run_verify(scalar_scenario(), &RunOverrides::default(), &here()).unwrap();
        assert!(r.pass);
        assert_eq!(r.config.trials, 50);
        assert!(r.campaign.max.is_some() && r.campaign.sum.is_some());
    }

    #[test]
    fn corrupted_gamma_is_reported() {
        let mut sc = scalar_scenario();
        sc.gamma_scale = Some(0.5);
        sc.bounds = BoundSelection::Sum;
        sc.family = SpecFamily::Fixed {
            x0: vec![0.0],
            chi0: vec![0.0],
            signals: PairSignals { w: SignalSpec::impulse(vec![1.0]), ..Default::default() },
        };
        let r = run_verify(sc, &RunOverrides::default(), &here()).unwrap();
        assert!(!r.pass);
        assert!(r.violations > 0);
    }

    #[test]
    fn zero_horizon_is_input_error() {
        let o = RunOverrides { horizon: Some(0), ..Default::default() };
        let e = run_verify(scalar_scenario(), &o, &here()).unwrap_err();
        assert_eq!(e.exit_code(), EXIT_INPUT);
    }

    #[test]
    fn nonlinear_builtin_verifies() {
        let mut sc = scalar_scenario();
        sc.system = SystemRef::Builtin("sine_contraction".into());
        sc.conditions = Some(SampleSpec {
            x: BoxDomain::symmetric(1, 3.0),
            u: BoxDomain::symmetric(1, 1.0),
            w: BoxDomain::symmetric(1, 1.0),
            v: BoxDomain::symmetric(1, 1.0),
            samples: 500,
            seed: 0,
        });
        let r = run_verify(sc, &RunOverrides::default(), &here()).unwrap();
        assert!(r.pass, "{:?}", r.violations);
        assert!(r.lyapunov.unwrap().pass());
    }

    #[test]
    fn undetectable_exit_code() {
        let cfg = CertifyConfig { system: SystemRef::Builtin("undetectable_demo".into()), overrides: Default::default(), horizon: 10 };
        let sys = cfg.system.resolve_linear(&here()).unwrap();
        let e = run_certify(&sys, cfg).unwrap_err();
        assert_eq!(e.exit_code(), EXIT_NOT_DETECTABLE);
        assert!(e.to_string().contains("1.1"));
    }

    #[test]
    fn kappa_dump() {
        let r = run_kappa(KappaRequest::from_value(serde_json::json!({"kind": "linear", "slope": 0.5})).unwrap()).unwrap();
        for row in &r.rows {
            assert!((row.kappa - 0.75 * row.r).abs() <= 1e-12 * row.r.max(1.0));
        }
        assert!(r.envelope.is_some());
        let req = KappaRequest {
            alpha3: ScalarFn::tabulate(10.0, 200, |r| r * r).unwrap(),
            grid_step: 0.01,
            extent: 10.0,
            rows: 11,
            k: Some(0.5),
            r_bar: 1.0,
            powers: vec![2],
        };
        let r = run_kappa(req).unwrap();
        assert!(r.envelope.is_none());
        assert!(r.warning.is_some());
        assert_eq!(r.header().len(), 4);
    }

    #[test]
    fn observer_runner() {
        let sc: ObserverCampaign = serde_json::from_value(serde_json::json!({
            "system": {"builtin": "scalar_demo"},
            "x0": [1.0],
            "x_hat0": [0.0],
            "signals": {"w": {"kind": "decaying_exp", "base": [1.0], "rate": 0.9}},
            "horizon": 200,
            "terminal_threshold": 1e-6
        }))
        .unwrap();
        let r = run_observer(sc.clone(), &RunOverrides::default(), &here()).unwrap();
        assert!(r.pass, "{r:?}");
        let mut bad = sc;
        bad.observer = ObserverKind::Offset { offset: 0.1 };
        let r = run_observer(bad, &RunOverrides::default(), &here()).unwrap();
        assert!(!r.injection.pass);
        assert!(!r.pass);
    }
}
