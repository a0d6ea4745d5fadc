use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{eval_max_bound, eval_sum_bound, simulate_pair, PairSignals, SignalSpec, VerificationReport, VerifyError};
use crate::comparison::{MaxBoundFamily, SumBoundFamily};
use crate::rng::{channel, stream};
use crate::system::{BoxDomain, Dynamics};

/// How each trial picks its initial states and signals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpecFamily {
    /// The same specification in every trial; seeded boxes still differ per trial.
    Fixed { x0: Vec<f64>, chi0: Vec<f64>, signals: PairSignals },
    /// Initial states uniform in `[−state_radius, state_radius]`, and each of
    /// the six signals an independently drawn kind with parameters bounded by
    /// `signal_radius`.
    Mixed { state_radius: f64, signal_radius: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub trials: u64,
    pub horizon: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    pub family: SpecFamily,
}

fn default_tol() -> f64 {
    super::DEFAULT_TOL
}

pub const QUANTILE_LEVELS: [f64; 5] = [0.0, 0.01, 0.5, 0.99, 1.0];

/// Aggregate of one bound form over all trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginSummary {
    pub min_margin: f64,
    /// Total number of violating time steps across trials.
    pub violations: usize,
    pub violating_trials: u64,
    pub worst_trial: u64,
    /// Quantiles of the per-trial minimum margin at [`QUANTILE_LEVELS`].
    pub margin_quantiles: Vec<f64>,
    /// Full per-t report of the worst trial.
    pub worst_report: VerificationReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub config: McConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<MarginSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sum: Option<MarginSummary>,
}

impl AggregateReport {
    pub fn violations(&self) -> usize {
        self.max.as_ref().map_or(0, |s| s.violations) + self.sum.as_ref().map_or(0, |s| s.violations)
    }
}

fn uniform_vec(rng: &mut impl Rng, dim: usize, radius: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-radius..=radius)).collect()
}

fn draw_signal(rng: &mut impl Rng, dim: usize, radius: f64, horizon: u64) -> SignalSpec {
    match rng.random_range(0..5u8) {
        0 => SignalSpec::Zero,
        1 => SignalSpec::Constant { value: uniform_vec(rng, dim, radius) },
        2 => SignalSpec::Step {
            before: uniform_vec(rng, dim, radius),
            after: uniform_vec(rng, dim, radius),
            at: rng.random_range(0..=horizon),
        },
        3 => SignalSpec::DecayingExp { base: uniform_vec(rng, dim, radius), rate: rng.random_range(0.0..0.99) },
        _ => SignalSpec::SeededUniformBox { lo: vec![-radius; dim], hi: vec![radius; dim], seed: None },
    }
}

/// Draws a signal for each trajectory; one time in four both share a spec.
fn draw_pair(rng: &mut impl Rng, dim: usize, radius: f64, horizon: u64) -> (SignalSpec, SignalSpec) {
    let a = draw_signal(rng, dim, radius, horizon);
    let b = if rng.random_range(0..4u8) == 0 { a.clone() } else { draw_signal(rng, dim, radius, horizon) };
    (a, b)
}

fn trial_spec(
    sys: &dyn Dynamics,
    family: &SpecFamily,
    seed: u64,
    trial: u64,
    horizon: u64,
) -> Result<(DVector<f64>, DVector<f64>, PairSignals), VerifyError> {
    match family {
        SpecFamily::Fixed { x0, chi0, signals } => {
            Ok((DVector::from_column_slice(x0), DVector::from_column_slice(chi0), signals.clone()))
        }
        SpecFamily::Mixed { state_radius, signal_radius } => {
            if !(*state_radius >= 0.0 && *signal_radius >= 0.0) {
                return Err(VerifyError::Config("radii must be non-negative".into()));
            }
            let d = sys.dims();
            let states = BoxDomain::symmetric(d.n_x, *state_radius);
            let mut init = stream(seed, trial, channel::INITIAL);
            let (x0, chi0) = (states.sample(&mut init), states.sample(&mut init));
            let mut rng = stream(seed, trial, channel::SPECS);
            let (u, upsilon) = draw_pair(&mut rng, d.n_u, *signal_radius, horizon);
            let (w, omega) = draw_pair(&mut rng, d.n_w, *signal_radius, horizon);
            let (v, nu) = draw_pair(&mut rng, d.n_v, *signal_radius, horizon);
            Ok((x0, chi0, PairSignals { u, upsilon, w, omega, v, nu }))
        }
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[idx]
}

fn summarize(reports: Vec<VerificationReport>) -> MarginSummary {
    let mins: Vec<f64> = reports.iter().map(|r| r.min_margin).collect();
    let mut worst_trial = 0;
    for (i, m) in mins.iter().enumerate() {
        if *m < mins[worst_trial] {
            worst_trial = i;
        }
    }
    let mut sorted = mins.clone();
    sorted.sort_by(f64::total_cmp);
    MarginSummary {
        min_margin: mins[worst_trial],
        violations: reports.iter().map(|r| r.violations).sum(),
        violating_trials: reports.iter().filter(|r| r.violations > 0).count() as u64,
        worst_trial: worst_trial as u64,
        margin_quantiles: QUANTILE_LEVELS.iter().map(|q| quantile(&sorted, *q)).collect(),
        worst_report: reports.into_iter().nth(worst_trial).expect("at least one trial"),
    }
}

/// Simulates `cfg.trials` independent pairs and evaluates the given bound
/// families along each.
///
/// Every trial derives its randomness from `(seed, trial)` alone and the
/// per-trial results are reduced in trial order, so the report is identical
/// for any thread count.
pub fn monte_carlo_verify(
    sys: &dyn Dynamics,
    max: Option<&MaxBoundFamily>,
    sum: Option<&SumBoundFamily>,
    cfg: &McConfig,
) -> Result<AggregateReport, VerifyError> {
    if cfg.trials == 0 {
        return Err(VerifyError::Config("at least one trial is required".into()));
    }
    if cfg.horizon == 0 {
        return Err(VerifyError::ZeroHorizon);
    }
    let per_trial: Vec<(Option<VerificationReport>, Option<VerificationReport>)> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let (x0, chi0, signals) = trial_spec(sys, &cfg.family, cfg.seed, trial, cfg.horizon)?;
            let pair = simulate_pair(sys, &x0, &chi0, &signals, cfg.horizon, cfg.seed, trial)?;
            let trace = pair.trace(sys);
            let m = max.map(|f| eval_max_bound(&trace, f, cfg.tol)).transpose()?;
            let s = sum.map(|f| eval_sum_bound(&trace, f, cfg.tol)).transpose()?;
            Ok((m, s))
        })
        .collect::<Result<_, VerifyError>>()?;
    let (ms, ss): (Vec<_>, Vec<_>) = per_trial.into_iter().unzip();
    let collect = |v: Vec<Option<VerificationReport>>| v.into_iter().collect::<Option<Vec<_>>>().map(summarize);
    Ok(AggregateReport { config: cfg.clone(), max: collect(ms), sum: collect(ss) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::{max_certificate, sum_certificate, LinearSystem};
    use crate::system::Dims;
    use nalgebra::DMatrix;

    fn scalar() -> LinearSystem {
        let d = Dims { n_x: 1, n_u: 1, n_w: 1, n_v: 1, n_y: 1 };
        LinearSystem::from_slices(d, &[0.5], &[1.0], &[1.0], &[0.0], &[1.0], &[1.0]).unwrap()
    }

    #[test]
    fn scalar_demo_has_no_violations() {
        let sys = scalar();
        let l = DMatrix::zeros(1, 1);
        let q = DMatrix::identity(1, 1);
        let sum = sum_certificate(&sys, &l, &q, 100).unwrap().family();
        let max = max_certificate(&sys, &l, &q).unwrap().max_family();
        let cfg = McConfig {
            trials: 200,
            horizon: 100,
            seed: 5,
            tol: 1e-9,
            family: SpecFamily::Mixed { state_radius: 2.0, signal_radius: 1.0 },
        };
        let rep = monte_carlo_verify(&sys, Some(&max), Some(&sum), &cfg).unwrap();
        assert_eq!(rep.violations(), 0);
        assert_eq!(rep.sum.as_ref().unwrap().margin_quantiles.len(), 5);
    }

    #[test]
    fn single_zero_trial_has_zero_margin() {
        let sys = scalar();
        let sum = sum_certificate(&sys, &DMatrix::zeros(1, 1), &DMatrix::identity(1, 1), 10).unwrap().family();
        let cfg = McConfig {
            trials: 1,
            horizon: 10,
            seed: 0,
            tol: 1e-9,
            family: SpecFamily::Fixed { x0: vec![0.3], chi0: vec![0.3], signals: PairSignals::default() },
        };
        let rep = monte_carlo_verify(&sys, None, Some(&sum), &cfg).unwrap();
        assert_eq!(rep.sum.unwrap().min_margin, 0.0);
    }

    #[test]
    fn halved_process_slopes_are_caught() {
        let sys = scalar();
        let mut sum = sum_certificate(&sys, &DMatrix::zeros(1, 1), &DMatrix::identity(1, 1), 50).unwrap().family();
        if let crate::comparison::KlFn::Slopes { slopes, .. } = &mut sum.gamma {
            slopes.iter_mut().for_each(|s| *s *= 0.5);
        }
        let cfg = McConfig {
            trials: 3,
            horizon: 50,
            seed: 0,
            tol: 1e-9,
            family: SpecFamily::Fixed {
                x0: vec![0.0],
                chi0: vec![0.0],
                signals: PairSignals { w: SignalSpec::impulse(vec![1.0]), ..Default::default() },
            },
        };
        let rep = monte_carlo_verify(&sys, None, Some(&sum), &cfg).unwrap();
        assert!(rep.violations() > 0);
    }
}
