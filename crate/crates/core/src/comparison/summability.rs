use serde::{Deserialize, Serialize};

use super::{ComparisonError, KlFn, ScalarFn};

/// Grid size for the sampled check `α(r) ≥ K·r` on `[0, r̄]`.
pub const PREMISE_GRID_POINTS: usize = 1000;

/// Relative slack used when comparing a tabulated κ against its envelope.
const ENVELOPE_SLACK: f64 = 1e-12;

/// Whether the linear lower bound holds on the whole domain or only on `[0, r̄]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaBranch {
    Global,
    Local,
}

/// A K-function `σ` bounding `Σ_{τ≥0} κᵗ(r)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummabilityEnvelope {
    pub k: f64,
    pub r_bar: f64,
    pub branch: SigmaBranch,
    pub sigma: ScalarFn,
}

impl SummabilityEnvelope {
    pub fn eval(&self, r: f64) -> Result<f64, ComparisonError> {
        self.sigma.eval(r)
    }
}

fn check_k(k: f64, r_bar: f64) -> Result<(), ComparisonError> {
    if !(k > 0.0 && k < 1.0) {
        return Err(ComparisonError::InvalidParameter(format!("K = {k} must lie in (0, 1)")));
    }
    if !(r_bar > 0.0 && r_bar.is_finite()) {
        return Err(ComparisonError::InvalidParameter(format!("r̄ = {r_bar} must be positive")));
    }
    Ok(())
}

/// Checks `α(r) ≥ K·r` on a uniform grid of [`PREMISE_GRID_POINTS`] points over `[0, r̄]`.
pub fn premise_holds(alpha: &ScalarFn, k: f64, r_bar: f64) -> Result<(), ComparisonError> {
    check_k(k, r_bar)?;
    let n = PREMISE_GRID_POINTS - 1;
    for i in 0..=n {
        let r = r_bar * i as f64 / n as f64;
        let a = alpha.eval(r)?;
        if a < k * r {
            return Err(ComparisonError::PremiseViolated { k, r, alpha: a });
        }
    }
    Ok(())
}

/// Whether `α(r) ≥ K·r` holds on all of `[0, domain_cap]`.
///
/// Exact for linear and tabulated `α`; other forms are checked on a
/// log-spaced sample.
pub fn linear_lower_bound_holds(alpha: &ScalarFn, k: f64) -> bool {
    if let Some(s) = alpha.linear_slope() {
        return s >= k;
    }
    let holds = |r: f64| alpha.eval(r).is_ok_and(|a| a >= k * r);
    match alpha {
        ScalarFn::Table { points } => points.breakpoints().iter().all(|&r| holds(r)),
        _ => {
            let cap = alpha.domain_cap();
            let lo = (cap * 1e-12).max(f64::MIN_POSITIVE);
            let n = 4000;
            (0..=n).all(|i| holds(lo * (cap / lo).powf(i as f64 / n as f64)))
        }
    }
}

/// Builds the summability envelope for `κ` constructed from `α` under
/// `α(r) ≥ K·r` on `[0, r̄]`.
///
/// Below `r̄` the envelope is `(2/K + 1)·r`. Above `r̄` it is
/// `(r² + r̄²)/(K·r̄) + ½(3r̄ − r)` when the lower bound holds on the whole
/// domain, and `(r² + r̄²)/(K·r̄) + ½(r + r̄)` otherwise.
pub fn summability_sigma(alpha: &ScalarFn, k: f64, r_bar: f64) -> Result<SummabilityEnvelope, ComparisonError> {
    premise_holds(alpha, k, r_bar)?;
    let branch = if linear_lower_bound_holds(alpha, k) { SigmaBranch::Global } else { SigmaBranch::Local };
    let sigma = ScalarFn::Sigma { k, r_bar, local: branch == SigmaBranch::Local, domain_cap: alpha.domain_cap() };
    Ok(SummabilityEnvelope { k, r_bar, branch, sigma })
}

/// Verifies that a constructed κ obeys the contraction estimates behind `env`:
/// `κ(s) ≤ (1 − K/2)s` on `[0, r̄]` (everywhere for the global branch) and
/// `κ(s) ≤ s − K r̄/2` beyond `r̄`.
///
/// For tabulated κ the check at the breakpoints and at `r̄` is exact, since
/// both sides are affine between them.
pub fn certify_kappa_envelope(kappa: &ScalarFn, env: &SummabilityEnvelope) -> Result<(), ComparisonError> {
    let (k, r_bar) = (env.k, env.r_bar);
    let global = env.branch == SigmaBranch::Global;
    let check = |s: f64| -> Result<(), ComparisonError> {
        let v = kappa.eval(s)?;
        let contraction = (1.0 - 0.5 * k) * s;
        let bound = if s <= r_bar || global { contraction } else { s - 0.5 * k * r_bar };
        if v > bound + ENVELOPE_SLACK * s {
            return Err(ComparisonError::NotSummable(format!("κ({s}) = {v} exceeds the envelope bound {bound}")));
        }
        Ok(())
    };
    let cap = kappa.domain_cap();
    if let Some(c) = kappa.linear_slope() {
        return if c <= 1.0 - 0.5 * k {
            Ok(())
        } else {
            Err(ComparisonError::NotSummable(format!("κ slope {c} exceeds 1 − K/2")))
        };
    }
    match kappa {
        ScalarFn::Table { points } => {
            for &s in points.breakpoints() {
                check(s)?;
            }
        }
        _ => {
            let n = 20_000;
            for i in 1..=n {
                check(cap * i as f64 / n as f64)?;
            }
        }
    }
    if r_bar <= cap {
        check(r_bar)?;
    }
    Ok(())
}

/// Converts the exponential sum term `ηᵗ·gain(r)` into the max-form term
/// `(√η/(1 − √η))·η^{τ/2}·gain(r)`.
pub fn exp_sum_to_max(eta: f64, gain: ScalarFn) -> Result<KlFn, ComparisonError> {
    if !(0.0..1.0).contains(&eta) {
        return Err(ComparisonError::InvalidParameter(format!("rate {eta} must lie in [0, 1)")));
    }
    let root = eta.sqrt();
    Ok(KlFn::exponential(root, gain.scaled(root / (1.0 - root))))
}

/// A K-function bounding `Σ_{τ≥0} β(r, τ)`.
pub fn kl_to_classical(beta: &KlFn) -> Result<ScalarFn, ComparisonError> {
    match beta {
        KlFn::Exponential { rate, gain, delay } => {
            if !(0.0..1.0).contains(rate) {
                return Err(ComparisonError::NotSummable(format!("rate {rate} is not below 1")));
            }
            Ok(gain.clone().scaled(*delay as f64 + 1.0 / (1.0 - rate)))
        }
        KlFn::Slopes { slopes, tail_rate } => {
            if !(0.0..1.0).contains(tail_rate) {
                return Err(ComparisonError::NotSummable(format!("tail rate {tail_rate} is not below 1")));
            }
            let last = *slopes.last().unwrap_or(&0.0);
            Ok(ScalarFn::linear(slopes.iter().sum::<f64>() + last * tail_rate / (1.0 - tail_rate)))
        }
        KlFn::Separable { gain, outer, delay, envelope: Some(env), .. } => {
            // each delayed step repeats κ⁰ = identity once more
            let mut inner = env.sigma.clone().after(gain.clone());
            if *delay > 0 {
                inner = ScalarFn::Sum { terms: vec![inner, gain.clone().scaled(*delay as f64)] };
            }
            match outer {
                None => Ok(inner),
                Some(o) => match o.linear_slope() {
                    Some(c) => Ok(inner.scaled(c)),
                    None => Err(ComparisonError::NotSummable("non-linear outer map".into())),
                },
            }
        }
        KlFn::Separable { envelope: None, .. } => Err(ComparisonError::NotSummable("no certified envelope".into())),
        KlFn::Table { .. } => Err(ComparisonError::NotSummable("finite table carries no tail information".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comparison::{construct_kappa, iterate_kappa};

    fn envelope(alpha: &ScalarFn) -> SummabilityEnvelope {
        summability_sigma(alpha, 0.5, 1.0).unwrap()
    }

    #[test]
    fn sigma_branch_values() {
        let env = envelope(&ScalarFn::linear(0.5));
        assert_eq!(env.branch, SigmaBranch::Global);
        assert_eq!(env.eval(0.5).unwrap(), 2.5);
        assert_eq!(env.eval(2.0).unwrap(), 10.5);
        assert_eq!(env.eval(0.0).unwrap(), 0.0);
        assert!(env.sigma.class().is_k);
    }

    #[test]
    fn local_branch_for_saturating_alpha() {
        let alpha = ScalarFn::table(&[[0.0, 0.0], [1.0, 1.0], [100.0, 1.5]]).unwrap();
        let env = envelope(&alpha);
        assert_eq!(env.branch, SigmaBranch::Local);
        // (4 + 1)/0.5 + (2 + 1)/2
        assert_eq!(env.eval(2.0).unwrap(), 11.5);
    }

    #[test]
    fn premise_violation_reported() {
        let err = summability_sigma(&ScalarFn::power(1.0, 2.0), 0.5, 1.0).unwrap_err();
        assert!(matches!(err, ComparisonError::PremiseViolated { .. }));
    }

    #[test]
    fn saturating_alpha_sums_stay_below_local_sigma() {
        let alpha = ScalarFn::table(&[[0.0, 0.0], [1.0, 1.0], [100.0, 1.5]]).unwrap();
        let env = envelope(&alpha);
        let kappa = construct_kappa(&alpha, 0.01, 100.0).unwrap();
        certify_kappa_envelope(&kappa, &env).unwrap();
        for r in [0.3, 1.0, 2.0, 7.5, 40.0, 100.0] {
            let mut s = r;
            let mut total = 0.0;
            for _ in 0..20_000 {
                total += s;
                s = iterate_kappa(&kappa, s, 1).unwrap();
            }
            assert!(total <= env.eval(r).unwrap(), "r = {r}: {total}");
        }
    }

    #[test]
    fn envelope_rejects_slow_kappa() {
        let env = envelope(&ScalarFn::linear(0.5));
        assert!(certify_kappa_envelope(&ScalarFn::linear(0.9), &env).is_err());
        assert!(certify_kappa_envelope(&ScalarFn::linear(0.75), &env).is_ok());
    }

    #[test]
    fn sum_to_max_examples() {
        let b = exp_sum_to_max(0.25, ScalarFn::identity()).unwrap();
        assert!((b.eval(1.0, 2).unwrap() - 0.25).abs() < 1e-15);
        let b = exp_sum_to_max(0.81, ScalarFn::linear(2.0)).unwrap();
        assert!((b.eval(1.0, 1).unwrap() - 16.2).abs() < 1e-12);
        let b = exp_sum_to_max(0.0, ScalarFn::identity()).unwrap();
        assert_eq!(b.eval(3.0, 1).unwrap(), 0.0);
        assert!(exp_sum_to_max(1.0, ScalarFn::identity()).is_err());
    }

    #[test]
    fn classical_bounds() {
        let geo = |rate: f64, g: f64| KlFn::exponential(rate, ScalarFn::linear(g));
        assert_eq!(kl_to_classical(&geo(0.5, 1.0)).unwrap().eval(1.0).unwrap(), 2.0);
        assert_eq!(kl_to_classical(&geo(0.75, 2.0)).unwrap().eval(1.0).unwrap(), 8.0);
        assert_eq!(kl_to_classical(&KlFn::zero()).unwrap().eval(5.0).unwrap(), 0.0);
        let table = KlFn::Table { slices: vec![ScalarFn::identity()] };
        assert!(matches!(kl_to_classical(&table), Err(ComparisonError::NotSummable(_))));
    }

    #[test]
    fn separable_classical_uses_envelope() {
        let alpha = ScalarFn::linear(0.5);
        let env = envelope(&alpha);
        let kappa = construct_kappa(&alpha, 0.01, 100.0).unwrap();
        let b = KlFn::Separable { kappa, gain: ScalarFn::linear(2.0), outer: None, delay: 0, envelope: Some(env) };
        let s = kl_to_classical(&b).unwrap();
        assert_eq!(s.eval(0.25).unwrap(), 2.5);
        let KlFn::Separable { kappa, gain, outer, envelope, .. } = b else { unreachable!() };
        let delayed = KlFn::Separable { kappa, gain, outer, delay: 1, envelope };
        assert_eq!(kl_to_classical(&delayed).unwrap().eval(0.25).unwrap(), 3.0);
    }
}
