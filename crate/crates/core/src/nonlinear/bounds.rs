use serde::{Deserialize, Serialize};

use super::{LyapunovCandidate, NonlinError};
use crate::comparison::{
    certify_kappa_envelope, construct_kappa, linear_lower_bound_holds, premise_holds, summability_sigma, ComparisonError,
    KlFn, MaxBoundFamily, ScalarFn, SumBoundFamily, SummabilityEnvelope,
};

/// Replaces a composite that is exactly `c·r` by its closed form.
fn simplify(f: ScalarFn) -> ScalarFn {
    match (&f, f.linear_slope()) {
        (ScalarFn::Linear { .. }, _) => f,
        (_, Some(s)) => ScalarFn::linear(s),
        _ => f,
    }
}

/// `φ(r) = 4 α₂(α₃⁻¹(8 ρ(r))) + 4 ρ(r)`; identically zero when `ρ` is.
pub fn phi_gain(rho: &ScalarFn, alpha2: &ScalarFn, alpha3: &ScalarFn) -> Result<ScalarFn, NonlinError> {
    if !alpha2.class().is_k || !alpha3.class().is_k {
        return Err(ComparisonError::NotKFunction.into());
    }
    if rho.is_zero() {
        return Ok(ScalarFn::zero());
    }
    if !rho.class().is_k {
        return Err(ComparisonError::NotKFunction.into());
    }
    let inner = alpha2.clone().after(alpha3.clone().inverse().after(rho.clone().scaled(8.0)));
    Ok(simplify(ScalarFn::Sum { terms: vec![inner.scaled(4.0), rho.clone().scaled(4.0)] }))
}

/// κ for a decrease function. Linear `α₃(r) = k·r` gives the exact closed
/// form `(1 − min(k, 1)/2)·r`; anything else is tabulated on `[0, extent]`.
pub fn kappa_from_decrease(alpha3: &ScalarFn, grid_step: f64, extent: f64) -> Result<ScalarFn, NonlinError> {
    match alpha3.linear_slope() {
        Some(k) if k > 0.0 => Ok(ScalarFn::linear(1.0 - 0.5 * k.min(1.0))),
        _ => Ok(construct_kappa(alpha3, grid_step, extent)?),
    }
}

/// Max-form bounds `β = α₁⁻¹ ∘ κᵗ ∘ α₂` and `β_n(·, τ) = α₁⁻¹ ∘ κ^{τ−1} ∘ φ_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonlinMaxBounds {
    pub kappa: ScalarFn,
    pub beta: KlFn,
    pub beta_w: KlFn,
    pub beta_v: KlFn,
    pub beta_u: KlFn,
    pub beta_y: KlFn,
    pub phi_w: ScalarFn,
    pub phi_v: ScalarFn,
    pub phi_u: ScalarFn,
    pub phi_y: ScalarFn,
}

impl NonlinMaxBounds {
    pub fn family(&self) -> MaxBoundFamily {
        MaxBoundFamily {
            beta: self.beta.clone(),
            gamma: self.beta_w.clone(),
            delta: self.beta_v.clone(),
            epsilon: self.beta_u.clone(),
            phi: self.beta_y.clone(),
        }
    }

    pub fn phis(&self) -> [&ScalarFn; 4] {
        [&self.phi_w, &self.phi_v, &self.phi_u, &self.phi_y]
    }
}

/// Builds the max-form bound family. The channel terms enter one step late
/// because the contraction `V⁺ ≤ max{κ(V), φ_n(·)}` unrolls to
/// `κ^{τ−1}(φ_n(|n_Δ(t − τ)|))`.
pub fn max_bounds(cand: &LyapunovCandidate, grid_step: f64, extent: f64) -> Result<NonlinMaxBounds, NonlinError> {
    cand.validate()?;
    let kappa = kappa_from_decrease(&cand.alpha3, grid_step, extent)?;
    let outer = Some(simplify(cand.alpha1.clone().inverse()));
    let phi = |rho: &ScalarFn| phi_gain(rho, &cand.alpha2, &cand.alpha3);
    let (phi_w, phi_v, phi_u, phi_y) = (phi(&cand.rho_w)?, phi(&cand.rho_v)?, phi(&cand.rho_u)?, phi(&cand.rho_y)?);
    let channel = |gain: &ScalarFn| KlFn::Separable {
        kappa: kappa.clone(),
        gain: gain.clone(),
        outer: outer.clone(),
        delay: 1,
        envelope: None,
    };
    Ok(NonlinMaxBounds {
        beta: KlFn::Separable {
            kappa: kappa.clone(),
            gain: cand.alpha2.clone(),
            outer: outer.clone(),
            delay: 0,
            envelope: None,
        },
        beta_w: channel(&phi_w),
        beta_v: channel(&phi_v),
        beta_u: channel(&phi_u),
        beta_y: channel(&phi_y),
        kappa,
        phi_w,
        phi_v,
        phi_u,
        phi_y,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SumPath {
    /// `α₃(r) ≥ K·r` everywhere: direct induction on `V⁺ ≤ (1 − K)V + Σρ`.
    GlobalLinear,
    /// Local lower bound only: κ iterates with summability envelopes.
    General,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonlinSumBounds {
    pub path: SumPath,
    pub k: f64,
    pub r_bar: f64,
    pub family: SumBoundFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envelope: Option<SummabilityEnvelope>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<ScalarFn>,
}

/// Sum-form bounds for `α₁(|x(t), χ(t)|)`.
///
/// `K` defaults to the slope of a linear `α₃` (capped below 1) and `r̄` to 1.
/// With a global linear lower bound the family is `(1 − K)ᵗ α₂(r)` and
/// `(1 − K)^{τ−1} ρ_n(r)`; otherwise `κᵗ(α₂(r))` and `κ^{τ−1}(φ_n(r))`, each
/// carrying a summability envelope.
pub fn sum_bounds(
    cand: &LyapunovCandidate,
    k: Option<f64>,
    r_bar: Option<f64>,
    grid_step: f64,
    extent: f64,
) -> Result<NonlinSumBounds, NonlinError> {
    cand.validate()?;
    let alpha3 = &cand.alpha3;
    let k = match (k, alpha3.linear_slope()) {
        (Some(k), _) => k,
        (None, Some(s)) => s.min(1.0 - 1e-12),
        (None, None) => {
            return Err(ComparisonError::InvalidParameter("K is required for a non-linear decrease function".into()).into())
        }
    };
    let r_bar = r_bar.unwrap_or(1.0);
    premise_holds(alpha3, k, r_bar)?;

    if linear_lower_bound_holds(alpha3, k) {
        let rate = 1.0 - k;
        let channel = |rho: &ScalarFn| KlFn::Exponential { rate, gain: rho.clone(), delay: 1 };
        return Ok(NonlinSumBounds {
            path: SumPath::GlobalLinear,
            k,
            r_bar,
            family: SumBoundFamily {
                alpha1: cand.alpha1.clone(),
                beta: KlFn::exponential(rate, cand.alpha2.clone()),
                gamma: channel(&cand.rho_w),
                delta: channel(&cand.rho_v),
                epsilon: channel(&cand.rho_u),
                phi: channel(&cand.rho_y),
            },
            envelope: None,
            kappa: None,
        });
    }

    let env = summability_sigma(alpha3, k, r_bar)?;
    let kappa = kappa_from_decrease(alpha3, grid_step, extent)?;
    certify_kappa_envelope(&kappa, &env)?;
    let separable = |gain: ScalarFn, delay: u64| KlFn::Separable {
        kappa: kappa.clone(),
        gain,
        outer: None,
        delay,
        envelope: Some(env.clone()),
    };
    let phi = |rho: &ScalarFn| phi_gain(rho, &cand.alpha2, alpha3);
    Ok(NonlinSumBounds {
        path: SumPath::General,
        k,
        r_bar,
        family: SumBoundFamily {
            alpha1: cand.alpha1.clone(),
            beta: separable(cand.alpha2.clone(), 0),
            gamma: separable(phi(&cand.rho_w)?, 1),
            delta: separable(phi(&cand.rho_v)?, 1),
            epsilon: separable(phi(&cand.rho_u)?, 1),
            phi: separable(phi(&cand.rho_y)?, 1),
        },
        envelope: Some(env),
        kappa: Some(kappa),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn cand(a1: ScalarFn, a2: ScalarFn, a3: ScalarFn, rho: ScalarFn) -> LyapunovCandidate {
        LyapunovCandidate {
            v: Arc::new(|x, c| (x - c).norm()),
            alpha1: a1,
            alpha2: a2,
            alpha3: a3,
            rho_w: rho.clone(),
            rho_v: rho.clone(),
            rho_u: rho.clone(),
            rho_y: rho,
        }
    }

    #[test]
    fn phi_examples() {
        let l = ScalarFn::linear;
        let p = phi_gain(&l(1.0), &l(1.0), &l(0.5)).unwrap();
        assert_eq!(p.eval(1.0).unwrap(), 68.0);
        assert!(phi_gain(&ScalarFn::zero(), &l(1.0), &l(0.5)).unwrap().is_zero());
        let p = phi_gain(&l(0.125), &l(2.0), &l(1.0)).unwrap();
        assert_eq!(p.eval(1.0).unwrap(), 8.5);
    }

    #[test]
    fn phi_with_nonlinear_decrease() {
        let p = phi_gain(&ScalarFn::identity(), &ScalarFn::identity(), &ScalarFn::power(1.0, 2.0)).unwrap();
        // 4·√(8r) + 4r at r = 2
        assert!((p.eval(2.0).unwrap() - 24.0).abs() < 1e-8);
    }

    #[test]
    fn max_bounds_collapse_for_linear_data() {
        let id = ScalarFn::identity();
        let b = max_bounds(&cand(id.clone(), id.clone(), ScalarFn::linear(1.0), id), 0.01, 10.0).unwrap();
        for t in 0..5 {
            assert_eq!(b.beta.eval(3.0, t).unwrap(), 3.0 / 2f64.powi(t as i32));
        }
        let b = max_bounds(
            &cand(ScalarFn::linear(0.5), ScalarFn::linear(2.0), ScalarFn::linear(1.0), ScalarFn::zero()),
            0.01,
            10.0,
        )
        .unwrap();
        for t in 0..5 {
            assert_eq!(b.beta.eval(1.0, t).unwrap(), 4.0 / 2f64.powi(t as i32));
        }
        assert_eq!(b.beta_w.eval(5.0, 3).unwrap(), 0.0);
    }

    #[test]
    fn channel_terms_start_undiscounted() {
        let id = ScalarFn::identity();
        let b = max_bounds(&cand(id.clone(), id.clone(), ScalarFn::linear(0.5), id), 0.01, 10.0).unwrap();
        assert_eq!(b.beta_w.eval(1.0, 1).unwrap(), 68.0);
        assert_eq!(b.beta_w.eval(1.0, 2).unwrap(), 51.0);
    }

    #[test]
    fn global_linear_path() {
        let id = ScalarFn::identity();
        let s = sum_bounds(&cand(id.clone(), id.clone(), ScalarFn::linear(0.5), id), None, None, 0.01, 10.0).unwrap();
        assert_eq!(s.path, SumPath::GlobalLinear);
        assert_eq!(s.family.beta.eval(1.0, 3).unwrap(), 0.125);
        assert_eq!(s.family.gamma.eval(1.0, 1).unwrap(), 1.0);
        assert_eq!(s.family.gamma.eval(1.0, 3).unwrap(), 0.25);
        let classical = crate::comparison::kl_to_classical(&s.family.beta).unwrap();
        assert_eq!(classical.eval(1.0).unwrap(), 2.0);
    }

    #[test]
    fn general_path_for_saturating_decrease() {
        let a3 = ScalarFn::table(&[[0.0, 0.0], [1.0, 0.5], [50.0, 1.0]]).unwrap();
        let id = ScalarFn::Linear { slope: 1.0, domain_cap: 50.0 };
        let rho = ScalarFn::Linear { slope: 0.01, domain_cap: 50.0 };
        let s = sum_bounds(&cand(id.clone(), id, a3, rho), Some(0.5), Some(1.0), 0.01, 50.0).unwrap();
        assert_eq!(s.path, SumPath::General);
        assert!(s.envelope.is_some());
        let b0 = s.family.beta.eval(4.0, 0).unwrap();
        assert_eq!(b0, 4.0);
        assert!(s.family.beta.eval(4.0, 10).unwrap() < b0);
    }

    #[test]
    fn premise_failure_propagates() {
        let id = ScalarFn::identity();
        let err = sum_bounds(&cand(id.clone(), id.clone(), ScalarFn::power(1.0, 2.0), id), Some(0.5), Some(1.0), 0.01, 10.0)
            .unwrap_err();
        assert!(matches!(err, NonlinError::Comparison(ComparisonError::PremiseViolated { .. })));
    }
}
