use serde::{Deserialize, Serialize};

use super::{threshold, DifferenceTrace, VerifyError};
use crate::comparison::{ComparisonError, KlFn, MaxBoundFamily, SumBoundFamily};

/// Per-t comparison of an estimate against a trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    /// `"max"` or `"sum"`.
    pub form: String,
    pub tol: f64,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    /// `rhs − lhs`
    pub margin: Vec<f64>,
    pub min_margin: f64,
    /// Number of `t` with `margin < −max(tol·|rhs|, 1e−12)`.
    pub violations: usize,
}

impl VerificationReport {
    fn new(form: &str, tol: f64, lhs: Vec<f64>, rhs: Vec<f64>) -> Self {
        let margin: Vec<f64> = rhs.iter().zip(&lhs).map(|(r, l)| r - l).collect();
        let violations = margin.iter().zip(&rhs).filter(|(m, r)| **m < -threshold(tol, **r)).count();
        let min_margin = margin.iter().copied().fold(f64::INFINITY, f64::min);
        Self { form: form.into(), tol, lhs, rhs, margin, min_margin, violations }
    }

    pub fn pass(&self) -> bool {
        self.violations == 0
    }

    /// Writes `t, lhs, rhs, margin` rows.
    pub fn csv_rows(&self) -> impl Iterator<Item = [String; 4]> + '_ {
        (0..self.lhs.len()).map(move |t| {
            [t.to_string(), self.lhs[t].to_string(), self.rhs[t].to_string(), self.margin[t].to_string()]
        })
    }
}

/// A KL function prepared for repeated evaluation over `t ≤ horizon`.
enum Prepared<'a> {
    Slopes(Vec<f64>),
    General(&'a KlFn),
}

impl<'a> Prepared<'a> {
    fn new(f: &'a KlFn, horizon: u64) -> Self {
        match f.linear_slopes(horizon) {
            Some(s) => Prepared::Slopes(s),
            None => Prepared::General(f),
        }
    }

    fn eval(&self, r: f64, t: u64) -> Result<f64, ComparisonError> {
        match self {
            Prepared::Slopes(s) => Ok(s[t as usize] * r),
            Prepared::General(f) => f.eval(r, t),
        }
    }
}

fn check_trace(trace: &DifferenceTrace) -> Result<u64, VerifyError> {
    let horizon = trace.horizon();
    if horizon == 0 {
        return Err(VerifyError::ZeroHorizon);
    }
    if trace.channels.iter().any(|c| c.len() as u64 != horizon) {
        return Err(VerifyError::Dimension("channel traces must have one entry per step".into()));
    }
    Ok(horizon)
}

/// `|x(t), χ(t)| ≤ max{β(|x₀, χ₀|, t), max_{1≤τ≤t} max_n β_n(|n_Δ(t − τ)|, τ)}`
///
/// At `t = 0` the inner maximum is empty and only `β` applies.
pub fn eval_max_bound(trace: &DifferenceTrace, family: &MaxBoundFamily, tol: f64) -> Result<VerificationReport, VerifyError> {
    let horizon = check_trace(trace)?;
    let beta = Prepared::new(&family.beta, horizon);
    let channels = family.channels().map(|c| Prepared::new(c, horizon));
    let e0 = trace.state[0];
    let mut rhs = Vec::with_capacity(horizon as usize + 1);
    for t in 0..=horizon {
        let mut r = beta.eval(e0, t)?;
        for tau in 1..=t {
            let at = (t - tau) as usize;
            for (f, d) in channels.iter().zip(&trace.channels) {
                r = r.max(f.eval(d[at], tau)?);
            }
        }
        rhs.push(r);
    }
    Ok(VerificationReport::new("max", tol, trace.state.clone(), rhs))
}

/// `α₁(|x(t), χ(t)|) ≤ β(|x₀, χ₀|, t) + Σ_{τ=1}^{t} Σ_n β_n(|n_Δ(t − τ)|, τ)`
pub fn eval_sum_bound(trace: &DifferenceTrace, family: &SumBoundFamily, tol: f64) -> Result<VerificationReport, VerifyError> {
    let horizon = check_trace(trace)?;
    let beta = Prepared::new(&family.beta, horizon);
    let channels = family.channels().map(|c| Prepared::new(c, horizon));
    let e0 = trace.state[0];
    let lhs = trace.state.iter().map(|d| family.alpha1.eval(*d)).collect::<Result<Vec<_>, _>>()?;
    let mut rhs = Vec::with_capacity(horizon as usize + 1);
    for t in 0..=horizon {
        let mut r = beta.eval(e0, t)?;
        for tau in 1..=t {
            let at = (t - tau) as usize;
            for (f, d) in channels.iter().zip(&trace.channels) {
                r += f.eval(d[at], tau)?;
            }
        }
        rhs.push(r);
    }
    Ok(VerificationReport::new("sum", tol, lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comparison::ScalarFn;
    use crate::verifier::DEFAULT_TOL;

    fn family_with(beta: KlFn, channels: [KlFn; 4]) -> MaxBoundFamily {
        let [gamma, delta, epsilon, phi] = channels;
        MaxBoundFamily { beta, gamma, delta, epsilon, phi }
    }

    #[test]
    fn hand_unrolled_t3() {
        // Distinct slope tables per channel make every (n, τ) pairing visible.
        let slopes = |base: f64| KlFn::Slopes { slopes: vec![base, base, base / 10.0, base / 100.0], tail_rate: 0.0 };
        let fam = family_with(slopes(1.0), [slopes(2.0), slopes(3.0), slopes(5.0), slopes(7.0)]);
        let trace = DifferenceTrace {
            state: vec![1.0, 0.0, 0.0, 0.0],
            channels: [vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 0.0]],
        };
        let rep = eval_max_bound(&trace, &fam, DEFAULT_TOL).unwrap();
        // t = 3: τ=1 → u_Δ(2)·5; τ=2 → v_Δ(1)·0.3; τ=3 → w_Δ(0)·0.02; β(1, 3) = 0.01.
        assert_eq!(rep.rhs[3], 5.0);
        // t = 0: β only.
        assert_eq!(rep.rhs[0], 1.0);
        let sum = SumBoundFamily {
            alpha1: ScalarFn::identity(),
            beta: fam.beta.clone(),
            gamma: fam.gamma.clone(),
            delta: fam.delta.clone(),
            epsilon: fam.epsilon.clone(),
            phi: fam.phi.clone(),
        };
        let rep = eval_sum_bound(&trace, &sum, DEFAULT_TOL).unwrap();
        assert!((rep.rhs[3] - (0.01 + 5.0 + 0.3 + 0.02)).abs() < 1e-15);
    }

    #[test]
    fn violation_counting() {
        let fam = family_with(KlFn::exponential(0.5, ScalarFn::identity()), [KlFn::zero(), KlFn::zero(), KlFn::zero(), KlFn::zero()]);
        let trace = DifferenceTrace { state: vec![1.0, 0.5, 0.3], channels: [vec![0.0; 2], vec![0.0; 2], vec![0.0; 2], vec![0.0; 2]] };
        let rep = eval_max_bound(&trace, &fam, DEFAULT_TOL).unwrap();
        assert_eq!(rep.violations, 1);
        assert_eq!(rep.margin[1], 0.0);
        assert!((rep.min_margin + 0.05).abs() < 1e-15);
        let zero = DifferenceTrace { state: vec![0.0; 3], channels: [vec![0.0; 2], vec![0.0; 2], vec![0.0; 2], vec![0.0; 2]] };
        let rep = eval_max_bound(&zero, &fam, DEFAULT_TOL).unwrap();
        assert!(rep.pass());
        assert_eq!(rep.min_margin, 0.0);
    }
}
