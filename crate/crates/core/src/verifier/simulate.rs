use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{SignalSpec, VerifyError};
use crate::rng::channel;
use crate::system::Dynamics;

/// Signal specifications for both trajectories of a pair.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PairSignals {
    #[serde(default)]
    pub u: SignalSpec,
    #[serde(default)]
    pub upsilon: SignalSpec,
    #[serde(default)]
    pub w: SignalSpec,
    #[serde(default)]
    pub omega: SignalSpec,
    #[serde(default)]
    pub v: SignalSpec,
    #[serde(default)]
    pub nu: SignalSpec,
}

/// Two solutions `(x, u, w, v, y)` and `(χ, υ, ω, ν, ζ)` over `t = 0..T`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryPair {
    pub horizon: u64,
    pub x: Vec<DVector<f64>>,
    pub chi: Vec<DVector<f64>>,
    pub u: Vec<DVector<f64>>,
    pub upsilon: Vec<DVector<f64>>,
    pub w: Vec<DVector<f64>>,
    pub omega: Vec<DVector<f64>>,
    pub v: Vec<DVector<f64>>,
    pub nu: Vec<DVector<f64>>,
    pub y: Vec<DVector<f64>>,
    pub zeta: Vec<DVector<f64>>,
}

/// Distances along a pair: `state[t]` for `t = 0..=T` and, per channel
/// `(w, v, u, y)`, the difference norm at `t = 0..T−1`.
#[derive(Clone, Debug, PartialEq)]
pub struct DifferenceTrace {
    pub state: Vec<f64>,
    pub channels: [Vec<f64>; 4],
}

impl DifferenceTrace {
    pub fn horizon(&self) -> u64 {
        self.state.len() as u64 - 1
    }
}

fn diffs(a: &[DVector<f64>], b: &[DVector<f64>]) -> Vec<f64> {
    a.iter().zip(b).map(|(p, q)| (p - q).norm()).collect()
}

pub(crate) fn check_dim(v: &DVector<f64>, n: usize, what: &str) -> Result<(), VerifyError> {
    if v.len() == n {
        Ok(())
    } else {
        Err(VerifyError::Dimension(format!("{what} has dimension {}, expected {n}", v.len())))
    }
}

/// Rejects non-finite states and states outside the declared box.
pub(crate) fn check_state(sys: &dyn Dynamics, x: &DVector<f64>, t: u64, what: &str) -> Result<(), VerifyError> {
    if !x.iter().all(|v| v.is_finite()) {
        return Err(VerifyError::EvaluationFailure { t, detail: format!("{what} is not finite") });
    }
    if let Some(b) = sys.state_box() {
        if !b.contains(x) {
            return Err(VerifyError::EvaluationFailure { t, detail: format!("{what} left the declared state box") });
        }
    }
    Ok(())
}

impl TrajectoryPair {
    pub fn trace(&self, sys: &dyn Dynamics) -> DifferenceTrace {
        DifferenceTrace {
            state: self.x.iter().zip(&self.chi).map(|(a, b)| sys.state_distance(a, b)).collect(),
            channels: [
                diffs(&self.w, &self.omega),
                diffs(&self.v, &self.nu),
                diffs(&self.u, &self.upsilon),
                diffs(&self.y, &self.zeta),
            ],
        }
    }

    /// Largest relative residual of the recursions under re-evaluation.
    pub fn solution_residual(&self, sys: &dyn Dynamics) -> f64 {
        let rel = |a: &DVector<f64>, b: &DVector<f64>| (a - b).norm() / b.norm().max(1.0);
        let mut worst = 0.0f64;
        for t in 0..self.horizon as usize {
            worst = worst
                .max(rel(&sys.step(&self.x[t], &self.u[t], &self.w[t]), &self.x[t + 1]))
                .max(rel(&sys.step(&self.chi[t], &self.upsilon[t], &self.omega[t]), &self.chi[t + 1]))
                .max(rel(&sys.output(&self.x[t], &self.u[t], &self.v[t]), &self.y[t]))
                .max(rel(&sys.output(&self.chi[t], &self.upsilon[t], &self.nu[t]), &self.zeta[t]));
        }
        worst
    }
}

/// Rolls both recursions forward for `horizon` steps.
///
/// Signals are realised from `(seed, trial, channel)` streams, so the result
/// does not depend on the calling thread.
pub fn simulate_pair(
    sys: &dyn Dynamics,
    x0: &DVector<f64>,
    chi0: &DVector<f64>,
    signals: &PairSignals,
    horizon: u64,
    seed: u64,
    trial: u64,
) -> Result<TrajectoryPair, VerifyError> {
    if horizon == 0 {
        return Err(VerifyError::ZeroHorizon);
    }
    let d = sys.dims();
    check_dim(x0, d.n_x, "x0")?;
    check_dim(chi0, d.n_x, "chi0")?;
    let sig = |s: &SignalSpec, dim, ch| s.realize(dim, horizon, seed, trial, ch);
    let u = sig(&signals.u, d.n_u, channel::U)?;
    let upsilon = sig(&signals.upsilon, d.n_u, channel::UPSILON)?;
    let w = sig(&signals.w, d.n_w, channel::W)?;
    let omega = sig(&signals.omega, d.n_w, channel::OMEGA)?;
    let v = sig(&signals.v, d.n_v, channel::V)?;
    let nu = sig(&signals.nu, d.n_v, channel::NU)?;

    let n = horizon as usize;
    let (mut x, mut chi) = (Vec::with_capacity(n + 1), Vec::with_capacity(n + 1));
    let (mut y, mut zeta) = (Vec::with_capacity(n), Vec::with_capacity(n));
    x.push(x0.clone());
    chi.push(chi0.clone());
    check_state(sys, x0, 0, "x")?;
    check_state(sys, chi0, 0, "chi")?;
    for t in 0..n {
        y.push(sys.output(&x[t], &u[t], &v[t]));
        zeta.push(sys.output(&chi[t], &upsilon[t], &nu[t]));
        let x1 = sys.step(&x[t], &u[t], &w[t]);
        let chi1 = sys.step(&chi[t], &upsilon[t], &omega[t]);
        check_state(sys, &x1, t as u64 + 1, "x")?;
        check_state(sys, &chi1, t as u64 + 1, "chi")?;
        x.push(x1);
        chi.push(chi1);
    }
    Ok(TrajectoryPair { horizon, x, chi, u, upsilon, w, omega, v, nu, y, zeta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::LinearSystem;
    use crate::nonlinear::NonlinSystem;
    use crate::system::{BoxDomain, Dims};

    fn scalar() -> LinearSystem {
        let d = Dims { n_x: 1, n_u: 1, n_w: 1, n_v: 1, n_y: 1 };
        LinearSystem::from_slices(d, &[0.5], &[1.0], &[1.0], &[0.0], &[1.0], &[1.0]).unwrap()
    }

    #[test]
    fn geometric_decay_and_identical_pairs() {
        let sys = scalar();
        let p = simulate_pair(&sys, &DVector::from_element(1, 1.0), &DVector::zeros(1), &PairSignals::default(), 10, 0, 0)
            .unwrap();
        for t in 0..=10 {
            assert_eq!(p.x[t][0], 0.5f64.powi(t as i32));
            assert_eq!(p.chi[t][0], 0.0);
        }
        let box_sig = SignalSpec::SeededUniformBox { lo: vec![-1.0], hi: vec![1.0], seed: None };
        let same = PairSignals { u: box_sig.clone(), upsilon: box_sig, ..Default::default() };
        let x0 = DVector::from_element(1, 0.3);
        let q = simulate_pair(&sys, &x0, &x0, &same, 20, 1, 0).unwrap();
        // u and υ come from different channels, so they differ.
        assert_ne!(q.u, q.upsilon);
        let shared = PairSignals { u: SignalSpec::Constant { value: vec![0.7] }, upsilon: SignalSpec::Constant { value: vec![0.7] }, ..Default::default() };
        let r = simulate_pair(&sys, &x0, &x0, &shared, 20, 1, 0).unwrap();
        assert_eq!(r.x, r.chi);
        assert!(r.solution_residual(&sys) <= 1e-12);
        assert!(r.trace(&sys).state.iter().all(|d| *d == 0.0));
    }

    #[test]
    fn input_step_difference_follows_powers_of_a() {
        let sys = scalar();
        let s = PairSignals { u: SignalSpec::impulse(vec![1.0]), ..Default::default() };
        let p = simulate_pair(&sys, &DVector::zeros(1), &DVector::zeros(1), &s, 6, 0, 0).unwrap();
        for t in 1..=6 {
            assert_eq!(p.x[t][0] - p.chi[t][0], 0.5f64.powi(t as i32 - 1));
        }
    }

    #[test]
    fn leaving_the_box_fails() {
        let sys = NonlinSystem::from_linear(scalar()).with_state_box(BoxDomain::symmetric(1, 1.0));
        let s = PairSignals { w: SignalSpec::Constant { value: vec![5.0] }, ..Default::default() };
        let e = simulate_pair(&sys, &DVector::zeros(1), &DVector::zeros(1), &s, 5, 0, 0).unwrap_err();
        assert!(matches!(e, VerifyError::EvaluationFailure { t: 1, .. }));
        assert_eq!(
            simulate_pair(&sys, &DVector::zeros(1), &DVector::zeros(1), &PairSignals::default(), 0, 0, 0),
            Err(VerifyError::ZeroHorizon)
        );
    }
}
