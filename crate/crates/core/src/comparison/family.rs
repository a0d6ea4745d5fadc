use serde::{Deserialize, Serialize};

use super::{KlFn, ScalarFn};

/// The five KL functions of a max-form estimate. Channels are ordered
/// process disturbance, measurement noise, input, output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxBoundFamily {
    pub beta: KlFn,
    pub gamma: KlFn,
    pub delta: KlFn,
    pub epsilon: KlFn,
    pub phi: KlFn,
}

impl MaxBoundFamily {
    pub fn channels(&self) -> [&KlFn; 4] {
        [&self.gamma, &self.delta, &self.epsilon, &self.phi]
    }
}

/// A sum-form estimate: `α₁(|x − χ|) ≤ β + Σ (γ + δ + ε + φ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SumBoundFamily {
    pub alpha1: ScalarFn,
    pub beta: KlFn,
    pub gamma: KlFn,
    pub delta: KlFn,
    pub epsilon: KlFn,
    pub phi: KlFn,
}

impl SumBoundFamily {
    pub fn channels(&self) -> [&KlFn; 4] {
        [&self.gamma, &self.delta, &self.epsilon, &self.phi]
    }
}
