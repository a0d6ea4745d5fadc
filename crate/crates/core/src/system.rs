use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Dimensions of the state, input, process-disturbance, output-disturbance
/// and output spaces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub n_x: usize,
    pub n_u: usize,
    pub n_w: usize,
    pub n_v: usize,
    pub n_y: usize,
}

/// A discrete-time system `x(t+1) = f(x, u, w)`, `y(t) = h(x, u, v)`.
pub trait Dynamics: Send + Sync {
    fn dims(&self) -> Dims;

    /// State update `f(x, u, w)`.
    fn step(&self, x: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>) -> DVector<f64>;

    /// Output map `h(x, u, v)`.
    fn output(&self, x: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64>;

    /// Box on which `f` and `h` are declared total. `None` means all of ℝⁿ.
    fn state_box(&self) -> Option<&BoxDomain> {
        None
    }

    /// Metric on the state space. Euclidean unless overridden.
    fn state_distance(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        (a - b).norm()
    }
}

/// Axis-aligned box `[lo, hi]` in ℝⁿ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, String> {
        if lo.len() != hi.len() {
            return Err(format!("box bounds have lengths {} and {}", lo.len(), hi.len()));
        }
        if let Some(i) = (0..lo.len()).find(|&i| !(lo[i] <= hi[i])) {
            return Err(format!("box bounds unordered in coordinate {i}: {} > {}", lo[i], hi[i]));
        }
        Ok(Self { lo, hi })
    }

    /// `[-radius, radius]^dim`.
    pub fn symmetric(dim: usize, radius: f64) -> Self {
        Self { lo: vec![-radius; dim], hi: vec![radius; dim] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        x.len() == self.dim()
            && x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| *l <= *v && *v <= *h)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            self.lo.iter().zip(&self.hi).map(|(&l, &h)| if l == h { l } else { rng.random_range(l..=h) }),
        )
    }
}
