//! Built-in demo systems and random system generators.

use std::ops::RangeInclusive;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::comparison::ScalarFn;
use crate::linear::{pbh_detectable, spectral_radius, LinearSystem};
use crate::nonlinear::{LyapunovCandidate, NonlinSystem};
use crate::system::Dims;

pub const LINEAR_BUILTINS: [&str; 3] = ["scalar_demo", "undetectable_demo", "unstable_detectable"];
pub const NONLINEAR_BUILTINS: [&str; 2] = ["sine_contraction", "output_injection_scalar"];

const SCALAR: Dims = Dims { n_x: 1, n_u: 1, n_w: 1, n_v: 1, n_y: 1 };

/// `x⁺ = 0.5x + u + w`, `y = x + v`.
pub fn scalar_demo() -> LinearSystem {
    LinearSystem::from_slices(SCALAR, &[0.5], &[1.0], &[1.0], &[0.0], &[1.0], &[1.0]).expect("valid shapes")
}

/// `A = diag(1.1, 0.5)` observed only through the stable mode.
pub fn undetectable_demo() -> LinearSystem {
    let d = Dims { n_x: 2, n_u: 1, n_w: 2, n_v: 1, n_y: 1 };
    LinearSystem::from_slices(d, &[1.1, 0.0, 0.0, 0.5], &[1.0, 1.0], &[0.0, 1.0], &[0.0], &[1.0, 0.0, 0.0, 1.0], &[1.0])
        .expect("valid shapes")
}

/// `x⁺ = 2x + u + w`, `y = x + v`: unstable but detectable.
pub fn unstable_detectable() -> LinearSystem {
    LinearSystem::from_slices(SCALAR, &[2.0], &[1.0], &[1.0], &[0.0], &[1.0], &[1.0]).expect("valid shapes")
}

pub fn linear_builtin(name: &str) -> Option<LinearSystem> {
    match name {
        "scalar_demo" => Some(scalar_demo()),
        "undetectable_demo" => Some(undetectable_demo()),
        "unstable_detectable" => Some(unstable_detectable()),
        _ => None,
    }
}

fn distance() -> Arc<dyn Fn(&DVector<f64>, &DVector<f64>) -> f64 + Send + Sync> {
    Arc::new(|x, c| (x - c).norm())
}

/// `x⁺ = 0.5 sin x + u + w`, `y = x + v` with `V = |x − χ|`:
/// `V⁺ ≤ V − V/2 + |w_Δ| + |u_Δ|`.
pub fn sine_contraction() -> (NonlinSystem, LyapunovCandidate) {
    let sys = NonlinSystem::new(
        "sine_contraction",
        SCALAR,
        Arc::new(|x, u, w| DVector::from_element(1, 0.5 * x[0].sin() + u[0] + w[0])),
        Arc::new(|x, _u, v| DVector::from_element(1, x[0] + v[0])),
    );
    let cand = LyapunovCandidate {
        v: distance(),
        alpha1: ScalarFn::identity(),
        alpha2: ScalarFn::identity(),
        alpha3: ScalarFn::linear(0.5),
        rho_w: ScalarFn::identity(),
        rho_v: ScalarFn::zero(),
        rho_u: ScalarFn::identity(),
        rho_y: ScalarFn::zero(),
    };
    (sys, cand)
}

/// `x⁺ = 1.2x + 0.1 sin x + u + w`, `y = x + v`: open-loop unstable, with
/// the decrease supplied by the output channel.
///
/// Writing `x_Δ = y_Δ − v_Δ` gives
/// `V⁺ ≤ 0.1V + 1.3|y_Δ| + 1.3|v_Δ| + |u_Δ| + |w_Δ|` for `V = |x − χ|`.
pub fn output_injection_scalar() -> (NonlinSystem, LyapunovCandidate) {
    let sys = NonlinSystem::new(
        "output_injection_scalar",
        SCALAR,
        Arc::new(|x, u, w| DVector::from_element(1, 1.2 * x[0] + 0.1 * x[0].sin() + u[0] + w[0])),
        Arc::new(|x, _u, v| DVector::from_element(1, x[0] + v[0])),
    );
    let cand = LyapunovCandidate {
        v: distance(),
        alpha1: ScalarFn::identity(),
        alpha2: ScalarFn::identity(),
        alpha3: ScalarFn::linear(0.9),
        rho_w: ScalarFn::identity(),
        rho_v: ScalarFn::linear(1.3),
        rho_u: ScalarFn::identity(),
        rho_y: ScalarFn::linear(1.3),
    };
    (sys, cand)
}

pub fn nonlinear_builtin(name: &str) -> Option<(NonlinSystem, LyapunovCandidate)> {
    match name {
        "sine_contraction" => Some(sine_contraction()),
        "output_injection_scalar" => Some(output_injection_scalar()),
        _ => None,
    }
}

fn uniform_matrix(rng: &mut impl Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..=1.0))
}

/// `n × n` matrix with entries in `[−1, 1]` rescaled to spectral radius `radius`.
pub fn random_with_radius(rng: &mut impl Rng, n: usize, radius: f64) -> DMatrix<f64> {
    loop {
        let m = uniform_matrix(rng, n, n);
        let rho = spectral_radius(&m);
        if rho > 1e-3 {
            return m * (radius / rho);
        }
    }
}

/// Random detectable system with `n_x ≤ max_nx`, up to three inputs,
/// disturbances and outputs, and `A` of spectral radius in `[0.3, 1.3]`.
pub fn random_detectable(rng: &mut impl Rng, max_nx: usize) -> LinearSystem {
    random_detectable_within(rng, max_nx, 0.3..=1.3)
}

/// As [`random_detectable`] with the spectral radius of `A` drawn from `radius`.
///
/// Long simulations need a modest upper end: both trajectories of an unstable
/// `A` grow like `ρᵗ`, and their difference is lost to cancellation.
pub fn random_detectable_within(rng: &mut impl Rng, max_nx: usize, radius: RangeInclusive<f64>) -> LinearSystem {
    loop {
        let n_x = rng.random_range(1..=max_nx);
        let n_u = rng.random_range(1..=3);
        let n_w = rng.random_range(1..=3);
        let n_y = rng.random_range(1..=3);
        let rho = rng.random_range(radius.clone());
        let a = random_with_radius(rng, n_x, rho);
        let c = uniform_matrix(rng, n_y, n_x);
        if !pbh_detectable(&a, &c, 1e-9) {
            continue;
        }
        let sys = LinearSystem::new(
            a,
            uniform_matrix(rng, n_x, n_u),
            c,
            uniform_matrix(rng, n_y, n_u),
            uniform_matrix(rng, n_x, n_w),
            uniform_matrix(rng, n_y, n_y),
        );
        if let Ok(s) = sys {
            return s;
        }
    }
}

/// Random detectable system with `E = B`, `F = I`, `D = 0`.
pub fn random_collapsing(rng: &mut impl Rng, max_nx: usize) -> LinearSystem {
    let s = random_detectable(rng, max_nx);
    let (n_y, n_u) = (s.c.nrows(), s.b.ncols());
    LinearSystem::new(s.a, s.b.clone(), s.c, DMatrix::zeros(n_y, n_u), s.b, DMatrix::identity(n_y, n_y))
        .expect("shapes inherited from a valid system")
}
