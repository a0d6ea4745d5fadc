use nalgebra::DMatrix;

use super::detect::pbh_test;
use super::linalg::spectral_radius;
use super::{CertError, LinearSystem};

/// PBH tolerance used by the gain synthesis.
const PBH_TOL: f64 = 1e-9;

/// Output-injection gain from the filter Riccati recursion with unit weights:
///
/// ```text
/// S ← A S Aᵀ − A S Cᵀ (C S Cᵀ + I)⁻¹ C S Aᵀ + I,   S₀ = I,
/// L = −A S Cᵀ (C S Cᵀ + I)⁻¹.
/// ```
///
/// Iteration stops once `‖ΔS‖_F ≤ tol·(1 + ‖S‖_F)`. The spectral radius of
/// `A + LC` is checked afterwards.
pub fn synthesize_observer_gain(sys: &LinearSystem, max_iter: usize, tol: f64) -> Result<DMatrix<f64>, CertError> {
    let (a, c) = (&sys.a, &sys.c);
    let report = pbh_test(a, c, PBH_TOL);
    if !report.detectable {
        return Err(CertError::NotDetectable { eigenvalues: report.unobservable.iter().map(|z| (z.re, z.im)).collect() });
    }
    let n_x = a.nrows();
    let n_y = c.nrows();
    let eye_y = DMatrix::<f64>::identity(n_y, n_y);
    let eye_x = DMatrix::<f64>::identity(n_x, n_x);

    let gain_of = |s: &DMatrix<f64>| -> Result<DMatrix<f64>, CertError> {
        let m = c * s * c.transpose() + &eye_y;
        let m_inv = m.try_inverse().ok_or(CertError::SingularSystem)?;
        Ok(a * s * c.transpose() * m_inv)
    };

    let mut s = eye_x.clone();
    let mut step = f64::INFINITY;
    let mut converged = false;
    for _ in 0..max_iter {
        let g = gain_of(&s)?;
        let next = a * &s * a.transpose() - &g * c * &s * a.transpose() + &eye_x;
        let next = (&next + next.transpose()) * 0.5;
        step = (&next - &s).norm();
        s = next;
        if step <= tol * (1.0 + s.norm()) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(CertError::NoConvergence { iterations: max_iter, last_step: step });
    }
    let l = -gain_of(&s)?;
    let radius = spectral_radius(&sys.a_l(&l));
    if !(radius < 1.0) {
        return Err(CertError::StabilityCheckFailed { radius });
    }
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::Dims;

    fn scalar(a: f64, c: f64) -> LinearSystem {
        let dims = Dims { n_x: 1, n_u: 1, n_w: 1, n_v: 1, n_y: 1 };
        LinearSystem::from_slices(dims, &[a], &[1.0], &[c], &[0.0], &[1.0], &[1.0]).unwrap()
    }

    #[test]
    fn stable_scalar() {
        let l = synthesize_observer_gain(&scalar(0.5, 1.0), 10_000, 1e-12).unwrap();
        assert!((0.5 + l[(0, 0)]).abs() < 1.0);
    }

    #[test]
    fn unstable_scalar() {
        let l = synthesize_observer_gain(&scalar(2.0, 1.0), 10_000, 1e-12).unwrap();
        assert!((2.0 + l[(0, 0)]).abs() < 1.0);
    }

    #[test]
    fn unobservable_mode_untouched() {
        let dims = Dims { n_x: 2, n_u: 1, n_w: 1, n_v: 1, n_y: 1 };
        let sys = LinearSystem::from_slices(dims, &[1.1, 0.0, 0.0, 0.5], &[1.0, 0.0], &[1.0, 0.0], &[0.0], &[1.0, 1.0], &[1.0])
            .unwrap();
        let l = synthesize_observer_gain(&sys, 10_000, 1e-12).unwrap();
        let a_l = sys.a_l(&l);
        assert!(spectral_radius(&a_l) < 1.0);
        assert_eq!(a_l[(1, 1)], 0.5);
    }

    #[test]
    fn zero_output_map_gives_zero_gain() {
        let l = synthesize_observer_gain(&scalar(0.5, 0.0), 10_000, 1e-12).unwrap();
        assert_eq!(l[(0, 0)], 0.0);
    }

    #[test]
    fn undetectable_reports_eigenvalue() {
        let dims = Dims { n_x: 2, n_u: 1, n_w: 1, n_v: 1, n_y: 1 };
        let sys = LinearSystem::from_slices(dims, &[1.1, 0.0, 0.0, 0.5], &[1.0, 0.0], &[0.0, 1.0], &[0.0], &[1.0, 1.0], &[1.0])
            .unwrap();
        match synthesize_observer_gain(&sys, 100, 1e-12) {
            Err(CertError::NotDetectable { eigenvalues }) => assert!((eigenvalues[0].0 - 1.1).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }
}
