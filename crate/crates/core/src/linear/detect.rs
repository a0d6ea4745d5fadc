use nalgebra::{Complex, DMatrix};

use super::linalg::eigenvalues;

/// Outcome of the PBH detectability test.
#[derive(Clone, Debug, PartialEq)]
pub struct PbhReport {
    pub detectable: bool,
    /// Eigenvalues with `|λ| ≥ 1 − tol` whose stacked matrix `[λI − A; C]`
    /// loses column rank.
    pub unobservable: Vec<Complex<f64>>,
}

/// PBH test: every eigenvalue of `A` with `|λ| ≥ 1 − tol` must leave
/// `[λI − A; C]` with full column rank (singular values above `tol·σ_max`).
pub fn pbh_test(a: &DMatrix<f64>, c: &DMatrix<f64>, tol: f64) -> PbhReport {
    let n = a.nrows();
    let mut unobservable = Vec::new();
    for lambda in eigenvalues(a) {
        if lambda.norm() < 1.0 - tol {
            continue;
        }
        let stacked = DMatrix::<Complex<f64>>::from_fn(n + c.nrows(), n, |i, j| {
            if i < n {
                let diag = if i == j { lambda } else { Complex::new(0.0, 0.0) };
                diag - Complex::new(a[(i, j)], 0.0)
            } else {
                Complex::new(c[(i - n, j)], 0.0)
            }
        });
        let sv = stacked.singular_values();
        let largest = sv.iter().copied().fold(0.0, f64::max);
        let rank = sv.iter().filter(|&&s| s > tol * largest).count();
        if rank < n {
            unobservable.push(lambda);
        }
    }
    PbhReport { detectable: unobservable.is_empty(), unobservable }
}

pub fn pbh_detectable(a: &DMatrix<f64>, c: &DMatrix<f64>, tol: f64) -> bool {
    pbh_test(a, c, tol).detectable
}
