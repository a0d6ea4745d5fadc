use nalgebra::{Complex, DMatrix, DVector};

use super::CertError;

const MAX_SWEEPS: usize = 64;

/// Eigen-decomposition `M = V Λ Vᵀ` of a symmetric matrix.
#[derive(Clone, Debug)]
pub struct SymEigen {
    /// Eigenvalues in ascending order.
    pub values: DVector<f64>,
    /// Orthonormal eigenvectors, one per column, matching `values`.
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `V f(Λ) Vᵀ`
    pub fn map(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let d = DMatrix::from_diagonal(&self.values.map(f));
        &self.vectors * d * self.vectors.transpose()
    }
}

pub fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.norm()
}

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix.
///
/// Fails with `NotSymmetric` when `‖M − Mᵀ‖_F > tol·‖M‖_F`; the symmetric
/// part is decomposed otherwise.
pub fn sym_eig(m: &DMatrix<f64>, tol: f64) -> Result<SymEigen, CertError> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(CertError::Dimension(format!("eigen-decomposition of a {}×{} matrix", n, m.ncols())));
    }
    let scale = m.norm();
    let asym = (m - m.transpose()).norm();
    if asym > tol * scale {
        return Err(CertError::NotSymmetric { asym });
    }
    let mut a = (m + m.transpose()) * 0.5;
    let mut v = DMatrix::<f64>::identity(n, n);
    let floor = f64::EPSILON * 1e-3 * scale;

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= floor || apq == 0.0 {
                    continue;
                }
                rotated = true;
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate_columns(&mut a, p, q, c, s);
                rotate_rows(&mut a, p, q, c, s);
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                rotate_columns(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| a[(i, i)]));
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(SymEigen { values, vectors })
}

fn rotate_columns(m: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    for k in 0..m.nrows() {
        let (mp, mq) = (m[(k, p)], m[(k, q)]);
        m[(k, p)] = c * mp - s * mq;
        m[(k, q)] = s * mp + c * mq;
    }
}

fn rotate_rows(m: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    for k in 0..m.ncols() {
        let (mp, mq) = (m[(p, k)], m[(q, k)]);
        m[(p, k)] = c * mp - s * mq;
        m[(q, k)] = s * mp + c * mq;
    }
}

/// `(P^{1/2}, P^{-1/2})` for symmetric positive definite `P`.
pub fn spd_sqrt(p: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>), CertError> {
    let eig = sym_eig(p, 1e-12)?;
    let min_eig = eig.min();
    if !(min_eig > 0.0) && p.nrows() > 0 {
        return Err(CertError::NotPositiveDefinite { min_eig });
    }
    Ok((eig.map(f64::sqrt), eig.map(|l| 1.0 / l.sqrt())))
}

/// Largest singular value, `√λ_max(MᵀM)`. Zero for empty matrices.
pub fn sigma_max(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let g = m.transpose() * m;
    let g = (&g + g.transpose()) * 0.5;
    sym_eig(&g, 1e-12).expect("Gram matrix is symmetric").max().max(0.0).sqrt()
}

pub fn eigenvalues(a: &DMatrix<f64>) -> Vec<Complex<f64>> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    a.complex_eigenvalues().iter().copied().collect()
}

pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    eigenvalues(a).iter().map(|z| z.norm()).fold(0.0, f64::max)
}
