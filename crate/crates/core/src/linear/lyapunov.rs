use nalgebra::{DMatrix, DVector};

use super::linalg::{frobenius, spd_sqrt, spectral_radius, sym_eig};
use super::CertError;

/// Agreement required between the two `‖A_L‖_P` computations.
pub const NORM_PATHS_TOL: f64 = 1e-9;
const RESIDUAL_TOL: f64 = 1e-10;
const SYMMETRY_TOL: f64 = 1e-12;

fn check_spd(m: &DMatrix<f64>) -> Result<(), CertError> {
    let asym = (m - m.transpose()).norm();
    if asym > SYMMETRY_TOL * m.norm() {
        return Err(CertError::NotSymmetric { asym });
    }
    let min_eig = sym_eig(m, SYMMETRY_TOL)?.min();
    if !(min_eig > 0.0) && m.nrows() > 0 {
        return Err(CertError::NotPositiveDefinite { min_eig });
    }
    Ok(())
}

fn residual(a_l: &DMatrix<f64>, p: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    a_l.transpose() * p * a_l - p + q
}

/// Solves `A_Lᵀ P A_L = P − Q` through `(I − A_Lᵀ⊗A_Lᵀ) vec(P) = vec(Q)`.
///
/// LU with partial pivoting plus one step of iterative refinement, then
/// `P ← (P + Pᵀ)/2`. Returns `P` and the Frobenius residual, which is
/// required to be at most `1e-10·‖P‖_F`.
pub fn solve_dlyap(a_l: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64), CertError> {
    let n = a_l.nrows();
    if a_l.ncols() != n || q.shape() != (n, n) {
        return Err(CertError::Dimension(format!(
            "A_L is {}×{}, Q is {}×{}",
            n,
            a_l.ncols(),
            q.nrows(),
            q.ncols()
        )));
    }
    let radius = spectral_radius(a_l);
    if !(radius < 1.0) {
        return Err(CertError::NotSchurStable { radius });
    }
    check_spd(q)?;

    let at = a_l.transpose();
    let k = DMatrix::<f64>::identity(n * n, n * n) - at.kronecker(&at);
    let lu = k.lu();
    let solve = |rhs: &DMatrix<f64>| -> Result<DMatrix<f64>, CertError> {
        let b = DVector::from_column_slice(rhs.as_slice());
        let x = lu.solve(&b).ok_or(CertError::SingularSystem)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(CertError::SingularSystem);
        }
        Ok(DMatrix::from_column_slice(n, n, x.as_slice()))
    };
    let mut p = solve(q)?;
    let correction = solve(&-residual(a_l, &p, q))?;
    p += correction;
    let p = (&p + p.transpose()) * 0.5;

    let res = frobenius(&residual(a_l, &p, q));
    let bound = RESIDUAL_TOL * frobenius(&p);
    if res > bound {
        return Err(CertError::ResidualTooLarge { residual: res, bound });
    }
    check_spd(&p)?;
    Ok((p, res))
}

fn sym(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// `‖A_L‖_P` computed as `√λ_max(P^{-½} A_Lᵀ P A_L P^{-½})` and as
/// `√(1 − λ_min(P^{-½} Q P^{-½}))`, in that order.
pub fn p_induced_norm_paths(a_l: &DMatrix<f64>, p: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<(f64, f64), CertError> {
    if a_l.nrows() == 0 {
        return Ok((0.0, 0.0));
    }
    let (_, p_inv_half) = spd_sqrt(p)?;
    let m1 = sym(&p_inv_half * a_l.transpose() * p * a_l * &p_inv_half);
    let m2 = sym(&p_inv_half * q * &p_inv_half);
    let direct = sym_eig(&m1, 1e-9)?.max().max(0.0).sqrt();
    let via_q = (1.0 - sym_eig(&m2, 1e-9)?.min()).max(0.0).sqrt();
    Ok((direct, via_q))
}

/// `‖A_L‖_P`, failing if the two computations differ by more than
/// [`NORM_PATHS_TOL`].
pub fn p_induced_norm(a_l: &DMatrix<f64>, p: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<f64, CertError> {
    let (direct, via_q) = p_induced_norm_paths(a_l, p, q)?;
    if (direct - via_q).abs() > NORM_PATHS_TOL {
        return Err(CertError::IdentityMismatch { direct, via_q });
    }
    Ok(direct)
}

/// Euclidean-to-`P` induced gain `√λ_max(Mᵀ P M)`.
pub fn e2p_gain(m: &DMatrix<f64>, p: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let g = sym(m.transpose() * p * m);
    sym_eig(&g, 1e-9).expect("symmetrised").max().max(0.0).sqrt()
}
