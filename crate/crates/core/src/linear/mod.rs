//! Certificates for linear systems `x⁺ = Ax + Bu + Ew`, `y = Cx + Du + Fv`.
//!
//! With an output-injection gain `L` making `A_L = A + LC` Schur stable and
//! `P` solving `A_Lᵀ P A_L = P − Q`, the error `e = x − χ` of any trajectory
//! pair obeys
//!
//! ```text
//! e⁺ = A_L e + E w_Δ + L F v_Δ + B_L u_Δ − L y_Δ,   B_L = B + LD,
//! ```
//!
//! which yields both the max-form certificate (a decrease rate and four gain
//! slopes in the `P`-norm) and the sum-form certificate (t-indexed slopes of
//! the unrolled recursion).

mod certificate;
mod detect;
mod linalg;
mod lyapunov;
mod observer_gain;
mod system;

pub use certificate::{
    certify, lyapunov_data, max_certificate, sum_certificate, CertificateBundle, CertifyOptions, LyapunovData,
    MaxCertificate, SumCertificate,
};
pub use detect::{pbh_detectable, pbh_test, PbhReport};
pub use linalg::{eigenvalues, frobenius, sigma_max, spd_sqrt, spectral_radius, sym_eig, SymEigen};
pub use lyapunov::{e2p_gain, p_induced_norm, p_induced_norm_paths, solve_dlyap, NORM_PATHS_TOL};
pub use observer_gain::synthesize_observer_gain;
pub use system::LinearSystem;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CertError {
    #[error("matrix is not symmetric (asymmetry {asym:e})")]
    NotSymmetric { asym: f64 },
    #[error("matrix is not positive definite (smallest eigenvalue {min_eig:e})")]
    NotPositiveDefinite { min_eig: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("pair (A, C) is not detectable; unobservable eigenvalue(s) with |λ| ≥ 1: {}", fmt_eigs(.eigenvalues))]
    NotDetectable { eigenvalues: Vec<(f64, f64)> },
    #[error("Riccati iteration did not converge in {iterations} iterations (last step {last_step:e})")]
    NoConvergence { iterations: usize, last_step: f64 },
    #[error("A + LC has spectral radius {radius} ≥ 1")]
    StabilityCheckFailed { radius: f64 },
    #[error("A_L has spectral radius {radius} ≥ 1; no Lyapunov solution exists")]
    NotSchurStable { radius: f64 },
    #[error("Kronecker system I − A_Lᵀ⊗A_Lᵀ is singular")]
    SingularSystem,
    #[error("Lyapunov residual {residual:e} exceeds {bound:e}")]
    ResidualTooLarge { residual: f64, bound: f64 },
    #[error("P-norm computations disagree: {direct} vs {via_q}")]
    IdentityMismatch { direct: f64, via_q: f64 },
}

pub(crate) fn fmt_eig(re: f64, im: f64) -> String {
    if im == 0.0 {
        format!("{re}")
    } else {
        format!("{re}{}{}i", if im < 0.0 { "-" } else { "+" }, im.abs())
    }
}

fn fmt_eigs(eigs: &[(f64, f64)]) -> String {
    eigs.iter().map(|&(re, im)| fmt_eig(re, im)).collect::<Vec<_>>().join(", ")
}
