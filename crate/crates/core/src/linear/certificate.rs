use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::detect::pbh_test;
use super::linalg::{sigma_max, spd_sqrt, sym_eig};
use super::lyapunov::{e2p_gain, p_induced_norm, solve_dlyap};
use super::observer_gain::synthesize_observer_gain;
use super::{CertError, LinearSystem};
use crate::comparison::{KlFn, MaxBoundFamily, ScalarFn, SumBoundFamily};
use crate::matrix_serde;

/// Output-injection gain, Lyapunov pair and derived matrices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovData {
    #[serde(rename = "L", with = "matrix_serde")]
    pub l: DMatrix<f64>,
    #[serde(rename = "P", with = "matrix_serde")]
    pub p: DMatrix<f64>,
    #[serde(rename = "Q", with = "matrix_serde")]
    pub q: DMatrix<f64>,
    #[serde(rename = "A_L", with = "matrix_serde")]
    pub a_l: DMatrix<f64>,
    #[serde(rename = "B_L", with = "matrix_serde")]
    pub b_l: DMatrix<f64>,
    /// `‖A_L‖_P`
    pub a_l_pnorm: f64,
    /// `‖A_Lᵀ P A_L − P + Q‖_F`
    pub residual: f64,
}

/// Decrease rate and gain slopes of `V(x, χ) = ‖x − χ‖_P`:
///
/// ```text
/// V⁺ ≤ V − (1 − ‖A_L‖_P)·V + ρ_w|w_Δ| + ρ_v|v_Δ| + ρ_u|u_Δ| + ρ_y|y_Δ|
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxCertificate {
    pub decrease_rate: f64,
    pub rho_w: f64,
    pub rho_v: f64,
    pub rho_u: f64,
    pub rho_y: f64,
    /// `√λ_min(P)`, lower sandwich slope of `V`.
    pub alpha1_slope: f64,
    /// `√λ_max(P)`, upper sandwich slope of `V`.
    pub alpha2_slope: f64,
    pub lyap: LyapunovData,
}

/// t-indexed slopes of the unrolled error recursion.
///
/// `beta_t[t] = σ_max(P^½ A_Lᵗ)`; for `t ≥ 1` the channel slopes are
/// `σ_max(P^½ A_L^{t−1} M)` with `M = E, LF, B_L, L`. Index 0 of each channel
/// array is never used by the estimate and repeats index 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SumCertificate {
    pub alpha1_slope: f64,
    pub horizon: u64,
    pub beta_t: Vec<f64>,
    pub gamma_t: Vec<f64>,
    pub delta_t: Vec<f64>,
    pub epsilon_t: Vec<f64>,
    pub phi_t: Vec<f64>,
    pub lyap: LyapunovData,
}

pub fn lyapunov_data(sys: &LinearSystem, l: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<LyapunovData, CertError> {
    sys.check_gain(l)?;
    let a_l = sys.a_l(l);
    let b_l = sys.b_l(l);
    let (p, residual) = solve_dlyap(&a_l, q)?;
    let a_l_pnorm = p_induced_norm(&a_l, &p, q)?;
    Ok(LyapunovData { l: l.clone(), p, q: q.clone(), a_l, b_l, a_l_pnorm, residual })
}

impl MaxCertificate {
    pub fn from_lyap(sys: &LinearSystem, lyap: LyapunovData) -> Result<Self, CertError> {
        let p = &lyap.p;
        let eig = sym_eig(p, 1e-12)?;
        Ok(Self {
            decrease_rate: 1.0 - lyap.a_l_pnorm,
            rho_w: e2p_gain(&sys.e, p),
            rho_v: e2p_gain(&(&lyap.l * &sys.f), p),
            rho_u: e2p_gain(&lyap.b_l, p),
            rho_y: e2p_gain(&lyap.l, p),
            alpha1_slope: eig.min().sqrt(),
            alpha2_slope: eig.max().sqrt(),
            lyap,
        })
    }

    /// Max-form KL family for `|x(t) − χ(t)|`.
    ///
    /// With `a = ‖A_L‖_P` the P-norm error is bounded by
    /// `aᵗ‖e₀‖_P + Σ_{τ=1}^{t} a^{τ−1} Σ_n ρ_n|n_Δ(t−τ)|`. Each channel sum is
    /// at most `max_τ a^{(τ−1)/2} ρ_n|n_Δ(t−τ)| / (1 − √a)`, and a sum of five
    /// non-negative terms is at most five times their maximum.
    pub fn max_family(&self) -> MaxBoundFamily {
        let a = self.lyap.a_l_pnorm;
        let root = a.sqrt();
        let c = 5.0 / ((1.0 - root) * self.alpha1_slope);
        let channel = |rho: f64| KlFn::Exponential { rate: root, gain: ScalarFn::linear(c * rho), delay: 1 };
        MaxBoundFamily {
            beta: KlFn::exponential(a, ScalarFn::linear(5.0 * self.alpha2_slope / self.alpha1_slope)),
            gamma: channel(self.rho_w),
            delta: channel(self.rho_v),
            epsilon: channel(self.rho_u),
            phi: channel(self.rho_y),
        }
    }
}

impl SumCertificate {
    pub fn from_lyap(sys: &LinearSystem, lyap: LyapunovData, horizon: u64) -> Result<Self, CertError> {
        if horizon == 0 {
            return Err(CertError::Dimension("sum certificate horizon must be positive".into()));
        }
        let (p_half, _) = spd_sqrt(&lyap.p)?;
        let alpha1_slope = sym_eig(&lyap.p, 1e-12)?.min().sqrt();
        let lf = &lyap.l * &sys.f;
        let len = horizon as usize + 1;
        let mut beta_t = Vec::with_capacity(len);
        let (mut gamma_t, mut delta_t, mut epsilon_t, mut phi_t) = (vec![0.0], vec![0.0], vec![0.0], vec![0.0]);
        let mut power = DMatrix::<f64>::identity(lyap.a_l.nrows(), lyap.a_l.nrows());
        for t in 0..len {
            let weighted = &p_half * &power;
            beta_t.push(sigma_max(&weighted));
            if t + 1 < len {
                gamma_t.push(sigma_max(&(&weighted * &sys.e)));
                delta_t.push(sigma_max(&(&weighted * &lf)));
                epsilon_t.push(sigma_max(&(&weighted * &lyap.b_l)));
                phi_t.push(sigma_max(&(&weighted * &lyap.l)));
                power = &power * &lyap.a_l;
            }
        }
        for v in [&mut gamma_t, &mut delta_t, &mut epsilon_t, &mut phi_t] {
            v[0] = v[1];
        }
        Ok(Self { alpha1_slope, horizon, beta_t, gamma_t, delta_t, epsilon_t, phi_t, lyap })
    }

    /// Sum-form family; slopes past the horizon decay geometrically with `‖A_L‖_P`.
    pub fn family(&self) -> SumBoundFamily {
        let tail_rate = self.lyap.a_l_pnorm;
        let slopes = |s: &Vec<f64>| KlFn::Slopes { slopes: s.clone(), tail_rate };
        SumBoundFamily {
            alpha1: ScalarFn::linear(self.alpha1_slope),
            beta: slopes(&self.beta_t),
            gamma: slopes(&self.gamma_t),
            delta: slopes(&self.delta_t),
            epsilon: slopes(&self.epsilon_t),
            phi: slopes(&self.phi_t),
        }
    }
}

pub fn max_certificate(sys: &LinearSystem, l: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<MaxCertificate, CertError> {
    MaxCertificate::from_lyap(sys, lyapunov_data(sys, l, q)?)
}

pub fn sum_certificate(sys: &LinearSystem, l: &DMatrix<f64>, q: &DMatrix<f64>, horizon: u64) -> Result<SumCertificate, CertError> {
    SumCertificate::from_lyap(sys, lyapunov_data(sys, l, q)?, horizon)
}

#[derive(Clone, Debug)]
pub struct CertifyOptions {
    /// Output-injection gain; synthesised from the filter Riccati recursion when absent.
    pub gain: Option<DMatrix<f64>>,
    /// `Q` in the Lyapunov equation; identity when absent.
    pub weight: Option<DMatrix<f64>>,
    pub horizon: u64,
    pub pbh_tol: f64,
    pub riccati_max_iter: usize,
    pub riccati_tol: f64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self { gain: None, weight: None, horizon: 200, pbh_tol: 1e-9, riccati_max_iter: 10_000, riccati_tol: 1e-12 }
    }
}

/// PBH test, gain synthesis and both certificates.
pub fn certify(sys: &LinearSystem, opts: &CertifyOptions) -> Result<CertificateBundle, CertError> {
    let report = pbh_test(&sys.a, &sys.c, opts.pbh_tol);
    if !report.detectable {
        return Err(CertError::NotDetectable { eigenvalues: report.unobservable.iter().map(|z| (z.re, z.im)).collect() });
    }
    let l = match &opts.gain {
        Some(l) => l.clone(),
        None => synthesize_observer_gain(sys, opts.riccati_max_iter, opts.riccati_tol)?,
    };
    let n_x = sys.a.nrows();
    let q = opts.weight.clone().unwrap_or_else(|| DMatrix::identity(n_x, n_x));
    let lyap = lyapunov_data(sys, &l, &q)?;
    Ok(CertificateBundle {
        max: MaxCertificate::from_lyap(sys, lyap.clone())?,
        sum: SumCertificate::from_lyap(sys, lyap, opts.horizon)?,
    })
}

/// Both certificates for one system. Serialises as
/// `{"max": {...}, "sum": {...}, "provenance": {L, P, Q, A_L, B_L, a_l_pnorm, residual}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "BundleRepr", from = "BundleRepr")]
pub struct CertificateBundle {
    pub max: MaxCertificate,
    pub sum: SumCertificate,
}

#[derive(Serialize, Deserialize)]
struct MaxRepr {
    decrease_rate: f64,
    rho_w: f64,
    rho_v: f64,
    rho_u: f64,
    rho_y: f64,
    alpha1_slope: f64,
    alpha2_slope: f64,
}

#[derive(Serialize, Deserialize)]
struct SumRepr {
    alpha1_slope: f64,
    horizon: u64,
    beta_t: Vec<f64>,
    gamma_t: Vec<f64>,
    delta_t: Vec<f64>,
    epsilon_t: Vec<f64>,
    phi_t: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct BundleRepr {
    max: MaxRepr,
    sum: SumRepr,
    provenance: LyapunovData,
}

impl From<CertificateBundle> for BundleRepr {
    fn from(b: CertificateBundle) -> Self {
        let m = b.max;
        let s = b.sum;
        BundleRepr {
            max: MaxRepr {
                decrease_rate: m.decrease_rate,
                rho_w: m.rho_w,
                rho_v: m.rho_v,
                rho_u: m.rho_u,
                rho_y: m.rho_y,
                alpha1_slope: m.alpha1_slope,
                alpha2_slope: m.alpha2_slope,
            },
            sum: SumRepr {
                alpha1_slope: s.alpha1_slope,
                horizon: s.horizon,
                beta_t: s.beta_t,
                gamma_t: s.gamma_t,
                delta_t: s.delta_t,
                epsilon_t: s.epsilon_t,
                phi_t: s.phi_t,
            },
            provenance: m.lyap,
        }
    }
}

impl From<BundleRepr> for CertificateBundle {
    fn from(r: BundleRepr) -> Self {
        let m = r.max;
        let s = r.sum;
        CertificateBundle {
            max: MaxCertificate {
                decrease_rate: m.decrease_rate,
                rho_w: m.rho_w,
                rho_v: m.rho_v,
                rho_u: m.rho_u,
                rho_y: m.rho_y,
                alpha1_slope: m.alpha1_slope,
                alpha2_slope: m.alpha2_slope,
                lyap: r.provenance.clone(),
            },
            sum: SumCertificate {
                alpha1_slope: s.alpha1_slope,
                horizon: s.horizon,
                beta_t: s.beta_t,
                gamma_t: s.gamma_t,
                delta_t: s.delta_t,
                epsilon_t: s.epsilon_t,
                phi_t: s.phi_t,
                lyap: r.provenance,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::Dims;

    fn scalar_demo() -> LinearSystem {
        let dims = Dims { n_x: 1, n_u: 1, n_w: 1, n_v: 1, n_y: 1 };
        LinearSystem::from_slices(dims, &[0.5], &[1.0], &[1.0], &[0.0], &[1.0], &[1.0]).unwrap()
    }

    fn s(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn scalar_without_injection() {
        let c = max_certificate(&scalar_demo(), &s(0.0), &s(1.0)).unwrap();
        let r = (4.0f64 / 3.0).sqrt();
        assert!((c.lyap.p[(0, 0)] - 4.0 / 3.0).abs() < 1e-12);
        assert!((c.decrease_rate - 0.5).abs() < 1e-12);
        assert!((c.rho_w - r).abs() < 1e-12 && (c.rho_u - r).abs() < 1e-12);
        assert_eq!((c.rho_v, c.rho_y), (0.0, 0.0));
    }

    #[test]
    fn scalar_deadbeat_injection() {
        let c = max_certificate(&scalar_demo(), &s(-0.5), &s(1.0)).unwrap();
        assert_eq!(c.lyap.a_l[(0, 0)], 0.0);
        assert!((c.lyap.p[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((c.decrease_rate - 1.0).abs() < 1e-15);
        for (got, want) in [(c.rho_y, 0.5), (c.rho_v, 0.5), (c.rho_u, 1.0), (c.rho_w, 1.0)] {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn scalar_sum_slopes() {
        let c = sum_certificate(&scalar_demo(), &s(0.0), &s(1.0), 5).unwrap();
        let r = (4.0f64 / 3.0).sqrt();
        assert!((c.gamma_t[1] - r).abs() < 1e-12);
        assert!((c.gamma_t[3] - r * 0.25).abs() < 1e-12);
        assert!((c.beta_t[0] - r).abs() < 1e-12);
        assert_eq!(c.beta_t.len(), 6);
    }

    #[test]
    fn nilpotent_beta_vanishes_after_one_step() {
        let dims = Dims { n_x: 2, n_u: 1, n_w: 1, n_v: 1, n_y: 1 };
        let sys = LinearSystem::from_slices(dims, &[0.0, 1.0, 0.0, 0.0], &[1.0, 0.0], &[0.0, 0.0], &[0.0], &[1.0, 0.0], &[1.0])
            .unwrap();
        let c = sum_certificate(&sys, &DMatrix::zeros(2, 1), &DMatrix::identity(2, 2), 4).unwrap();
        assert!(c.beta_t[1] > 0.0);
        assert_eq!(c.beta_t[2], 0.0);
        assert_eq!(c.beta_t[4], 0.0);
    }

    #[test]
    fn zero_output_map_certifies() {
        let dims = Dims { n_x: 1, n_u: 1, n_w: 1, n_v: 1, n_y: 1 };
        let sys = LinearSystem::from_slices(dims, &[0.5], &[1.0], &[0.0], &[0.0], &[1.0], &[1.0]).unwrap();
        let b = certify(&sys, &CertifyOptions::default()).unwrap();
        assert_eq!(b.max.lyap.l[(0, 0)], 0.0);
        assert_eq!((b.max.rho_v, b.max.rho_y), (0.0, 0.0));
    }

    #[test]
    fn bundle_json_has_provenance() {
        let b = certify(&scalar_demo(), &CertifyOptions { gain: Some(s(0.0)), horizon: 3, ..Default::default() }).unwrap();
        let v = serde_json::to_value(&b).unwrap();
        assert!(v["provenance"]["P"].is_array());
        assert!(v["max"].get("lyap").is_none());
        let back: CertificateBundle = serde_json::from_value(v).unwrap();
        assert_eq!(back, b);
    }
}
