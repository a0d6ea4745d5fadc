use serde::{Deserialize, Serialize};

use super::{iterate_kappa, ComparisonError, ScalarFn, SummabilityEnvelope};

/// A class-KL function `β(r, t)` with `t ∈ ℕ`.
///
/// The time argument is always a non-negative integer; there is no
/// interpolation in `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum KlFn {
    /// `outer(κ^{max(t − delay, 0)}(gain(r)))`, with `outer` the identity when absent.
    #[serde(rename = "separable")]
    Separable {
        kappa: ScalarFn,
        gain: ScalarFn,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        outer: Option<ScalarFn>,
        #[serde(default)]
        delay: u64,
        /// Certified bound on `Σₜ κᵗ(s)`, when one is known.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        envelope: Option<SummabilityEnvelope>,
    },
    /// `rate^{max(t − delay, 0)} · gain(r)`
    #[serde(rename = "exp_kl")]
    Exponential {
        rate: f64,
        gain: ScalarFn,
        #[serde(default)]
        delay: u64,
    },
    /// One K-function per time step.
    #[serde(rename = "table_kl")]
    Table { slices: Vec<ScalarFn> },
    /// `slopes[t] · r`, extended geometrically by `tail_rate` past the last slope.
    #[serde(rename = "slopes_kl")]
    Slopes { slopes: Vec<f64>, tail_rate: f64 },
}

fn pow_t(rate: f64, t: u64) -> f64 {
    match i32::try_from(t) {
        Ok(n) => rate.powi(n),
        Err(_) => rate.powf(t as f64),
    }
}

impl KlFn {
    pub fn exponential(rate: f64, gain: ScalarFn) -> Self {
        KlFn::Exponential { rate, gain, delay: 0 }
    }

    pub fn zero() -> Self {
        KlFn::Slopes { slopes: vec![0.0], tail_rate: 0.0 }
    }

    pub fn eval(&self, r: f64, t: u64) -> Result<f64, ComparisonError> {
        match self {
            KlFn::Separable { kappa, gain, outer, delay, .. } => {
                let s = iterate_kappa(kappa, gain.eval(r)?, t.saturating_sub(*delay))?;
                match outer {
                    Some(o) => o.eval(s),
                    None => Ok(s),
                }
            }
            KlFn::Exponential { rate, gain, delay } => Ok(pow_t(*rate, t.saturating_sub(*delay)) * gain.eval(r)?),
            KlFn::Table { slices } => slices
                .get(t as usize)
                .ok_or(ComparisonError::HorizonExceeded { t, len: slices.len() })?
                .eval(r),
            KlFn::Slopes { slopes, tail_rate } => {
                if !(r >= 0.0) {
                    return Err(ComparisonError::InvalidParameter(format!("argument {r} is negative")));
                }
                Ok(self.slope_at(t, slopes, *tail_rate) * r)
            }
        }
    }

    fn slope_at(&self, t: u64, slopes: &[f64], tail_rate: f64) -> f64 {
        let last = slopes.len() as u64 - 1;
        if t <= last {
            slopes[t as usize]
        } else {
            slopes[last as usize] * pow_t(tail_rate, t - last)
        }
    }

    /// Slopes `s_t` for `t = 0..=horizon` if `β(r, t) = s_t · r` exactly.
    pub fn linear_slopes(&self, horizon: u64) -> Option<Vec<f64>> {
        match self {
            KlFn::Exponential { rate, gain, delay } => {
                let g = gain.linear_slope()?;
                Some((0..=horizon).map(|t| pow_t(*rate, t.saturating_sub(*delay)) * g).collect())
            }
            KlFn::Slopes { slopes, tail_rate } => {
                Some((0..=horizon).map(|t| self.slope_at(t, slopes, *tail_rate)).collect())
            }
            KlFn::Separable { kappa, gain, outer, delay, .. } => {
                let k = kappa.linear_slope()?;
                let g = gain.linear_slope()?;
                let o = match outer {
                    Some(o) => o.linear_slope()?,
                    None => 1.0,
                };
                let mut out = Vec::with_capacity(horizon as usize + 1);
                let mut s = g;
                for t in 0..=horizon {
                    out.push(o * s);
                    if t >= *delay {
                        s *= k;
                    }
                }
                Some(out)
            }
            KlFn::Table { slices } => {
                if (slices.len() as u64) <= horizon {
                    return None;
                }
                slices.iter().take(horizon as usize + 1).map(ScalarFn::linear_slope).collect()
            }
        }
    }

    /// Samples the KL invariants: `r ↦ β(r, t)` strictly increasing (or
    /// identically zero) and `t ↦ β(r, t)` non-increasing.
    pub fn check_sampled(&self, rs: &[f64], t_max: u64) -> Result<(), String> {
        let mut prev: Option<Vec<f64>> = None;
        for t in 0..=t_max {
            let row: Vec<f64> = rs
                .iter()
                .map(|&r| self.eval(r, t))
                .collect::<Result<_, _>>()
                .map_err(|e| e.to_string())?;
            let all_zero = row.iter().all(|v| *v == 0.0);
            if !all_zero && !row.windows(2).all(|w| w[1] > w[0]) {
                return Err(format!("β(·, {t}) is not strictly increasing on the sample"));
            }
            if let Some(p) = &prev {
                if let Some(i) = (0..rs.len()).find(|&i| row[i] > p[i]) {
                    return Err(format!("β({}, ·) increases at t = {t}", rs[i]));
                }
            }
            prev = Some(row);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_with_delay() {
        let b = KlFn::Exponential { rate: 0.5, gain: ScalarFn::linear(2.0), delay: 1 };
        assert_eq!(b.eval(1.0, 0).unwrap(), 2.0);
        assert_eq!(b.eval(1.0, 1).unwrap(), 2.0);
        assert_eq!(b.eval(1.0, 3).unwrap(), 0.5);
        assert_eq!(b.linear_slopes(3).unwrap(), vec![2.0, 2.0, 1.0, 0.5]);
    }

    #[test]
    fn slopes_extend_geometrically() {
        let b = KlFn::Slopes { slopes: vec![4.0, 2.0], tail_rate: 0.5 };
        assert_eq!(b.eval(1.0, 1).unwrap(), 2.0);
        assert_eq!(b.eval(1.0, 3).unwrap(), 0.5);
    }

    #[test]
    fn table_horizon_exceeded() {
        let b = KlFn::Table { slices: vec![ScalarFn::linear(1.0)] };
        assert_eq!(b.eval(1.0, 2), Err(ComparisonError::HorizonExceeded { t: 2, len: 1 }));
    }

    #[test]
    fn separable_matches_slopes() {
        let b = KlFn::Separable {
            kappa: ScalarFn::linear(0.5),
            gain: ScalarFn::linear(2.0),
            outer: Some(ScalarFn::linear(0.5).inverse()),
            delay: 0,
            envelope: None,
        };
        // α₁⁻¹ ∘ κᵗ ∘ α₂ with α₁ = r/2, α₂ = 2r, κ = r/2 → 4r/2ᵗ
        for t in 0..6 {
            assert!((b.eval(1.0, t).unwrap() - 4.0 / 2f64.powi(t as i32)).abs() < 1e-12);
        }
        assert_eq!(b.linear_slopes(2).unwrap(), vec![4.0, 2.0, 1.0]);
        let delayed = KlFn::Separable {
            kappa: ScalarFn::linear(0.5),
            gain: ScalarFn::identity(),
            outer: None,
            delay: 1,
            envelope: None,
        };
        assert_eq!(delayed.linear_slopes(3).unwrap(), vec![1.0, 1.0, 0.5, 0.25]);
        assert_eq!(delayed.eval(1.0, 3).unwrap(), 0.25);
    }

    #[test]
    fn exp_kl_json_kind() {
        let v = serde_json::to_value(KlFn::exponential(0.5, ScalarFn::linear(1.0))).unwrap();
        assert_eq!(v["kind"], "exp_kl");
        let back: KlFn = serde_json::from_value(v).unwrap();
        assert_eq!(back.eval(2.0, 2).unwrap(), 0.5);
    }

    #[test]
    fn sampled_invariants() {
        let rs = [0.0, 0.5, 1.0, 2.0];
        assert!(KlFn::exponential(0.9, ScalarFn::power(1.0, 2.0)).check_sampled(&rs, 20).is_ok());
        assert!(KlFn::zero().check_sampled(&rs, 5).is_ok());
        let growing = KlFn::Slopes { slopes: vec![1.0, 2.0], tail_rate: 0.5 };
        assert!(growing.check_sampled(&rs, 3).is_err());
    }
}
