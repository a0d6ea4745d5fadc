use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::VerifyError;
use crate::rng::stream;
use crate::system::BoxDomain;

/// An exogenous signal over `t = 0..T−1`.
///
/// Vector parameters of length one are broadcast to the channel dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalSpec {
    Zero,
    Constant {
        value: Vec<f64>,
    },
    /// `before` for `t < at`, `after` from `at` on.
    Step {
        before: Vec<f64>,
        after: Vec<f64>,
        at: u64,
    },
    /// `base · rateᵗ`
    DecayingExp {
        base: Vec<f64>,
        rate: f64,
    },
    /// Independent uniform draws from `[lo, hi]`. Without an explicit seed the
    /// run seed is used; the stream is keyed by trial and channel either way.
    SeededUniformBox {
        lo: Vec<f64>,
        hi: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
}

impl Default for SignalSpec {
    fn default() -> Self {
        SignalSpec::Zero
    }
}

fn broadcast(v: &[f64], dim: usize, what: &str) -> Result<DVector<f64>, VerifyError> {
    match v.len() {
        1 => Ok(DVector::from_element(dim, v[0])),
        n if n == dim => Ok(DVector::from_column_slice(v)),
        n => Err(VerifyError::Dimension(format!("{what} has length {n}, channel dimension is {dim}"))),
    }
}

impl SignalSpec {
    /// An impulse: `value` at `t = 0`, zero afterwards.
    pub fn impulse(value: Vec<f64>) -> Self {
        let zeros = vec![0.0; value.len()];
        SignalSpec::Step { before: value, after: zeros, at: 1 }
    }

    pub fn validate(&self) -> Result<(), VerifyError> {
        match self {
            SignalSpec::DecayingExp { rate, .. } if !(0.0..1.0).contains(rate) => {
                Err(VerifyError::InvalidSignal(format!("decaying_exp rate {rate} outside [0, 1)")))
            }
            SignalSpec::SeededUniformBox { lo, hi, .. } => BoxDomain::new(lo.clone(), hi.clone())
                .map(|_| ())
                .map_err(VerifyError::InvalidSignal),
            _ => Ok(()),
        }
    }

    /// Samples of the signal for `t = 0..horizon`.
    pub fn realize(
        &self,
        dim: usize,
        horizon: u64,
        seed: u64,
        trial: u64,
        channel: u64,
    ) -> Result<Vec<DVector<f64>>, VerifyError> {
        self.validate()?;
        let n = horizon as usize;
        Ok(match self {
            SignalSpec::Zero => vec![DVector::zeros(dim); n],
            SignalSpec::Constant { value } => vec![broadcast(value, dim, "constant value")?; n],
            SignalSpec::Step { before, after, at } => {
                let (b, a) = (broadcast(before, dim, "step value")?, broadcast(after, dim, "step value")?);
                (0..horizon).map(|t| if t < *at { b.clone() } else { a.clone() }).collect()
            }
            SignalSpec::DecayingExp { base, rate } => {
                let b = broadcast(base, dim, "decaying_exp base")?;
                let mut scale = 1.0;
                (0..n)
                    .map(|_| {
                        let v = &b * scale;
                        scale *= rate;
                        v
                    })
                    .collect()
            }
            SignalSpec::SeededUniformBox { lo, hi, seed: own } => {
                let b = BoxDomain::new(
                    broadcast(lo, dim, "box bound")?.as_slice().to_vec(),
                    broadcast(hi, dim, "box bound")?.as_slice().to_vec(),
                )
                .map_err(VerifyError::InvalidSignal)?;
                let mut rng = stream(own.unwrap_or(seed), trial, channel);
                (0..n).map(|_| b.sample(&mut rng)).collect()
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_realize() {
        let s = SignalSpec::Step { before: vec![1.0], after: vec![2.0, 3.0], at: 2 };
        let r = s.realize(2, 4, 0, 0, 0).unwrap();
        assert_eq!(r[1].as_slice(), &[1.0, 1.0]);
        assert_eq!(r[2].as_slice(), &[2.0, 3.0]);
        let d = SignalSpec::DecayingExp { base: vec![1.0], rate: 0.9 }.realize(1, 3, 0, 0, 0).unwrap();
        assert_eq!(d[2][0], 0.9 * 0.9);
        let imp = SignalSpec::impulse(vec![1.0]).realize(1, 3, 0, 0, 0).unwrap();
        assert_eq!(imp.iter().map(|v| v[0]).collect::<Vec<_>>(), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn seeded_box_is_reproducible_and_bounded() {
        let s = SignalSpec::SeededUniformBox { lo: vec![-1.0], hi: vec![1.0], seed: None };
        let a = s.realize(3, 50, 9, 2, 4).unwrap();
        assert_eq!(a, s.realize(3, 50, 9, 2, 4).unwrap());
        assert_ne!(a, s.realize(3, 50, 9, 3, 4).unwrap());
        assert!(a.iter().all(|v| v.iter().all(|x| x.abs() <= 1.0)));
    }

    #[test]
    fn invalid_parameters() {
        assert!(SignalSpec::DecayingExp { base: vec![1.0], rate: 1.0 }.realize(1, 2, 0, 0, 0).is_err());
        assert!(SignalSpec::SeededUniformBox { lo: vec![1.0], hi: vec![0.0], seed: None }.validate().is_err());
        assert!(SignalSpec::Constant { value: vec![1.0, 2.0] }.realize(3, 2, 0, 0, 0).is_err());
    }

    #[test]
    fn json_shape() {
        let s: SignalSpec = serde_json::from_str(r#"{"kind":"decaying_exp","base":[1.0],"rate":0.9}"#).unwrap();
        assert_eq!(s, SignalSpec::DecayingExp { base: vec![1.0], rate: 0.9 });
        let z: SignalSpec = serde_json::from_str(r#"{"kind":"zero"}"#).unwrap();
        assert_eq!(z, SignalSpec::Zero);
    }
}
