use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{LyapunovCandidate, NonlinMaxBounds, NonlinSystem};
use crate::comparison::ComparisonError;
use crate::rng::{channel, stream};
use crate::system::{BoxDomain, Dynamics};
use crate::verifier::violation_threshold;

const NOTE: &str = "sampling-based falsification: a pass means no counterexample was found on the drawn samples, not a proof";
/// Every n-th sample uses identical arguments for both trajectories.
const DIAGONAL_EVERY: usize = 10;
const SYMMETRY_TOL: f64 = 1e-9;

/// Boxes and sample count for the Lyapunov condition checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub x: BoxDomain,
    pub u: BoxDomain,
    pub w: BoxDomain,
    pub v: BoxDomain,
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
}

/// One sampled argument tuple `(x̄, χ̄, ū, ῡ, w̄, ω̄, v̄, ν̄)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub x: Vec<f64>,
    pub chi: Vec<f64>,
    pub u: Vec<f64>,
    pub upsilon: Vec<f64>,
    pub w: Vec<f64>,
    pub omega: Vec<f64>,
    pub v: Vec<f64>,
    pub nu: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: String,
    pub pass: bool,
    pub worst_margin: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovReport {
    pub falsification_only: bool,
    pub note: String,
    pub samples: usize,
    pub seed: u64,
    pub conditions: Vec<ConditionReport>,
    pub warnings: Vec<String>,
}

impl LyapunovReport {
    pub fn pass(&self) -> bool {
        self.conditions.iter().all(|c| c.pass)
    }

    pub fn condition(&self, name: &str) -> Option<&ConditionReport> {
        self.conditions.iter().find(|c| c.condition == name)
    }
}

struct Tuple {
    x: DVector<f64>,
    chi: DVector<f64>,
    u: DVector<f64>,
    upsilon: DVector<f64>,
    w: DVector<f64>,
    omega: DVector<f64>,
    v: DVector<f64>,
    nu: DVector<f64>,
}

impl Tuple {
    fn draw(spec: &SampleSpec, i: usize) -> Self {
        let mut rng = stream(spec.seed, i as u64, channel::INITIAL);
        let mut t = Tuple {
            x: spec.x.sample(&mut rng),
            chi: spec.x.sample(&mut rng),
            u: spec.u.sample(&mut rng),
            upsilon: spec.u.sample(&mut rng),
            w: spec.w.sample(&mut rng),
            omega: spec.w.sample(&mut rng),
            v: spec.v.sample(&mut rng),
            nu: spec.v.sample(&mut rng),
        };
        if i % DIAGONAL_EVERY == 0 {
            t.chi = t.x.clone();
            t.upsilon = t.u.clone();
            t.omega = t.w.clone();
            t.nu = t.v.clone();
        }
        t
    }

    fn witness(&self) -> Witness {
        let v = |d: &DVector<f64>| d.as_slice().to_vec();
        Witness {
            x: v(&self.x),
            chi: v(&self.chi),
            u: v(&self.u),
            upsilon: v(&self.upsilon),
            w: v(&self.w),
            omega: v(&self.omega),
            v: v(&self.v),
            nu: v(&self.nu),
        }
    }

    /// `(|w̄, ω̄|, |v̄, ν̄|, |ū, ῡ|, |h(x̄, ū, v̄), h(χ̄, ῡ, ν̄)|)`
    fn distances(&self, sys: &NonlinSystem) -> [f64; 4] {
        let y = sys.output(&self.x, &self.u, &self.v);
        let zeta = sys.output(&self.chi, &self.upsilon, &self.nu);
        [(&self.w - &self.omega).norm(), (&self.v - &self.nu).norm(), (&self.u - &self.upsilon).norm(), (y - zeta).norm()]
    }
}

/// Signed margin (`rhs − lhs`) and the right-hand side it was measured against.
type Margin = Result<(f64, f64), ComparisonError>;

#[derive(Default)]
struct Worst {
    margin: f64,
    index: Option<usize>,
    violated: bool,
    error: Option<(usize, String)>,
}

fn aggregate(results: &[Margin]) -> Worst {
    let mut worst = Worst { margin: f64::INFINITY, ..Default::default() };
    for (i, r) in results.iter().enumerate() {
        match r {
            Ok((margin, rhs)) => {
                if *margin < worst.margin {
                    worst.margin = *margin;
                    worst.index = Some(i);
                }
                if *margin < -violation_threshold(*rhs) {
                    worst.violated = true;
                }
            }
            Err(e) => {
                if worst.error.is_none() {
                    worst.error = Some((i, e.to_string()));
                }
            }
        }
    }
    worst
}

fn report(name: &str, results: &[Margin], spec: &SampleSpec) -> ConditionReport {
    let w = aggregate(results);
    let failed_at = w.error.as_ref().map(|(i, _)| *i).or(if w.violated { w.index } else { None });
    ConditionReport {
        condition: name.into(),
        pass: !w.violated && w.error.is_none(),
        worst_margin: w.margin,
        witness: failed_at.map(|i| Tuple::draw(spec, i).witness()),
        error: w.error.map(|(_, e)| e),
    }
}

/// Sample-checks the sandwich and decrease conditions, reported under those names.
///
/// Samples are drawn independently per index, so the report does not depend
/// on the number of worker threads.
pub fn check_lyapunov_conditions(sys: &NonlinSystem, cand: &LyapunovCandidate, spec: &SampleSpec) -> LyapunovReport {
    let per_sample: Vec<(Margin, Margin, f64)> = (0..spec.samples)
        .into_par_iter()
        .map(|i| {
            let t = Tuple::draw(spec, i);
            let v = (cand.v)(&t.x, &t.chi);
            let v_swap = (cand.v)(&t.chi, &t.x);
            let asym = (v - v_swap).abs() / v.abs().max(v_swap.abs()).max(1.0);
            let d = sys.state_distance(&t.x, &t.chi);
            let sandwich = (|| {
                let lo = cand.alpha1.eval(d)?;
                let hi = cand.alpha2.eval(d)?;
                let (m_lo, m_hi) = (v - lo, hi - v);
                Ok(if m_lo < m_hi { (m_lo, v) } else { (m_hi, hi) })
            })();
            let decrease = (|| {
                let x1 = sys.step(&t.x, &t.u, &t.w);
                let chi1 = sys.step(&t.chi, &t.upsilon, &t.omega);
                let lhs = (cand.v)(&x1, &chi1);
                let mut rhs = v - cand.alpha3.eval(v)?;
                for (rho, dist) in cand.gains().into_iter().zip(t.distances(sys)) {
                    rhs += rho.eval(dist)?;
                }
                Ok((rhs - lhs, rhs))
            })();
            (sandwich, decrease, asym)
        })
        .collect();

    let sandwich: Vec<Margin> = per_sample.iter().map(|p| p.0.clone()).collect();
    let decrease: Vec<Margin> = per_sample.iter().map(|p| p.1.clone()).collect();
    let max_asym = per_sample.iter().map(|p| p.2).fold(0.0, f64::max);
    let mut warnings = Vec::new();
    if max_asym > SYMMETRY_TOL {
        warnings.push(format!("V is not symmetric on the samples (largest relative gap {max_asym:e}); not required, noted only"));
    }
    LyapunovReport {
        falsification_only: true,
        note: NOTE.into(),
        samples: spec.samples,
        seed: spec.seed,
        conditions: vec![report("sandwich", &sandwich, spec), report("decrease", &decrease, spec)],
        warnings,
    }
}

/// Sample-checks the max-form contraction
/// `V⁺ ≤ max{κ(V), φ_w(|w̄, ω̄|), φ_v(|v̄, ν̄|), φ_u(|ū, ῡ|), φ_y(|ȳ, ζ̄|)}`.
pub fn check_contraction(
    sys: &NonlinSystem,
    cand: &LyapunovCandidate,
    bounds: &NonlinMaxBounds,
    spec: &SampleSpec,
) -> ConditionReport {
    let margins: Vec<Margin> = (0..spec.samples)
        .into_par_iter()
        .map(|i| {
            let t = Tuple::draw(spec, i);
            let v = (cand.v)(&t.x, &t.chi);
            let x1 = sys.step(&t.x, &t.u, &t.w);
            let chi1 = sys.step(&t.chi, &t.upsilon, &t.omega);
            let lhs = (cand.v)(&x1, &chi1);
            let mut rhs = bounds.kappa.eval(v)?;
            for (phi, dist) in bounds.phis().into_iter().zip(t.distances(sys)) {
                rhs = rhs.max(phi.eval(dist)?);
            }
            Ok((rhs - lhs, rhs))
        })
        .collect();
    report("contraction", &margins, spec)
}
