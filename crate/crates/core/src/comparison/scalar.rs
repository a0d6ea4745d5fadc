use serde::{Deserialize, Serialize};

use super::ComparisonError;

/// Default certified domain `[0, 10⁶]` for closed-form functions.
pub const DEFAULT_DOMAIN_CAP: f64 = 1e6;
/// Default absolute tolerance for bisection inversion.
pub const DEFAULT_TOL: f64 = 1e-10;

const MAX_BISECTIONS: usize = 400;

fn default_cap() -> f64 {
    DEFAULT_DOMAIN_CAP
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

/// A map `[0, domain_cap] → [0, ∞)` used as a comparison function.
///
/// Closed forms are kept symbolic; everything else is a monotone
/// piecewise-linear table. Composite variants let the bound constructions
/// (`α₁⁻¹ ∘ κᵗ ∘ α₂`, the φ gains, σ envelopes) stay exact for closed-form
/// inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarFn {
    /// `slope · r`
    Linear {
        slope: f64,
        #[serde(default = "default_cap")]
        domain_cap: f64,
    },
    /// `coeff · r^exponent`
    Power {
        coeff: f64,
        exponent: f64,
        #[serde(default = "default_cap")]
        domain_cap: f64,
    },
    /// Linear interpolation through `[r, value]` breakpoints starting at `r = 0`.
    Table { points: PiecewiseLinear },
    /// `factor · inner(r)`
    Scaled { factor: f64, inner: Box<ScalarFn> },
    /// `Σ terms(r)`
    Sum { terms: Vec<ScalarFn> },
    /// `outer(inner(r))`
    Compose { outer: Box<ScalarFn>, inner: Box<ScalarFn> },
    /// `of⁻¹(r)`; closed form for linear/power, bisection otherwise.
    Inverse {
        of: Box<ScalarFn>,
        #[serde(default = "default_tol")]
        tol: f64,
    },
    /// Summability envelope σ for a linear lower bound `K·r` on `[0, r_bar]`.
    /// See [`super::summability_sigma`].
    Sigma {
        k: f64,
        r_bar: f64,
        local: bool,
        #[serde(default = "default_cap")]
        domain_cap: f64,
    },
}

/// Class metadata of a comparison function.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassFlags {
    pub is_k: bool,
    pub zero_at_zero: bool,
}

/// Breakpoints of a monotone piecewise-linear function.
///
/// Invariant: at least two points, first breakpoint at `r = 0`, strictly
/// increasing breakpoints, finite non-negative values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct PiecewiseLinear {
    r: Vec<f64>,
    v: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(r: Vec<f64>, v: Vec<f64>) -> Result<Self, ComparisonError> {
        let bad = |m: String| Err(ComparisonError::InvalidParameter(m));
        if r.len() != v.len() {
            return bad(format!("{} breakpoints but {} values", r.len(), v.len()));
        }
        if r.len() < 2 {
            return bad("a table needs at least two breakpoints".into());
        }
        if r[0] != 0.0 {
            return bad(format!("first breakpoint must be 0, got {}", r[0]));
        }
        if let Some(i) = (1..r.len()).find(|&i| !(r[i] > r[i - 1]) || !r[i].is_finite()) {
            return bad(format!("breakpoints not strictly increasing at index {i}"));
        }
        if let Some(i) = v.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
            return bad(format!("table value at index {i} is negative or not finite"));
        }
        Ok(Self { r, v })
    }

    pub fn from_points(points: &[[f64; 2]]) -> Result<Self, ComparisonError> {
        Self::new(points.iter().map(|p| p[0]).collect(), points.iter().map(|p| p[1]).collect())
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.r
    }

    pub fn values(&self) -> &[f64] {
        &self.v
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn cap(&self) -> f64 {
        *self.r.last().expect("non-empty table")
    }

    fn eval(&self, x: f64) -> f64 {
        // first index with r[i] > x; x ∈ [0, cap] so 1 ≤ i ≤ len
        let i = self.r.partition_point(|&b| b <= x);
        if i >= self.r.len() {
            return *self.v.last().unwrap();
        }
        let (r0, r1) = (self.r[i - 1], self.r[i]);
        let (v0, v1) = (self.v[i - 1], self.v[i]);
        if x == r0 {
            return v0;
        }
        v0 + (v1 - v0) * ((x - r0) / (r1 - r0))
    }
}

impl TryFrom<Vec<[f64; 2]>> for PiecewiseLinear {
    type Error = ComparisonError;
    fn try_from(points: Vec<[f64; 2]>) -> Result<Self, Self::Error> {
        Self::from_points(&points)
    }
}

impl From<PiecewiseLinear> for Vec<[f64; 2]> {
    fn from(t: PiecewiseLinear) -> Self {
        t.r.into_iter().zip(t.v).map(|(r, v)| [r, v]).collect()
    }
}

impl ScalarFn {
    pub fn linear(slope: f64) -> Self {
        ScalarFn::Linear { slope, domain_cap: DEFAULT_DOMAIN_CAP }
    }

    pub fn zero() -> Self {
        Self::linear(0.0)
    }

    pub fn identity() -> Self {
        Self::linear(1.0)
    }

    pub fn power(coeff: f64, exponent: f64) -> Self {
        ScalarFn::Power { coeff, exponent, domain_cap: DEFAULT_DOMAIN_CAP }
    }

    pub fn table(points: &[[f64; 2]]) -> Result<Self, ComparisonError> {
        Ok(ScalarFn::Table { points: PiecewiseLinear::from_points(points)? })
    }

    /// Tabulates `f` on `n + 1` uniform breakpoints over `[0, cap]`.
    pub fn tabulate(cap: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self, ComparisonError> {
        let r: Vec<f64> = (0..=n).map(|i| cap * i as f64 / n as f64).collect();
        let v = r.iter().map(|&x| f(x)).collect();
        Ok(ScalarFn::Table { points: PiecewiseLinear::new(r, v)? })
    }

    pub fn scaled(self, factor: f64) -> Self {
        ScalarFn::Scaled { factor, inner: Box::new(self) }
    }

    /// `self ∘ inner`
    pub fn after(self, inner: ScalarFn) -> Self {
        ScalarFn::Compose { outer: Box::new(self), inner: Box::new(inner) }
    }

    pub fn inverse(self) -> Self {
        ScalarFn::Inverse { of: Box::new(self), tol: DEFAULT_TOL }
    }

    pub fn class(&self) -> ClassFlags {
        match self {
            ScalarFn::Linear { slope, .. } => ClassFlags { is_k: *slope > 0.0 && slope.is_finite(), zero_at_zero: true },
            ScalarFn::Power { coeff, exponent, .. } => ClassFlags {
                is_k: *coeff > 0.0 && *exponent > 0.0,
                zero_at_zero: *exponent > 0.0 || *coeff == 0.0,
            },
            ScalarFn::Table { points } => {
                let zero_at_zero = points.values()[0] == 0.0;
                let increasing = points.values().windows(2).all(|w| w[1] > w[0]);
                ClassFlags { is_k: zero_at_zero && increasing, zero_at_zero }
            }
            ScalarFn::Scaled { factor, inner } => {
                let c = inner.class();
                ClassFlags { is_k: *factor > 0.0 && c.is_k, zero_at_zero: c.zero_at_zero || *factor == 0.0 }
            }
            ScalarFn::Sum { terms } => {
                let monotone = terms.iter().all(|f| f.class().is_k || f.is_zero());
                ClassFlags {
                    is_k: monotone && terms.iter().any(|f| f.class().is_k),
                    zero_at_zero: terms.iter().all(|f| f.class().zero_at_zero),
                }
            }
            ScalarFn::Compose { outer, inner } => {
                let (o, i) = (outer.class(), inner.class());
                ClassFlags { is_k: o.is_k && i.is_k, zero_at_zero: (o.zero_at_zero && i.zero_at_zero) || outer.is_zero() }
            }
            ScalarFn::Inverse { of, .. } => of.class(),
            ScalarFn::Sigma { k, r_bar, .. } => {
                let ok = *k > 0.0 && *k < 1.0 && *r_bar > 0.0;
                ClassFlags { is_k: ok, zero_at_zero: ok }
            }
        }
    }

    /// True if the function is identically zero on its domain.
    pub fn is_zero(&self) -> bool {
        match self {
            ScalarFn::Linear { slope, .. } => *slope == 0.0,
            ScalarFn::Power { coeff, exponent, .. } => *coeff == 0.0 && *exponent > 0.0,
            ScalarFn::Table { points } => points.values().iter().all(|v| *v == 0.0),
            ScalarFn::Scaled { factor, inner } => *factor == 0.0 || inner.is_zero(),
            ScalarFn::Sum { terms } => terms.iter().all(ScalarFn::is_zero),
            ScalarFn::Compose { outer, inner } => outer.is_zero() || (inner.is_zero() && outer.class().zero_at_zero),
            ScalarFn::Inverse { .. } | ScalarFn::Sigma { .. } => false,
        }
    }

    /// K-function or identically zero: the admissible classes for gains.
    pub fn is_k_or_zero(&self) -> bool {
        self.class().is_k || self.is_zero()
    }

    /// Slope `c` if the function is exactly `c·r` on its domain.
    pub fn linear_slope(&self) -> Option<f64> {
        match self {
            ScalarFn::Linear { slope, .. } => Some(*slope),
            ScalarFn::Power { coeff, exponent, .. } if *exponent == 1.0 => Some(*coeff),
            ScalarFn::Scaled { factor, inner } => inner.linear_slope().map(|s| factor * s),
            ScalarFn::Sum { terms } => terms.iter().map(ScalarFn::linear_slope).sum(),
            ScalarFn::Compose { outer, inner } => Some(outer.linear_slope()? * inner.linear_slope()?),
            ScalarFn::Inverse { of, .. } => of.linear_slope().filter(|s| *s > 0.0).map(|s| 1.0 / s),
            _ => None,
        }
    }

    pub fn domain_cap(&self) -> f64 {
        match self {
            ScalarFn::Linear { domain_cap, .. } | ScalarFn::Power { domain_cap, .. } | ScalarFn::Sigma { domain_cap, .. } => {
                *domain_cap
            }
            ScalarFn::Table { points } => points.cap(),
            ScalarFn::Scaled { inner, .. } => inner.domain_cap(),
            ScalarFn::Sum { terms } => terms.iter().map(ScalarFn::domain_cap).fold(f64::INFINITY, f64::min),
            ScalarFn::Compose { outer, inner } => {
                let cap = inner.domain_cap();
                let limit = outer.domain_cap();
                match inner.eval(cap) {
                    Ok(v) if v <= limit => cap,
                    _ if inner.class().is_k => {
                        // largest r with inner(r) ≤ limit, rounded down
                        let mut lo = 0.0;
                        let mut hi = cap;
                        for _ in 0..MAX_BISECTIONS {
                            let mid = 0.5 * (lo + hi);
                            if mid <= lo || mid >= hi {
                                break;
                            }
                            match inner.eval(mid) {
                                Ok(v) if v <= limit => lo = mid,
                                _ => hi = mid,
                            }
                        }
                        lo
                    }
                    _ => 0.0,
                }
            }
            ScalarFn::Inverse { of, .. } => of.eval(of.domain_cap()).unwrap_or(0.0),
        }
    }

    /// Evaluates the function at `r ∈ [0, domain_cap]`.
    pub fn eval(&self, r: f64) -> Result<f64, ComparisonError> {
        if !(r >= 0.0) || !r.is_finite() {
            return Err(ComparisonError::InvalidParameter(format!("argument {r} is not a finite non-negative real")));
        }
        match self {
            ScalarFn::Linear { slope, domain_cap } => {
                check_cap(r, *domain_cap)?;
                Ok(slope * r)
            }
            ScalarFn::Power { coeff, exponent, domain_cap } => {
                check_cap(r, *domain_cap)?;
                Ok(if r == 0.0 { 0.0 } else { coeff * r.powf(*exponent) })
            }
            ScalarFn::Table { points } => {
                check_cap(r, points.cap())?;
                Ok(points.eval(r))
            }
            ScalarFn::Scaled { factor, inner } => Ok(factor * inner.eval(r)?),
            ScalarFn::Sum { terms } => terms.iter().map(|f| f.eval(r)).sum(),
            ScalarFn::Compose { outer, inner } => outer.eval(inner.eval(r)?),
            ScalarFn::Inverse { of, tol } => match of.as_ref() {
                ScalarFn::Linear { slope, domain_cap } if *slope > 0.0 => {
                    check_cap(r, slope * domain_cap)?;
                    Ok(r / slope)
                }
                ScalarFn::Power { coeff, exponent, domain_cap } if *coeff > 0.0 && *exponent > 0.0 => {
                    check_cap(r, coeff * domain_cap.powf(*exponent))?;
                    Ok((r / coeff).powf(exponent.recip()))
                }
                f => invert_k(f, r, *tol),
            },
            ScalarFn::Sigma { k, r_bar, local, domain_cap } => {
                check_cap(r, *domain_cap)?;
                Ok(sigma_value(*k, *r_bar, *local, r))
            }
        }
    }
}

pub(crate) fn sigma_value(k: f64, r_bar: f64, local: bool, r: f64) -> f64 {
    if r < r_bar {
        (2.0 / k + 1.0) * r
    } else if local {
        (r * r + r_bar * r_bar) / (k * r_bar) + 0.5 * (r + r_bar)
    } else {
        (r * r + r_bar * r_bar) / (k * r_bar) + 0.5 * (3.0 * r_bar - r)
    }
}

fn check_cap(r: f64, cap: f64) -> Result<(), ComparisonError> {
    if r > cap {
        Err(ComparisonError::DomainExceeded { r, cap })
    } else {
        Ok(())
    }
}

/// Inverts a K-function by bisection on `[0, domain_cap]`.
///
/// Returns `r` with `|f(r) − y| ≤ tol` and within `tol / 2` of the exact
/// preimage (or the bracket collapsed to adjacent floats). The result is
/// monotone in `y`.
pub fn invert_k(f: &ScalarFn, y: f64, tol: f64) -> Result<f64, ComparisonError> {
    if !f.class().is_k {
        return Err(ComparisonError::NotKFunction);
    }
    if !(tol > 0.0) {
        return Err(ComparisonError::InvalidParameter(format!("tolerance {tol} must be positive")));
    }
    if !(y >= 0.0) {
        return Err(ComparisonError::InvalidParameter(format!("cannot invert at {y}")));
    }
    let mut hi = f.domain_cap();
    let mut f_hi = f.eval(hi)?;
    if y > f_hi {
        return Err(ComparisonError::RangeExceeded { y, max: f_hi });
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut f_lo = 0.0;
    for _ in 0..MAX_BISECTIONS {
        if f_hi - f_lo <= tol && hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f.eval(mid)?;
        if f_mid < y {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
