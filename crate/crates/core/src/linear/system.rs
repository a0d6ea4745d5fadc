use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::CertError;
use crate::matrix_serde::{from_rows, to_rows};
use crate::system::{Dims, Dynamics};

/// `x⁺ = Ax + Bu + Ew`, `y = Cx + Du + Fv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSystem", into = "RawSystem")]
pub struct LinearSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub e: DMatrix<f64>,
    pub f: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    c: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    d: Vec<Vec<f64>>,
    #[serde(rename = "E")]
    e: Vec<Vec<f64>>,
    #[serde(rename = "F")]
    f: Vec<Vec<f64>>,
}

impl TryFrom<RawSystem> for LinearSystem {
    type Error = String;
    fn try_from(raw: RawSystem) -> Result<Self, String> {
        let a = from_rows(&raw.a)?;
        let n_x = a.nrows();
        let b = from_rows(&raw.b)?;
        let c = from_rows(&raw.c)?;
        let n_y = c.nrows();
        // an empty row list carries no column count; take it from the partner matrices
        let c = if n_y == 0 { DMatrix::zeros(0, n_x) } else { c };
        let d = from_rows(&raw.d)?;
        let d = if d.nrows() == 0 { DMatrix::zeros(0, b.ncols()) } else { d };
        let e = from_rows(&raw.e)?;
        let f = from_rows(&raw.f)?;
        LinearSystem::new(a, b, c, d, e, f).map_err(|e| e.to_string())
    }
}

impl From<LinearSystem> for RawSystem {
    fn from(s: LinearSystem) -> Self {
        RawSystem {
            a: to_rows(&s.a),
            b: to_rows(&s.b),
            c: to_rows(&s.c),
            d: to_rows(&s.d),
            e: to_rows(&s.e),
            f: to_rows(&s.f),
        }
    }
}

impl LinearSystem {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        e: DMatrix<f64>,
        f: DMatrix<f64>,
    ) -> Result<Self, CertError> {
        let n_x = a.nrows();
        let n_y = c.nrows();
        let check = |name: &str, m: &DMatrix<f64>, rows: usize, cols: Option<usize>| {
            let ok = m.nrows() == rows && cols.is_none_or(|c| m.ncols() == c);
            if ok {
                Ok(())
            } else {
                Err(CertError::Dimension(format!(
                    "{name} is {}×{}, expected {rows}×{}",
                    m.nrows(),
                    m.ncols(),
                    cols.map_or("*".to_string(), |c| c.to_string())
                )))
            }
        };
        check("A", &a, n_x, Some(n_x))?;
        check("B", &b, n_x, None)?;
        check("C", &c, n_y, Some(n_x))?;
        check("D", &d, n_y, Some(b.ncols()))?;
        check("E", &e, n_x, None)?;
        check("F", &f, n_y, None)?;
        Ok(Self { a, b, c, d, e, f })
    }

    /// Builds a system from row-major slices; `dims` fixes every shape.
    pub fn from_slices(dims: Dims, a: &[f64], b: &[f64], c: &[f64], d: &[f64], e: &[f64], f: &[f64]) -> Result<Self, CertError> {
        let m = |r: usize, c: usize, s: &[f64], name: &str| {
            if s.len() != r * c {
                return Err(CertError::Dimension(format!("{name} needs {} entries, got {}", r * c, s.len())));
            }
            Ok(DMatrix::from_row_slice(r, c, s))
        };
        let Dims { n_x, n_u, n_w, n_v, n_y } = dims;
        Self::new(
            m(n_x, n_x, a, "A")?,
            m(n_x, n_u, b, "B")?,
            m(n_y, n_x, c, "C")?,
            m(n_y, n_u, d, "D")?,
            m(n_x, n_w, e, "E")?,
            m(n_y, n_v, f, "F")?,
        )
    }

    pub fn check_gain(&self, l: &DMatrix<f64>) -> Result<(), CertError> {
        let (n_x, n_y) = (self.a.nrows(), self.c.nrows());
        if l.shape() != (n_x, n_y) {
            return Err(CertError::Dimension(format!("L is {}×{}, expected {n_x}×{n_y}", l.nrows(), l.ncols())));
        }
        Ok(())
    }

    /// `A + LC`
    pub fn a_l(&self, l: &DMatrix<f64>) -> DMatrix<f64> {
        &self.a + l * &self.c
    }

    /// `B + LD`
    pub fn b_l(&self, l: &DMatrix<f64>) -> DMatrix<f64> {
        &self.b + l * &self.d
    }
}

impl Dynamics for LinearSystem {
    fn dims(&self) -> Dims {
        Dims { n_x: self.a.nrows(), n_u: self.b.ncols(), n_w: self.e.ncols(), n_v: self.f.ncols(), n_y: self.c.nrows() }
    }

    fn step(&self, x: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u + &self.e * w
    }

    fn output(&self, x: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        &self.c * x + &self.d * u + &self.f * v
    }
}
