//! Row-major JSON (de)serialization for dense matrices.
//!
//! Matrices are written as arrays of rows. A matrix with zero columns is
//! written as a list of empty rows so the row count survives the round trip;
//! a matrix with zero rows is written as `[]`. `serde_json` emits the
//! shortest decimal that round-trips each `f64`, so no precision is lost.

use nalgebra::DMatrix;
use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, String> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(format!("ragged matrix: row {i} has {} entries, expected {ncols}", r.len()));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err("matrix entries must be finite".into());
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
    to_rows(m).serialize(s)
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
    let rows = Vec::<Vec<f64>>::deserialize(d)?;
    from_rows(&rows).map_err(D::Error::custom)
}

pub mod option {
    use super::*;

    pub fn serialize<S: Serializer>(m: &Option<DMatrix<f64>>, s: S) -> Result<S::Ok, S::Error> {
        m.as_ref().map(to_rows).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<DMatrix<f64>>, D::Error> {
        Option::<Vec<Vec<f64>>>::deserialize(d)?
            .map(|rows| from_rows(&rows).map_err(D::Error::custom))
            .transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_column_matrix_keeps_rows() {
        let m = DMatrix::<f64>::zeros(3, 0);
        let back = from_rows(&to_rows(&m)).unwrap();
        assert_eq!(back.shape(), (3, 0));
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
    }
}
