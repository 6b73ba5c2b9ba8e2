//! Serde adapters for dense matrices (row-major nested arrays) and for
//! one-sided bounds (a number or the string `"unbounded"`).

use nalgebra::DMatrix;
use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Builds a matrix from rows. `ncols` is used when there are no rows to
/// infer it from.
pub fn from_rows(rows: &[Vec<f64>], ncols: usize) -> Result<DMatrix<f64>, String> {
    let c = rows.first().map_or(ncols, Vec::len);
    if let Some(bad) = rows.iter().position(|r| r.len() != c) {
        return Err(format!("row {} has {} entries, expected {c}", bad + 1, rows[bad].len()));
    }
    Ok(DMatrix::from_fn(rows.len(), c, |i, j| rows[i][j]))
}

pub mod matrix_rows {
    use super::*;

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        from_rows(&rows, 0).map_err(de::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum BoundRepr {
    Value(f64),
    Marker(String),
}

pub mod bound {
    use super::*;

    pub const UNBOUNDED: &str = "unbounded";

    pub fn serialize<S: Serializer>(b: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match b {
            Some(v) => BoundRepr::Value(*v),
            None => BoundRepr::Marker(UNBOUNDED.to_string()),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match BoundRepr::deserialize(d)? {
            BoundRepr::Value(v) if v.is_finite() => Ok(Some(v)),
            BoundRepr::Value(v) => Err(de::Error::custom(format!("bound must be finite or \"{UNBOUNDED}\", got {v}"))),
            BoundRepr::Marker(m) if m == UNBOUNDED => Ok(None),
            BoundRepr::Marker(m) => Err(de::Error::custom(format!("unknown bound marker {m:?}"))),
        }
    }
}
