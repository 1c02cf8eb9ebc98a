//! JSON encodings for numbers, scalars and matrices.
//!
//! Floats are written with 17 significant digits so every `f64` survives a
//! write/read cycle bit for bit. Real-field values are bare numbers, complex
//! ones `[re, im]` pairs; matrices are arrays of rows.

use std::collections::BTreeMap;
use std::fmt;

use bisep_core::linalg::{Matrix, Scalar};
use bisep_core::Field;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::value::RawValue;

/// `f64` that serializes with 17 significant digits. Non-finite values are
/// written as `null` and read back as NaN.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F17(pub f64);

impl fmt::Display for F17 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.16e}", self.0)
    }
}

impl Serialize for F17 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return serializer.serialize_none();
        }
        let raw = RawValue::from_string(self.to_string()).map_err(serde::ser::Error::custom)?;
        raw.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for F17 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        Ok(F17(Option::<f64>::deserialize(deserializer)?.unwrap_or(f64::NAN)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum JsonScalar {
    Real(F17),
    Complex([F17; 2]),
}

impl JsonScalar {
    pub fn from_scalar(z: Scalar, field: Field) -> Self {
        match field {
            Field::Real => JsonScalar::Real(F17(z.re)),
            Field::Complex => JsonScalar::Complex([F17(z.re), F17(z.im)]),
        }
    }

    pub fn to_scalar(self) -> Scalar {
        match self {
            JsonScalar::Real(x) => Scalar::new(x.0, 0.0),
            JsonScalar::Complex([a, b]) => Scalar::new(a.0, b.0),
        }
    }
}

pub type JsonMatrix = Vec<Vec<JsonScalar>>;

pub fn matrix_to_json(m: &Matrix, field: Field) -> JsonMatrix {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| JsonScalar::from_scalar(m[(r, c)], field)).collect())
        .collect()
}

/// Inverse of [`matrix_to_json`]; ragged input gives `None`.
pub fn json_to_matrix(rows: &JsonMatrix) -> Option<Matrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return None;
    }
    Some(Matrix::from_fn(nrows, ncols, |r, c| rows[r][c].to_scalar()))
}

/// One value, or one per point label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerPoint<T> {
    Single(T),
    Points(BTreeMap<String, T>),
}
