//! Instance files: a superoperator or block superoperator in JSON.
//!
//! ```json
//! {"kind": "superop", "field": "real", "n_in": 2, "n_out": 2,
//!  "vec_convention": "column-major", "matrix": [[...], ...]}
//! ```
//!
//! `matrix` has `n_out²` rows and `n_in²` columns; entry `(r, c)` sends
//! `vec(A)[c]` to `vec(T(A))[r]` with `vec` stacking columns. Block files use
//! `"kind": "big_superop"`, `points_in`, `points_out` and a `blocks` object
//! keyed `"<output label>/<input label>"`; absent blocks are zero.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use bisep_core::funcalg::{BigSuperoperator, DiscreteSpace};
use bisep_core::linalg::{Matrix, Scalar};
use bisep_core::{Field, FieldConfig, Superoperator};
use serde::Serialize;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::json::{matrix_to_json, JsonMatrix};

pub const VEC_CONVENTION: &str = "column-major";

const KNOWN_FIELDS: [&str; 9] = [
    "kind",
    "field",
    "n_in",
    "n_out",
    "vec_convention",
    "matrix",
    "points_in",
    "points_out",
    "blocks",
];

#[derive(Debug, Error)]
pub enum InputError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("field `{field}`: {message}")]
    Schema { field: String, message: String },
}

fn schema(field: impl Into<String>, message: impl Into<String>) -> InputError {
    InputError::Schema {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InstanceMap {
    Superop(Superoperator),
    Big(BigSuperoperator),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub field: Field,
    pub map: InstanceMap,
}

impl Instance {
    pub fn kind(&self) -> &'static str {
        match self.map {
            InstanceMap::Superop(_) => "superop",
            InstanceMap::Big(_) => "big_superop",
        }
    }
}

pub fn read_instance(path: &Path, cfg: &FieldConfig) -> Result<Instance, InputError> {
    let text = fs::read_to_string(path).map_err(|e| InputError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_instance(&text, cfg)
}

/// Parses and validates an instance. `cfg` supplies tolerances; the field
/// comes from the file.
pub fn parse_instance(text: &str, cfg: &FieldConfig) -> Result<Instance, InputError> {
    let value: Value = serde_json::from_str(text).map_err(|e| InputError::Json(e.to_string()))?;
    let Value::Object(obj) = value else {
        return Err(schema("<root>", "expected a JSON object"));
    };
    if let Some(unknown) = obj.keys().find(|k| !KNOWN_FIELDS.contains(&k.as_str())) {
        return Err(schema(unknown.clone(), "unknown field"));
    }
    let kind = required_str(&obj, "kind")?;
    let field_name = required_str(&obj, "field")?;
    let field = Field::parse(field_name).ok_or_else(|| schema("field", format!("expected \"real\" or \"complex\", found {field_name:?}")))?;
    let cfg = cfg.with_field(field);
    let convention = required_str(&obj, "vec_convention")?;
    if convention != VEC_CONVENTION {
        return Err(schema(
            "vec_convention",
            format!("only {VEC_CONVENTION:?} is supported, found {convention:?}"),
        ));
    }
    let n_in = required_dim(&obj, "n_in")?;
    let n_out = required_dim(&obj, "n_out")?;

    let map = match kind {
        "superop" => {
            for key in ["points_in", "points_out", "blocks"] {
                if obj.contains_key(key) {
                    return Err(schema(key, "only allowed when kind is \"big_superop\""));
                }
            }
            let raw = obj.get("matrix").ok_or_else(|| schema("matrix", "missing"))?;
            let mat = parse_matrix(raw, "matrix", n_out * n_out, n_in * n_in, field)?;
            InstanceMap::Superop(Superoperator::new(n_in, n_out, mat, cfg).map_err(|e| schema("matrix", e.to_string()))?)
        }
        "big_superop" => {
            if obj.contains_key("matrix") {
                return Err(schema("matrix", "not allowed when kind is \"big_superop\"; use `blocks`"));
            }
            let x_in = parse_points(&obj, "points_in")?;
            let x_out = parse_points(&obj, "points_out")?;
            let mut t = BigSuperoperator::zero(x_in.clone(), x_out.clone(), n_in, n_out, cfg);
            let blocks = match obj.get("blocks") {
                Some(Value::Object(b)) => b,
                Some(_) => return Err(schema("blocks", "expected an object keyed \"<output>/<input>\"")),
                None => return Err(schema("blocks", "missing")),
            };
            for (key, raw) in blocks {
                let path = format!("blocks[{key:?}]");
                let (out_label, in_label) = key
                    .split_once('/')
                    .ok_or_else(|| schema(path.clone(), "key must look like \"<output>/<input>\""))?;
                let x2 = x_out
                    .index_of(out_label)
                    .ok_or_else(|| schema(path.clone(), format!("{out_label:?} is not in points_out")))?;
                let x1 = x_in
                    .index_of(in_label)
                    .ok_or_else(|| schema(path.clone(), format!("{in_label:?} is not in points_in")))?;
                let mat = parse_matrix(raw, &path, n_out * n_out, n_in * n_in, field)?;
                let block = Superoperator::new(n_in, n_out, mat, cfg).map_err(|e| schema(path.clone(), e.to_string()))?;
                t.set_block(x2, x1, block).map_err(|e| schema(path, e.to_string()))?;
            }
            InstanceMap::Big(t)
        }
        other => {
            return Err(schema(
                "kind",
                format!("expected \"superop\" or \"big_superop\", found {other:?}"),
            ))
        }
    };
    Ok(Instance { field, map })
}

fn required_str<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a str, InputError> {
    match obj.get(key) {
        Some(Value::String(s)) => Ok(s),
        Some(_) => Err(schema(key, "expected a string")),
        None => Err(schema(key, "missing")),
    }
}

fn required_dim(obj: &Map<String, Value>, key: &str) -> Result<usize, InputError> {
    match obj.get(key) {
        Some(v) => match v.as_u64() {
            Some(n) if n >= 1 && n <= 64 => Ok(n as usize),
            _ => Err(schema(key, format!("expected an integer between 1 and 64, found {v}"))),
        },
        None => Err(schema(key, "missing")),
    }
}

fn parse_points(obj: &Map<String, Value>, key: &str) -> Result<DiscreteSpace, InputError> {
    let arr = match obj.get(key) {
        Some(Value::Array(a)) => a,
        Some(_) => return Err(schema(key, "expected an array of labels")),
        None => return Err(schema(key, "missing")),
    };
    let labels = arr
        .iter()
        .enumerate()
        .map(|(i, v)| v.as_str().map(str::to_string).ok_or_else(|| schema(format!("{key}[{i}]"), "expected a string")))
        .collect::<Result<Vec<_>, _>>()?;
    DiscreteSpace::new(labels).map_err(|e| schema(key, e.to_string()))
}

fn parse_number(v: &Value, path: &str) -> Result<f64, InputError> {
    v.as_f64().ok_or_else(|| schema(path, format!("expected a number, found {v}")))
}

fn parse_scalar(v: &Value, path: &str, field: Field) -> Result<Scalar, InputError> {
    match field {
        Field::Real => Ok(Scalar::new(parse_number(v, path)?, 0.0)),
        Field::Complex => match v {
            Value::Array(pair) if pair.len() == 2 => Ok(Scalar::new(
                parse_number(&pair[0], &format!("{path}[0]"))?,
                parse_number(&pair[1], &format!("{path}[1]"))?,
            )),
            _ => Err(schema(path, format!("expected a [re, im] pair, found {v}"))),
        },
    }
}

fn parse_matrix(v: &Value, path: &str, rows: usize, cols: usize, field: Field) -> Result<Matrix, InputError> {
    let Value::Array(row_values) = v else {
        return Err(schema(path, "expected an array of rows"));
    };
    if row_values.len() != rows {
        return Err(schema(path, format!("expected {rows} rows, found {}", row_values.len())));
    }
    let mut m = Matrix::zeros(rows, cols);
    for (r, row) in row_values.iter().enumerate() {
        let row_path = format!("{path}[{r}]");
        let Value::Array(entries) = row else {
            return Err(schema(row_path, "expected an array"));
        };
        if entries.len() != cols {
            return Err(schema(row_path, format!("expected {cols} columns, found {}", entries.len())));
        }
        for (c, e) in entries.iter().enumerate() {
            m[(r, c)] = parse_scalar(e, &format!("{row_path}[{c}]"), field)?;
        }
    }
    Ok(m)
}

#[derive(Serialize)]
struct InstanceOut<'a> {
    kind: &'a str,
    field: &'a str,
    n_in: usize,
    n_out: usize,
    vec_convention: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    matrix: Option<JsonMatrix>,
    #[serde(skip_serializing_if = "Option::is_none")]
    points_in: Option<&'a [String]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    points_out: Option<&'a [String]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    blocks: Option<BTreeMap<String, JsonMatrix>>,
}

/// Serializes an instance; block files list only blocks with a nonzero
/// entry.
pub fn instance_to_json(instance: &Instance) -> String {
    let field = instance.field;
    let out = match &instance.map {
        InstanceMap::Superop(t) => InstanceOut {
            kind: "superop",
            field: field.as_str(),
            n_in: t.n_in(),
            n_out: t.n_out(),
            vec_convention: VEC_CONVENTION,
            matrix: Some(matrix_to_json(t.mat(), field)),
            points_in: None,
            points_out: None,
            blocks: None,
        },
        InstanceMap::Big(t) => {
            let mut blocks = BTreeMap::new();
            for (x2, out_label) in t.x_out().labels().iter().enumerate() {
                for (x1, in_label) in t.x_in().labels().iter().enumerate() {
                    let b = t.block(x2, x1);
                    if b.mat().iter().any(|z| z.norm() != 0.0) {
                        blocks.insert(format!("{out_label}/{in_label}"), matrix_to_json(b.mat(), field));
                    }
                }
            }
            InstanceOut {
                kind: "big_superop",
                field: field.as_str(),
                n_in: t.n(),
                n_out: t.m(),
                vec_convention: VEC_CONVENTION,
                matrix: None,
                points_in: Some(t.x_in().labels()),
                points_out: Some(t.x_out().labels()),
                blocks: Some(blocks),
            }
        }
    };
    serde_json::to_string_pretty(&out).expect("instance serializes")
}
