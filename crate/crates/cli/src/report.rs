//! Machine-readable command reports.

use std::collections::BTreeMap;

use bisep_core::funcalg::{FnCounterexample, PointwiseForm};
use bisep_core::separating::{Counterexample, Direction};
use bisep_core::structure::ConjugationForm;
use bisep_core::{Field, FieldConfig};
use serde::{Deserialize, Serialize};

use crate::json::{matrix_to_json, JsonMatrix, JsonScalar, PerPoint, F17};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub tol_rel: F17,
    pub tol_abs: F17,
}

impl From<&FieldConfig> for Tolerances {
    fn from(cfg: &FieldConfig) -> Self {
        Tolerances {
            tol_rel: F17(cfg.tol_rel()),
            tol_abs: F17(cfg.tol_abs()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    /// `‖A·B‖_F`, or its pointwise maximum for functions.
    pub product_in: F17,
    /// `‖T(A)·T(B)‖_F`
    pub violation: F17,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleOut {
    #[serde(rename = "A")]
    pub a: PerPoint<JsonMatrix>,
    #[serde(rename = "B")]
    pub b: PerPoint<JsonMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<String>,
    pub norms: Norms,
}

impl CounterexampleOut {
    pub fn from_matrix_pair(cx: &Counterexample, direction: Option<Direction>, field: Field) -> Self {
        CounterexampleOut {
            a: PerPoint::Single(matrix_to_json(&cx.a, field)),
            b: PerPoint::Single(matrix_to_json(&cx.b, field)),
            point: None,
            direction: direction.map(|d| d.as_str().to_string()),
            norms: Norms {
                product_in: F17(cx.product_in_norm),
                violation: F17(cx.violation_norm),
            },
        }
    }

    pub fn from_functions(cx: &FnCounterexample, direction: Option<Direction>, field: Field) -> Self {
        let as_map = |f: &bisep_core::funcalg::MatrixFunction| {
            PerPoint::Points(
                f.space()
                    .labels()
                    .iter()
                    .zip(f.values())
                    .map(|(l, v)| (l.clone(), matrix_to_json(v, field)))
                    .collect(),
            )
        };
        CounterexampleOut {
            a: as_map(&cx.f1),
            b: as_map(&cx.f2),
            point: Some(cx.point.clone()),
            direction: direction.map(|d| d.as_str().to_string()),
            norms: Norms {
                product_in: F17(cx.product_in_norm),
                violation: F17(cx.violation_norm),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub cases: usize,
    pub passed: usize,
    pub failed: usize,
    /// Set when no case ran at all.
    pub zero_cases: bool,
    pub worst_residual: F17,
    pub worst_alpha_error: F17,
    pub worst_s_error: F17,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<PerPoint<JsonScalar>>,
    #[serde(rename = "S", default, skip_serializing_if = "Option::is_none")]
    pub s: Option<PerPoint<JsonMatrix>>,
    /// Output label to the input label it draws on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<BTreeMap<String, String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<F17>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<CounterexampleOut>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strictly_separating: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_step: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub files: Option<BTreeMap<String, String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<Summary>,
    pub elapsed_ms: F17,
}

impl Report {
    pub fn new(command: &str, status: &str, cfg: &FieldConfig) -> Self {
        Report {
            command: command.to_string(),
            status: status.to_string(),
            kind: None,
            alpha: None,
            s: None,
            phi: None,
            residual: None,
            counterexample: None,
            strictly_separating: None,
            failed_step: None,
            error: None,
            tolerances: cfg.into(),
            seed: None,
            files: None,
            summary: None,
            elapsed_ms: F17(0.0),
        }
    }

    pub fn with_conjugation(mut self, form: &ConjugationForm, field: Field) -> Self {
        self.alpha = Some(PerPoint::Single(JsonScalar::from_scalar(form.alpha(), field)));
        self.s = Some(PerPoint::Single(matrix_to_json(form.s(), field)));
        self
    }

    pub fn with_pointwise(mut self, form: &PointwiseForm, field: Field) -> Self {
        let labels = form.x_out().labels();
        self.alpha = Some(PerPoint::Points(
            labels
                .iter()
                .enumerate()
                .map(|(x, l)| (l.clone(), JsonScalar::from_scalar(form.form(x).alpha(), field)))
                .collect(),
        ));
        self.s = Some(PerPoint::Points(
            labels
                .iter()
                .enumerate()
                .map(|(x, l)| (l.clone(), matrix_to_json(form.form(x).s(), field)))
                .collect(),
        ));
        self.phi = Some(form.phi_table().into_iter().collect());
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use bisep_core::harness::{gen_pointwise, DEFAULT_ALPHA_RANGE, DEFAULT_COND_CAP};

    #[test]
    fn report_round_trips() {
        let cfg = FieldConfig::complex();
        let b = gen_pointwise(3, 2, 9, DEFAULT_ALPHA_RANGE, DEFAULT_COND_CAP, &cfg).unwrap();
        let mut r = Report::new("decompose", "decomposed", &cfg).with_pointwise(b.pointwise().unwrap(), Field::Complex);
        r.residual = Some(F17(1.0 / 3.0));
        r.elapsed_ms = F17(12.345678901234567);
        r.seed = Some(u64::MAX);
        let back: Report = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }
}
