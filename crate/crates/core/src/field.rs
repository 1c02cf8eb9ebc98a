//! Scalar-field selection and the tolerance policy shared by every check.

use thiserror::Error;

/// Scalar field the maps are defined over.
///
/// Arithmetic is always carried out in complex double precision; the field
/// controls what the generators draw and what the file formats accept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Field {
    Real,
    Complex,
}

impl Field {
    pub fn as_str(self) -> &'static str {
        match self {
            Field::Real => "real",
            Field::Complex => "complex",
        }
    }

    pub fn parse(s: &str) -> Option<Field> {
        match s {
            "real" => Some(Field::Real),
            "complex" => Some(Field::Complex),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("tol_rel must be positive and finite, got {0}")]
    BadRelativeTolerance(f64),
    #[error("tol_abs must be positive and finite, got {0}")]
    BadAbsoluteTolerance(f64),
}

pub const DEFAULT_TOL_REL: f64 = 1e-9;
pub const DEFAULT_TOL_ABS: f64 = 1e-12;

/// Field plus tolerances.
///
/// A quantity `x` measured against a context scale `s` counts as zero when
/// `|x| <= tol_abs + tol_rel * s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldConfig {
    field: Field,
    tol_rel: f64,
    tol_abs: f64,
}

impl FieldConfig {
    pub fn new(field: Field, tol_rel: f64, tol_abs: f64) -> Result<Self, ConfigError> {
        if !(tol_rel.is_finite() && tol_rel > 0.0) {
            return Err(ConfigError::BadRelativeTolerance(tol_rel));
        }
        if !(tol_abs.is_finite() && tol_abs > 0.0) {
            return Err(ConfigError::BadAbsoluteTolerance(tol_abs));
        }
        Ok(Self {
            field,
            tol_rel,
            tol_abs,
        })
    }

    pub fn real() -> Self {
        Self {
            field: Field::Real,
            tol_rel: DEFAULT_TOL_REL,
            tol_abs: DEFAULT_TOL_ABS,
        }
    }

    pub fn complex() -> Self {
        Self {
            field: Field::Complex,
            ..Self::real()
        }
    }

    pub fn with_tol_rel(self, tol_rel: f64) -> Result<Self, ConfigError> {
        Self::new(self.field, tol_rel, self.tol_abs)
    }

    pub fn with_field(self, field: Field) -> Self {
        Self { field, ..self }
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn tol_rel(&self) -> f64 {
        self.tol_rel
    }

    pub fn tol_abs(&self) -> f64 {
        self.tol_abs
    }

    /// Largest magnitude still treated as zero at the given scale.
    pub fn threshold(&self, scale: f64) -> f64 {
        self.tol_abs + self.tol_rel * scale
    }

    pub fn is_negligible(&self, x: f64, scale: f64) -> bool {
        x.abs() <= self.threshold(scale)
    }
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self::real()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_positive_tolerances() {
        assert!(FieldConfig::new(Field::Real, 0.0, 1e-12).is_err());
        assert!(FieldConfig::new(Field::Real, 1e-9, -1.0).is_err());
        assert!(FieldConfig::new(Field::Real, f64::NAN, 1e-12).is_err());
        assert!(FieldConfig::new(Field::Complex, 1e-9, 1e-12).is_ok());
    }

    #[test]
    fn threshold_combines_absolute_and_relative() {
        let cfg = FieldConfig::real();
        assert_eq!(cfg.threshold(0.0), 1e-12);
        assert!(cfg.is_negligible(5e-10, 1.0));
        assert!(!cfg.is_negligible(2e-9, 1.0));
    }

    #[test]
    fn field_names_round_trip() {
        for f in [Field::Real, Field::Complex] {
            assert_eq!(Field::parse(f.as_str()), Some(f));
        }
        assert_eq!(Field::parse("quaternion"), None);
    }
}
