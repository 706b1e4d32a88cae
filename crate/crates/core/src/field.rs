use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Node values on the whole box plus the constant value outside the box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    values: Vec<f64>,
    far_field: f64,
}

impl Field {
    pub fn new(values: Vec<f64>, far_field: f64) -> Result<Self> {
        if !far_field.is_finite() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("field values must be finite".into()));
        }
        Ok(Self { values, far_field })
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self {
            values: vec![c; n],
            far_field: c,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn far_field(&self) -> f64 {
        self.far_field
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Pointwise `min(max(u, lo), hi)`, far field included.
    pub fn clamped(&self, lo: f64, hi: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v.clamp(lo, hi)).collect(),
            far_field: self.far_field.clamp(lo, hi),
        }
    }

    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold((self.far_field - other.far_field).abs(), f64::max)
    }
}
