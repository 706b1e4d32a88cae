use serde::{Deserialize, Serialize};

use super::{dist, Lattice, Point};
use crate::error::{Error, Result};
use crate::field::Field;

/// Generator for boundary data `g`. All generators are constant (= far field)
/// outside a bounded region, which must sit inside the box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSpec {
    Constant { value: f64 },
    /// `min(1, |x - x0|)`, far field 1.
    DistCap { x0: Point },
    /// `base + slope (x_1 - x0_1) max(0, 1 - |x - x0| / radius)`, far field `base`.
    Ramp { x0: Point, base: f64, slope: f64, radius: f64 },
    /// `far_field + (peak - far_field) max(0, 1 - |x - x0| / radius)`.
    Bump { x0: Point, peak: f64, radius: f64, far_field: f64 },
    /// Explicit node values.
    Table { values: Vec<f64>, far_field: f64 },
}

impl DataSpec {
    pub fn far_field(&self) -> f64 {
        match self {
            DataSpec::Constant { value } => *value,
            DataSpec::DistCap { .. } => 1.0,
            DataSpec::Ramp { base, .. } => *base,
            DataSpec::Bump { far_field, .. } | DataSpec::Table { far_field, .. } => *far_field,
        }
    }

    /// Value of the generator at `x` (`Table` has no pointwise formula).
    pub fn eval(&self, x: &Point) -> Option<f64> {
        Some(match self {
            DataSpec::Constant { value } => *value,
            DataSpec::DistCap { x0 } => dist(x, x0).min(1.0),
            DataSpec::Ramp { x0, base, slope, radius } => {
                base + slope * (x[0] - x0[0]) * (1.0 - dist(x, x0) / radius).max(0.0)
            }
            DataSpec::Bump {
                x0,
                peak,
                radius,
                far_field,
            } => far_field + (peak - far_field) * (1.0 - dist(x, x0) / radius).max(0.0),
            DataSpec::Table { .. } => return None,
        })
    }

    /// Node values on `lattice`; fails if the data are not equal to the far field on
    /// the outermost node layer.
    pub fn generate(&self, lattice: &Lattice) -> Result<Field> {
        let values: Vec<f64> = match self {
            DataSpec::Table { values, .. } => {
                if values.len() != lattice.node_count() {
                    return Err(Error::config(
                        "data.values",
                        format!("{} values for {} nodes", values.len(), lattice.node_count()),
                    ));
                }
                values.clone()
            }
            DataSpec::Ramp { radius, .. } | DataSpec::Bump { radius, .. } if !(*radius > 0.0) => {
                return Err(Error::config("data.radius", "radius must be positive"));
            }
            _ => (0..lattice.node_count())
                .map(|i| self.eval(&lattice.node_point(i)).unwrap_or(0.0))
                .collect(),
        };
        let g_inf = self.far_field();
        if !g_inf.is_finite() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("data", "data values must be finite"));
        }
        for (i, v) in values.iter().enumerate() {
            if lattice.is_edge_node(i) && *v != g_inf {
                return Err(Error::config(
                    "data",
                    format!("data must equal the far field {g_inf} near the box edge (node {i} has {v})"),
                ));
            }
        }
        Field::new(values, g_inf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dist_cap_properties() {
        let l = Lattice::default_box(1, 64).unwrap();
        let x0 = l.node_point(31);
        let g = DataSpec::DistCap { x0 }.generate(&l).unwrap();
        assert_eq!(g.values()[31], 0.0);
        assert!(g.values().iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(g.far_field(), 1.0);
    }

    #[test]
    fn edge_contract_enforced() {
        let l = Lattice::default_box(1, 16).unwrap();
        let bad = DataSpec::Ramp {
            x0: [0.0, 0.0],
            base: 0.0,
            slope: 1.0,
            radius: 3.0,
        };
        assert!(bad.generate(&l).is_err());
        let good = DataSpec::Ramp {
            x0: [0.0, 0.0],
            base: 0.5,
            slope: 1.0,
            radius: 1.0,
        };
        let g = good.generate(&l).unwrap();
        assert_eq!(g.values()[0], 0.5);
        assert!(DataSpec::Table { values: vec![0.0; 3], far_field: 0.0 }.generate(&l).is_err());
    }
}
