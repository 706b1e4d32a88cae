use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Points are stored with two coordinates; in one dimension the second is zero.
pub type Point = [f64; 2];

pub fn dist(a: &Point, b: &Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Axis-aligned cube `lo + [0, side]^dim`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub dim: usize,
    pub lo: Point,
    pub side: f64,
}

impl AxisBox {
    pub fn hi(&self, axis: usize) -> f64 {
        self.lo[axis] + self.side
    }

    pub fn contains_strictly(&self, x: &Point) -> bool {
        (0..self.dim).all(|a| x[a] > self.lo[a] && x[a] < self.hi(a))
    }
}

/// Uniform node-centred lattice: `cells` cells per axis, one node per cell centre.
/// Node index is `ix + cells * iy` (axis 0 fastest).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    dim: usize,
    lo: Point,
    side: f64,
    cells: usize,
}

impl Lattice {
    pub fn new(dim: usize, lo: Point, side: f64, cells: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::config("lattice.dim", format!("dimension must be 1 or 2, got {dim}")));
        }
        if !(side.is_finite() && side > 0.0) {
            return Err(Error::config("lattice.side", "box side must be positive"));
        }
        if cells < 8 || !cells.is_power_of_two() {
            return Err(Error::config(
                "lattice.cells",
                format!("cells per axis must be a power of two >= 8, got {cells}"),
            ));
        }
        let lo = if dim == 1 { [lo[0], 0.0] } else { lo };
        Ok(Self { dim, lo, side, cells })
    }

    /// `[-half, half]^dim`.
    pub fn centered(dim: usize, half: f64, cells: usize) -> Result<Self> {
        Self::new(dim, [-half, -half], 2.0 * half, cells)
    }

    /// The default computational box `[-2, 2]^dim`.
    pub fn default_box(dim: usize, cells: usize) -> Result<Self> {
        Self::centered(dim, 2.0, cells)
    }

    /// Same box with twice as many cells per axis.
    pub fn refined(&self) -> Self {
        Self {
            cells: self.cells * 2,
            ..*self
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn cells(&self) -> usize {
        self.cells
    }
    pub fn lo(&self) -> Point {
        self.lo
    }
    pub fn side(&self) -> f64 {
        self.side
    }
    pub fn h(&self) -> f64 {
        self.side / self.cells as f64
    }
    /// Cell volume `h^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.dim as i32)
    }

    pub fn node_count(&self) -> usize {
        self.cells.pow(self.dim as u32)
    }

    pub fn box_region(&self) -> AxisBox {
        AxisBox {
            dim: self.dim,
            lo: self.lo,
            side: self.side,
        }
    }

    pub fn coords(&self, i: usize) -> [usize; 2] {
        if self.dim == 1 {
            [i, 0]
        } else {
            [i % self.cells, i / self.cells]
        }
    }

    pub fn index(&self, c: [usize; 2]) -> usize {
        if self.dim == 1 {
            c[0]
        } else {
            c[0] + self.cells * c[1]
        }
    }

    pub fn axis_coord(&self, axis: usize, k: usize) -> f64 {
        self.lo[axis] + (k as f64 + 0.5) * self.h()
    }

    pub fn node_point(&self, i: usize) -> Point {
        let c = self.coords(i);
        if self.dim == 1 {
            [self.axis_coord(0, c[0]), 0.0]
        } else {
            [self.axis_coord(0, c[0]), self.axis_coord(1, c[1])]
        }
    }

    pub fn points(&self) -> Vec<Point> {
        (0..self.node_count()).map(|i| self.node_point(i)).collect()
    }

    /// Nearest node; ties go to the lowest index.
    pub fn nearest_node(&self, x: &Point) -> usize {
        let h = self.h();
        let mut c = [0usize; 2];
        for a in 0..self.dim {
            let t = (x[a] - self.lo[a]) / h - 0.5;
            // round half down so that ties pick the lower coordinate
            let k = (t - 0.5).ceil().clamp(0.0, (self.cells - 1) as f64);
            c[a] = k as usize;
        }
        self.index(c)
    }

    /// Nodes in the outermost layer, i.e. within one cell of the box edge.
    pub fn is_edge_node(&self, i: usize) -> bool {
        let c = self.coords(i);
        (0..self.dim).any(|a| c[a] == 0 || c[a] == self.cells - 1)
    }

    pub fn contains_strictly(&self, x: &Point) -> bool {
        self.box_region().contains_strictly(x)
    }
}
