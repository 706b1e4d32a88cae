use rayon::prelude::*;

use super::quadrature::sgn;
use super::{KernelSpec, Multiplier};
use crate::domain::Lattice;
use crate::error::{Error, Result};

/// Offsets with sup norm up to this radius use the moment-matched near-field rule.
pub const NEAR_RADIUS: usize = 2;

/// Pair weights `W_ij` and per-node tail weights `T_i` on a lattice.
///
/// The radial part depends only on `|offset|` componentwise and is stored as a
/// quarter table; the multiplier enters as a factor `base + amp ψ_i ψ_j` evaluated at
/// node centres (`ψ = sgn x_1`).
#[derive(Debug, Clone)]
pub struct WeightTable {
    kernel: KernelSpec,
    lattice: Lattice,
    radial: Vec<f64>,
    tail: Vec<f64>,
    profile: Vec<f64>,
    base: f64,
    amp: f64,
    row_sums: Vec<f64>,
}

pub fn build_weight_table(kernel: &KernelSpec, lattice: &Lattice) -> Result<WeightTable> {
    if kernel.dim() != lattice.dim() {
        return Err(Error::Domain(format!(
            "kernel dimension {} does not match lattice dimension {}",
            kernel.dim(),
            lattice.dim()
        )));
    }
    let m = lattice.cells();
    let dim = lattice.dim();
    let h = lattice.h();
    let len = m.pow(dim as u32);
    let radial: Vec<f64> = (0..len)
        .into_par_iter()
        .map(|k| {
            let (ax, ay) = if dim == 1 { (k, 0) } else { (k % m, k / m) };
            if ax == 0 && ay == 0 {
                return Ok(0.0);
            }
            let off: Vec<i64> = if dim == 1 { vec![ax as i64] } else { vec![ax as i64, ay as i64] };
            kernel.offset_weight(h, &off)
        })
        .collect::<Result<_>>()?;
    let (base, amp) = match kernel.multiplier() {
        Multiplier::Constant { value } => (value, 0.0),
        Multiplier::SignSplit { base, amp } => (base, amp),
    };
    let bx = lattice.box_region();
    let vol = lattice.cell_volume();
    let tail: Vec<f64> = (0..lattice.node_count())
        .into_par_iter()
        .map(|i| kernel.tail_weight(&bx, &lattice.node_point(i)).map(|t| vol * t))
        .collect::<Result<_>>()?;
    let profile: Vec<f64> = if amp != 0.0 {
        (0..lattice.node_count()).map(|i| sgn(lattice.node_point(i)[0])).collect()
    } else {
        Vec::new()
    };
    let mut table = WeightTable {
        kernel: *kernel,
        lattice: *lattice,
        radial,
        tail,
        profile,
        base,
        amp,
        row_sums: Vec::new(),
    };
    table.row_sums = table.compute_row_sums();
    Ok(table)
}

impl WeightTable {
    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }
    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }
    pub fn node_count(&self) -> usize {
        self.lattice.node_count()
    }
    pub fn near_radius(&self) -> usize {
        NEAR_RADIUS
    }

    /// Quarter table of radial weights, indexed `|dx| + M |dy|`.
    pub fn radial(&self) -> &[f64] {
        &self.radial
    }

    /// Constant multiplier value when the weights are translation invariant.
    pub fn constant_multiplier(&self) -> Option<f64> {
        if self.amp == 0.0 {
            Some(self.base)
        } else {
            None
        }
    }

    /// Tail weight of node `i`, already multiplied by the cell volume.
    pub fn tail(&self, i: usize) -> f64 {
        self.tail[i]
    }
    pub fn tails(&self) -> &[f64] {
        &self.tail
    }

    /// `Σ_{j ≠ i} W_ij` over the whole box.
    pub fn row_sum(&self, i: usize) -> f64 {
        self.row_sums[i]
    }
    pub fn row_sums(&self) -> &[f64] {
        &self.row_sums
    }

    #[inline]
    fn factor(&self, i: usize, j: usize) -> f64 {
        if self.amp == 0.0 {
            self.base
        } else {
            self.base + self.amp * self.profile[i] * self.profile[j]
        }
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let m = self.lattice.cells();
        let (ci, cj) = (self.lattice.coords(i), self.lattice.coords(j));
        let k = ci[0].abs_diff(cj[0]) + m * ci[1].abs_diff(cj[1]);
        self.radial[k] * self.factor(i, j)
    }

    /// Calls `f(j, W_ij)` for every `j ≠ i` in increasing `j`.
    #[inline]
    pub fn for_row(&self, i: usize, mut f: impl FnMut(usize, f64)) {
        let m = self.lattice.cells();
        let ci = self.lattice.coords(i);
        let rows = if self.lattice.dim() == 1 { 1 } else { m };
        for jy in 0..rows {
            let wrow = &self.radial[m * ci[1].abs_diff(jy)..];
            let off = jy * m;
            if self.amp == 0.0 {
                for jx in 0..m {
                    let j = off + jx;
                    if j != i {
                        f(j, self.base * wrow[ci[0].abs_diff(jx)]);
                    }
                }
            } else {
                let pi = self.profile[i];
                for jx in 0..m {
                    let j = off + jx;
                    if j != i {
                        let a = self.base + self.amp * pi * self.profile[j];
                        f(j, a * wrow[ci[0].abs_diff(jx)]);
                    }
                }
            }
        }
    }

    /// `(offset, weight)` for offsets in the non-negative half space, weight at the
    /// base multiplier.
    pub fn offset_rows(&self) -> Vec<(Vec<i64>, f64)> {
        let m = self.lattice.cells() as i64;
        let mut out = Vec::new();
        if self.lattice.dim() == 1 {
            for d in 1..m {
                out.push((vec![d], self.base * self.radial[d as usize]));
            }
        } else {
            for dy in 0..m {
                for dx in (1 - m)..m {
                    if dy == 0 && dx <= 0 {
                        continue;
                    }
                    let k = dx.unsigned_abs() as usize + (m as usize) * dy as usize;
                    out.push((vec![dx, dy], self.base * self.radial[k]));
                }
            }
        }
        out
    }

    fn compute_row_sums(&self) -> Vec<f64> {
        let m = self.lattice.cells();
        let dim = self.lattice.dim();
        let rows = if dim == 1 { 1 } else { m };
        // cumulative table F[a + m b] = Σ_{x<=a, y<=b} radial(x, y)
        let mut cum = vec![0.0; self.radial.len()];
        for b in 0..rows {
            let mut run = 0.0;
            for a in 0..m {
                run += self.radial[a + m * b];
                cum[a + m * b] = run + if b > 0 { cum[a + m * (b - 1)] } else { 0.0 };
            }
        }
        let f = |a: i64, b: i64| -> f64 {
            if a < 0 || b < 0 {
                0.0
            } else {
                cum[a as usize + m * b as usize]
            }
        };
        let rect = |x: (i64, i64), y: (i64, i64)| f(x.1, y.1) - f(x.0 - 1, y.1) - f(x.1, y.0 - 1) + f(x.0 - 1, y.0 - 1);
        // split a signed offset range into ranges of |offset|
        let pieces = |lo: i64, hi: i64| -> Vec<(i64, i64)> {
            if lo > hi {
                vec![]
            } else if lo >= 0 {
                vec![(lo, hi)]
            } else if hi <= 0 {
                vec![(-hi, -lo)]
            } else {
                vec![(0, -lo), (1, hi)]
            }
        };
        let signed_sum = |xr: (i64, i64), yr: (i64, i64)| -> f64 {
            let mut s = 0.0;
            for px in pieces(xr.0, xr.1) {
                for py in pieces(yr.0, yr.1) {
                    s += rect(px, py);
                }
            }
            s
        };
        // column ranges by sign of x_1
        let (mut neg_end, mut pos_start) = (0usize, m);
        for k in 0..m {
            let x = self.lattice.axis_coord(0, k);
            if x < 0.0 {
                neg_end = k + 1;
            }
            if x > 0.0 && pos_start == m {
                pos_start = k;
            }
        }
        let mi = m as i64;
        (0..self.lattice.node_count())
            .map(|i| {
                let c = self.lattice.coords(i);
                let (cx, cy) = (c[0] as i64, c[1] as i64);
                let yr = if dim == 1 { (0, 0) } else { (-cy, mi - 1 - cy) };
                let full = signed_sum((-cx, mi - 1 - cx), yr);
                if self.amp == 0.0 {
                    return self.base * full;
                }
                let neg = signed_sum((-cx, neg_end as i64 - 1 - cx), yr);
                let pos = signed_sum((pos_start as i64 - cx, mi - 1 - cx), yr);
                self.base * full + self.amp * self.profile[i] * (pos - neg)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(s: f64, p: f64, dim: usize, m: usize, mult: Option<Multiplier>) -> WeightTable {
        let mut k = KernelSpec::new(s, p, dim).unwrap();
        if let Some(mu) = mult {
            k = k.with_multiplier(mu).unwrap();
        }
        build_weight_table(&k, &Lattice::default_box(dim, m).unwrap()).unwrap()
    }

    #[test]
    fn eight_cell_line_has_seven_offsets() {
        let t = table(0.4, 2.0, 1, 8, None);
        let rows = t.offset_rows();
        assert_eq!(rows.len(), 7);
        assert!(rows.iter().all(|(_, w)| *w > 0.0));
        for i in 0..8 {
            for j in 0..8 {
                assert_eq!(t.weight(i, j), t.weight(j, i));
            }
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let k = KernelSpec::new(0.4, 2.0, 2).unwrap();
        assert!(build_weight_table(&k, &Lattice::default_box(1, 8).unwrap()).is_err());
    }

    #[test]
    fn row_sums_match_brute_force() {
        for dim in [1, 2] {
            for mult in [None, Some(Multiplier::SignSplit { base: 1.5, amp: 0.5 })] {
                let t = table(0.45, 2.5, dim, 16, mult);
                for i in 0..t.node_count() {
                    let mut s = 0.0;
                    t.for_row(i, |_, w| s += w);
                    let mut s2 = 0.0;
                    for j in 0..t.node_count() {
                        s2 += t.weight(i, j);
                    }
                    assert!((s - t.row_sum(i)).abs() < 1e-12 * s, "dim {dim} node {i}");
                    assert!((s - s2).abs() < 1e-12 * s);
                }
            }
        }
    }

    #[test]
    fn tails_grow_towards_edge() {
        let t = table(0.3, 2.0, 1, 32, None);
        for i in 16..31 {
            assert!(t.tail(i + 1) > t.tail(i));
        }
        let t2 = table(0.3, 2.0, 2, 16, None);
        let l = *t2.lattice();
        assert!(t2.tail(l.index([0, 8])) > t2.tail(l.index([8, 8])));
    }

    #[test]
    fn monotone_along_rays() {
        for &(s, p) in &[(0.4, 2.0), (0.9, 2.5), (0.3, 3.0), (0.6, 1.5)] {
            let t = table(s, p, 2, 16, None);
            let m = 16;
            for dir in [(1usize, 0usize), (1, 1), (2, 1)] {
                let mut last = f64::INFINITY;
                for k in 1..7 {
                    let (ax, ay) = (dir.0 * k, dir.1 * k);
                    if ax >= m || ay >= m {
                        break;
                    }
                    let w = t.radial()[ax + m * ay];
                    assert!(w < last, "s={s} p={p} dir={dir:?} k={k}");
                    last = w;
                }
            }
        }
    }
}
