//! Interaction kernel `a(x,y) |x-y|^{-(n+sp)}` and its lattice discretisation.

pub mod quadrature;
mod table;

use serde::{Deserialize, Serialize};

pub use table::{build_weight_table, WeightTable, NEAR_RADIUS};

use crate::domain::{AxisBox, Point};
use crate::error::{Error, Result};
use quadrature::{cell_pair_moment_1d, cell_pair_moment_2d, integrate_pieces, sgn, signed_ray_integral};

/// Default Gauss–Legendre order per angular piece.
pub const DEFAULT_QUAD_ORDER: usize = 16;

/// Symmetric bounded multiplier `a(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Multiplier {
    Constant { value: f64 },
    /// `base + amp * sgn(x_1) * sgn(y_1)`: symmetric, bounded, not translation invariant.
    SignSplit { base: f64, amp: f64 },
}

impl Default for Multiplier {
    fn default() -> Self {
        Multiplier::Constant { value: 1.0 }
    }
}

impl Multiplier {
    pub fn eval(&self, x: &Point, y: &Point) -> f64 {
        match *self {
            Multiplier::Constant { value } => value,
            Multiplier::SignSplit { base, amp } => base + amp * sgn(x[0]) * sgn(y[0]),
        }
    }

    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            Multiplier::Constant { value } => (value, value),
            Multiplier::SignSplit { base, amp } => (base - amp.abs(), base + amp.abs()),
        }
    }

    pub fn is_translation_invariant(&self) -> bool {
        matches!(self, Multiplier::Constant { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    s: f64,
    p: f64,
    dim: usize,
    multiplier: Multiplier,
    lambda: f64,
}

impl KernelSpec {
    /// Unit multiplier, ellipticity constant 1.
    pub fn new(s: f64, p: f64, dim: usize) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::config("kernel.s", format!("s must lie in (0,1), got {s}")));
        }
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::config("kernel.p", format!("p must lie in (1,inf), got {p}")));
        }
        if dim != 1 && dim != 2 {
            return Err(Error::config("kernel.dim", format!("dimension must be 1 or 2, got {dim}")));
        }
        Ok(Self {
            s,
            p,
            dim,
            multiplier: Multiplier::default(),
            lambda: 1.0,
        })
    }

    /// Replace the multiplier; the ellipticity constant grows to cover its range.
    pub fn with_multiplier(mut self, m: Multiplier) -> Result<Self> {
        let (lo, hi) = m.bounds();
        if !(lo > 0.0 && hi.is_finite()) {
            return Err(Error::config("kernel.multiplier", format!("multiplier range [{lo}, {hi}] must be positive and finite")));
        }
        self.multiplier = m;
        self.lambda = self.lambda.max(hi).max(1.0 / lo);
        Ok(self)
    }

    /// Declare an ellipticity constant; the multiplier must fit inside `[1/Λ, Λ]`.
    pub fn with_lambda(mut self, lambda: f64) -> Result<Self> {
        let (lo, hi) = self.multiplier.bounds();
        if !(lambda >= 1.0) || hi > lambda * (1.0 + 1e-12) || lo * lambda < 1.0 - 1e-12 {
            return Err(Error::config(
                "kernel.lambda",
                format!("multiplier range [{lo}, {hi}] not within [1/{lambda}, {lambda}]"),
            ));
        }
        self.lambda = lambda;
        Ok(self)
    }

    pub fn s(&self) -> f64 {
        self.s
    }
    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn sp(&self) -> f64 {
        self.s * self.p
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn multiplier(&self) -> Multiplier {
        self.multiplier
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    /// `n + sp`.
    pub fn exponent(&self) -> f64 {
        self.dim as f64 + self.sp()
    }

    pub fn eval(&self, x: &Point, y: &Point) -> Result<f64> {
        let r = crate::domain::dist(x, y);
        if r == 0.0 {
            return Err(Error::Domain("kernel evaluated on the diagonal".into()));
        }
        Ok(self.multiplier.eval(x, y) * r.powf(-self.exponent()))
    }

    /// Radial part (unit multiplier) of the pair weight for lattice offset `delta`.
    ///
    /// Far from the diagonal this is the midpoint rule `h^{2n} |hδ|^{-n-sp}`. Within
    /// `NEAR_RADIUS` (sup norm) the cell-pair integral of the kernel itself diverges for
    /// `sp >= 1`, so the weight is instead the moment-matched cell integral
    /// `(h|δ|)^{-p} ∫_{C_0}∫_{C_δ} |x-y|^{p-n-sp}`, which reproduces `|u_i - u_j|^p`
    /// for linear `u` and reduces to the midpoint rule as `|δ|` grows.
    pub fn offset_weight(&self, h: f64, delta: &[i64]) -> Result<f64> {
        self.offset_weight_with_order(h, delta, DEFAULT_QUAD_ORDER)
    }

    pub fn offset_weight_with_order(&self, h: f64, delta: &[i64], order: usize) -> Result<f64> {
        if delta.len() != self.dim {
            return Err(Error::Domain(format!("offset has {} components, expected {}", delta.len(), self.dim)));
        }
        if delta.iter().all(|&d| d == 0) {
            return Err(Error::Domain("zero offset has no pair weight".into()));
        }
        if !(h > 0.0) {
            return Err(Error::Domain("lattice spacing must be positive".into()));
        }
        let n = self.dim as f64;
        let sup = delta.iter().map(|d| d.unsigned_abs()).max().unwrap_or(0);
        let norm = delta.iter().map(|&d| (d * d) as f64).sum::<f64>().sqrt();
        if sup as usize > NEAR_RADIUS {
            return Ok(h.powf(2.0 * n) * (h * norm).powf(-self.exponent()));
        }
        let q = self.p - self.exponent();
        let unit = match self.dim {
            1 => cell_pair_moment_1d(delta[0].unsigned_abs(), q),
            _ => cell_pair_moment_2d([delta[0], delta[1]], q, order),
        };
        // scale: ∫∫ over h-cells = h^{q + 2n} * unit
        Ok(h.powf(q + 2.0 * n - self.p) * norm.powf(-self.p) * unit)
    }

    /// `∫_{R^n \ box} a(x,y) |x-y|^{-n-sp} dy` for `x` strictly inside the box.
    pub fn tail_weight(&self, bx: &AxisBox, x: &Point) -> Result<f64> {
        self.tail_weight_with_order(bx, x, 2 * DEFAULT_QUAD_ORDER)
    }

    pub fn tail_weight_with_order(&self, bx: &AxisBox, x: &Point, order: usize) -> Result<f64> {
        if bx.dim != self.dim {
            return Err(Error::Domain("box dimension does not match kernel".into()));
        }
        if !bx.contains_strictly(x) {
            return Err(Error::Domain(format!("point {x:?} is not strictly inside the box")));
        }
        let sig = self.sp();
        let (base, amp) = match self.multiplier {
            Multiplier::Constant { value } => (value, 0.0),
            Multiplier::SignSplit { base, amp } => (base, amp),
        };
        let psi = sgn(x[0]);
        let ray = |cs: f64, rho: f64| {
            let mut v = base * rho.powf(-sig) / sig;
            if amp != 0.0 && psi != 0.0 {
                v += amp * psi * signed_ray_integral(x[0], cs, rho, sig);
            }
            v
        };
        if self.dim == 1 {
            let right = bx.hi(0) - x[0];
            let left = x[0] - bx.lo[0];
            return Ok(ray(1.0, right) + ray(-1.0, left));
        }
        // exit distance along direction θ
        let exit = |cs: f64, sn: f64| {
            let mut t = f64::INFINITY;
            for (a, d) in [(0usize, cs), (1usize, sn)] {
                if d > 1e-300 {
                    t = t.min((bx.hi(a) - x[a]) / d);
                } else if d < -1e-300 {
                    t = t.min((bx.lo[a] - x[a]) / d);
                }
            }
            t
        };
        let mut angles = Vec::with_capacity(10);
        for cx in [bx.lo[0], bx.hi(0)] {
            for cy in [bx.lo[1], bx.hi(1)] {
                angles.push((cy - x[1]).atan2(cx - x[0]));
            }
        }
        if amp != 0.0 {
            angles.push(std::f64::consts::FRAC_PI_2);
            angles.push(-std::f64::consts::FRAC_PI_2);
            if bx.lo[0] < 0.0 && bx.hi(0) > 0.0 {
                for cy in [bx.lo[1], bx.hi(1)] {
                    angles.push((cy - x[1]).atan2(-x[0]));
                }
            }
        }
        let t0 = -std::f64::consts::PI;
        let mut breaks: Vec<f64> = angles
            .into_iter()
            .map(|a| if a < t0 { a + 2.0 * std::f64::consts::PI } else { a })
            .collect();
        breaks.push(t0);
        breaks.push(t0 + 2.0 * std::f64::consts::PI);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        Ok(integrate_pieces(&breaks, order, |th| {
            let (sn, cs) = th.sin_cos();
            ray(cs, exit(cs, sn))
        }))
    }
}

/// `∫ |y - x|^{-n-sp} dy` over `{y ∉ box, |y - x| >= rmin}` (unit multiplier).
pub fn exterior_power_integral(kernel: &KernelSpec, bx: &AxisBox, x: &Point, rmin: f64) -> Result<f64> {
    if !bx.contains_strictly(x) {
        return Err(Error::Domain(format!("point {x:?} is not strictly inside the box")));
    }
    let sig = kernel.sp();
    let ray = |rho: f64| rho.max(rmin).powf(-sig) / sig;
    if kernel.dim() == 1 {
        return Ok(ray(bx.hi(0) - x[0]) + ray(x[0] - bx.lo[0]));
    }
    let exit = |cs: f64, sn: f64| {
        let mut t = f64::INFINITY;
        for (a, d) in [(0usize, cs), (1usize, sn)] {
            if d > 1e-300 {
                t = t.min((bx.hi(a) - x[a]) / d);
            } else if d < -1e-300 {
                t = t.min((bx.lo[a] - x[a]) / d);
            }
        }
        t
    };
    let pi = std::f64::consts::PI;
    let mut breaks = vec![-pi, pi];
    for cx in [bx.lo[0], bx.hi(0)] {
        for cy in [bx.lo[1], bx.hi(1)] {
            breaks.push((cy - x[1]).atan2(cx - x[0]));
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    // the kink where the exit distance crosses rmin is not located; use a high order
    Ok(integrate_pieces(&breaks, 8 * DEFAULT_QUAD_ORDER, |th| {
        let (sn, cs) = th.sin_cos();
        ray(exit(cs, sn))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Lattice;

    fn k(s: f64, p: f64, dim: usize) -> KernelSpec {
        KernelSpec::new(s, p, dim).unwrap()
    }

    #[test]
    fn validation() {
        assert!(KernelSpec::new(0.0, 2.0, 1).is_err());
        assert!(KernelSpec::new(1.0, 2.0, 1).is_err());
        assert!(KernelSpec::new(0.5, 1.0, 1).is_err());
        assert!(KernelSpec::new(0.5, 2.0, 3).is_err());
        let kk = k(0.5, 2.0, 1);
        assert!(kk.with_multiplier(Multiplier::SignSplit { base: 1.0, amp: 1.0 }).is_err());
        let m = kk.with_multiplier(Multiplier::SignSplit { base: 1.5, amp: 0.5 }).unwrap();
        assert_eq!(m.lambda(), 2.0);
        assert!(m.with_lambda(1.5).is_err());
        assert!(m.with_lambda(3.0).is_ok());
    }

    #[test]
    fn eval_and_diagonal() {
        let kk = k(0.5, 2.0, 1);
        assert!(kk.eval(&[0.3, 0.0], &[0.3, 0.0]).is_err());
        let v = kk.eval(&[0.0, 0.0], &[0.5, 0.0]).unwrap();
        assert!((v - 0.5f64.powf(-2.0)).abs() < 1e-12);
        let kk2 = k(0.5, 2.0, 2).with_multiplier(Multiplier::SignSplit { base: 1.5, amp: 0.5 }).unwrap();
        let (x, y) = ([0.2, 0.1], [-0.4, 0.3]);
        assert_eq!(kk2.eval(&x, &y).unwrap(), kk2.eval(&y, &x).unwrap());
    }

    #[test]
    fn far_weight_is_midpoint() {
        let kk = k(0.4, 2.0, 1);
        let h = 0.25;
        let w = kk.offset_weight(h, &[5]).unwrap();
        assert!((w - h * h * (5.0 * h).powf(-1.8)).abs() < 1e-14);
        assert!(kk.offset_weight(h, &[0]).is_err());
        assert!(kk.offset_weight(h, &[1, 2]).is_err());
    }

    /// For p = n + sp the moment integrand is constant and the near weight is exact.
    #[test]
    fn near_weight_degenerate_exponent() {
        // 1D: q = p - 1 - sp = 0 when p(1-s) = 1
        let kk = k(0.5, 2.0, 1);
        let h = 0.1;
        for d in 1..=2i64 {
            let w = kk.offset_weight(h, &[d]).unwrap();
            let exact = h * h * (h * d as f64).powf(-2.0);
            assert!((w - exact).abs() < 1e-12 * exact);
        }
    }

    #[test]
    fn near_weights_positive_even_for_large_sp() {
        for &(s, p) in &[(0.9, 2.5), (0.6, 3.0), (0.2, 1.5)] {
            for dim in [1, 2] {
                let kk = k(s, p, dim);
                let offs: Vec<Vec<i64>> = if dim == 1 {
                    vec![vec![1], vec![2], vec![3]]
                } else {
                    vec![vec![1, 0], vec![1, 1], vec![2, 0], vec![2, 2], vec![3, 0]]
                };
                let mut last = f64::INFINITY;
                for o in &offs {
                    let w = kk.offset_weight(0.1, o).unwrap();
                    assert!(w.is_finite() && w > 0.0);
                    if o.iter().skip(1).all(|&c| c == 0) {
                        assert!(w <= last);
                        last = w;
                    }
                }
            }
        }
    }

    #[test]
    fn near_weight_quadrature_refines() {
        let kk = k(0.7, 2.5, 2);
        for d in [[1i64, 0], [1, 1], [2, 1], [2, 2]] {
            let a = kk.offset_weight_with_order(0.05, &d, 8).unwrap();
            let b = kk.offset_weight_with_order(0.05, &d, 16).unwrap();
            assert!((a - b).abs() <= 1e-4 * b);
        }
    }

    #[test]
    fn tail_1d_closed_form() {
        let kk = k(0.3, 2.0, 1);
        let l = Lattice::default_box(1, 8).unwrap();
        let bx = l.box_region();
        let x = [0.5, 0.0];
        let sp = 0.6;
        let exact = ((2.0f64 - 0.5).powf(-sp) + (2.5f64).powf(-sp)) / sp;
        assert!((kk.tail_weight(&bx, &x).unwrap() - exact).abs() < 1e-14);
        assert!(kk.tail_weight(&bx, &[2.0, 0.0]).is_err());
    }

    /// Disc oracle: inside the square, the exterior of the square is contained in
    /// the exterior of the inscribed disc and contains the exterior of the circumscribed one.
    #[test]
    fn tail_2d_sandwich_and_symmetry() {
        let kk = k(0.5, 2.0, 2);
        let l = Lattice::default_box(2, 8).unwrap();
        let bx = l.box_region();
        let sp = 1.0;
        let t = kk.tail_weight(&bx, &[0.0, 0.0]).unwrap();
        let disc = |r: f64| 2.0 * std::f64::consts::PI * r.powf(-sp) / sp;
        assert!(t < disc(2.0) && t > disc(2.0 * 2f64.sqrt()));
        let a = kk.tail_weight(&bx, &[0.7, -0.3]).unwrap();
        let b = kk.tail_weight(&bx, &[-0.3, 0.7]).unwrap();
        assert!((a - b).abs() < 1e-12 * a);
        // tail grows towards the edge
        let c = kk.tail_weight(&bx, &[1.9, 0.0]).unwrap();
        assert!(c > t);
    }

    /// Tail by brute force: integrate the kernel over a large annular region in polar
    /// coordinates around x, counting only points outside the box.
    #[test]
    fn tail_2d_matches_brute_force_with_multiplier() {
        let kk = k(0.45, 2.0, 2).with_multiplier(Multiplier::SignSplit { base: 1.5, amp: 0.5 }).unwrap();
        let bx = AxisBox { dim: 2, lo: [-1.0, -1.0], side: 2.0 };
        let x = [0.3, -0.2];
        let exact = kk.tail_weight(&bx, &x).unwrap();
        let sig = kk.sp();
        let nt = 2000;
        let nu = 4000;
        let mut s = 0.0;
        // r = u^{-1/sig} maps r in [r0, inf) with density sig u^{-1-1/sig}; use r0 = 0.5
        let r0: f64 = 0.5;
        for it in 0..nt {
            let th = 2.0 * std::f64::consts::PI * (it as f64 + 0.5) / nt as f64;
            let (sn, cs) = th.sin_cos();
            for iu in 0..nu {
                // v in (0,1): r = r0 * v^{-1/sig}; dr r^{-1-sig} = r0^{-sig}/sig dv
                let v = (iu as f64 + 0.5) / nu as f64;
                let r = r0 * v.powf(-1.0 / sig);
                let y = [x[0] + r * cs, x[1] + r * sn];
                if bx.contains_strictly(&y) {
                    continue;
                }
                s += kk.multiplier().eval(&x, &y) * r0.powf(-sig) / sig;
            }
        }
        s *= 2.0 * std::f64::consts::PI / (nt * nu) as f64;
        assert!((s - exact).abs() < 2e-3 * exact, "{s} vs {exact}");
    }
}
