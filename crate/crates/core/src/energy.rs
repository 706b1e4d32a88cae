//! Discrete energy, gradient, pairing, residuals, Tail and the Poincaré diagnostic.
//!
//! Sums run over ordered node pairs. Nodes whose value equals the far field `c`
//! contribute to a row only through `φ(u_i - c) (R_i - Σ_{j∈A} W_ij)`, where `A` is the
//! set of nodes with `u_j ≠ c` and `R_i` the full row sum, so every evaluation costs
//! `O(|rows| · |A|)` instead of `O(N^2)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conv::Convolver;
use crate::domain::{dist, DomainMask, Lattice, Point};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::kernel::{KernelSpec, WeightTable};
use crate::power::Power;

/// Above this many active nodes, p = 2 energies use the convolution identity.
const CONV_THRESHOLD: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub pair_energy: f64,
    pub tail_energy: f64,
    pub lp_term: f64,
    pub total: f64,
}

fn check_len(table: &WeightTable, u: &Field) -> Result<()> {
    if u.len() != table.node_count() {
        return Err(Error::Contract(format!(
            "field has {} values, lattice has {} nodes",
            u.len(),
            table.node_count()
        )));
    }
    Ok(())
}

fn active_nodes(u: &Field) -> Vec<usize> {
    let c = u.far_field();
    (0..u.len()).filter(|&i| u.values()[i] != c).collect()
}

/// `(Σ_{j∈A} W_ij, Σ_{j∈A} W_ij f(u_i - u_j))`.
#[inline]
fn active_row(table: &WeightTable, active: &[usize], u: &[f64], i: usize, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let (mut s, mut q) = (0.0, 0.0);
    let ui = u[i];
    for &j in active {
        if j == i {
            continue;
        }
        let w = table.weight(i, j);
        s += w;
        q += w * f(ui - u[j]);
    }
    (s, q)
}

pub fn energy_total(table: &WeightTable, u: &Field, include_lp: bool) -> Result<EnergyBreakdown> {
    check_len(table, u)?;
    let c = u.far_field();
    if include_lp && c != 0.0 {
        return Err(Error::Contract("the L^p term requires a zero far field".into()));
    }
    let pw = Power::new(table.kernel().p());
    let vals = u.values();
    let active = active_nodes(u);
    let pair = if active.is_empty() {
        0.0
    } else if pw.p() == 2.0 && active.len() > CONV_THRESHOLD {
        let conv = Convolver::for_nodes(table, &active);
        let mut w = vec![0.0; conv.region_len()];
        for &i in &active {
            w[conv.local(i).unwrap()] = vals[i] - c;
        }
        let ww = conv.apply(&w);
        active
            .iter()
            .map(|&i| {
                let k = conv.local(i).unwrap();
                2.0 * w[k] * (w[k] * table.row_sum(i) - ww[k])
            })
            .sum()
    } else {
        let rows: Vec<f64> = active
            .par_iter()
            .map(|&i| {
                let (s, q) = active_row(table, &active, vals, i, |t| pw.abs_pow(t));
                2.0 * pw.abs_pow(vals[i] - c) * (table.row_sum(i) - s) + q
            })
            .collect();
        rows.iter().sum()
    };
    let tail: f64 = 2.0 * active.iter().map(|&i| table.tail(i) * pw.abs_pow(vals[i] - c)).sum::<f64>();
    let lp = if include_lp {
        table.lattice().cell_volume() * vals.iter().map(|&v| pw.abs_pow(v)).sum::<f64>()
    } else {
        0.0
    };
    Ok(EnergyBreakdown {
        pair_energy: pair,
        tail_energy: tail,
        lp_term: lp,
        total: pair + tail + lp,
    })
}

fn node_gradient(table: &WeightTable, active: &[usize], u: &Field, pw: &Power, i: usize) -> f64 {
    let vals = u.values();
    let c = u.far_field();
    let (s, q) = active_row(table, active, vals, i, |t| pw.phi(t));
    2.0 * (pw.phi(vals[i] - c) * (table.row_sum(i) - s) + q) + 2.0 * table.tail(i) * pw.phi(vals[i] - c)
}

/// Gradient of `(1/p)(pair + tail)` with respect to the FREE values, in increasing node order.
pub fn energy_gradient(table: &WeightTable, mask: &DomainMask, u: &Field) -> Result<Vec<f64>> {
    check_len(table, u)?;
    let pw = Power::new(table.kernel().p());
    let active = active_nodes(u);
    let free = mask.free_nodes();
    Ok(free.par_iter().map(|&i| node_gradient(table, &active, u, &pw, i)).collect())
}

/// The gradient formula evaluated at node `i` whatever its status.
pub fn residual_at_node(table: &WeightTable, u: &Field, i: usize) -> Result<f64> {
    check_len(table, u)?;
    if i >= u.len() {
        return Err(Error::Contract(format!("node {i} out of range")));
    }
    let pw = Power::new(table.kernel().p());
    Ok(node_gradient(table, &active_nodes(u), u, &pw, i))
}

/// `E(u, φ)` for a test field vanishing on FIXED nodes and at infinity.
pub fn pairing(table: &WeightTable, mask: &DomainMask, u: &Field, phi: &Field) -> Result<f64> {
    check_len(table, u)?;
    check_len(table, phi)?;
    if phi.far_field() != 0.0 {
        return Err(Error::Contract("test field must vanish at infinity".into()));
    }
    for i in mask.fixed_nodes() {
        if phi.values()[i] != 0.0 {
            return Err(Error::Contract(format!("test field is nonzero on FIXED node {i}")));
        }
    }
    let g = energy_gradient(table, mask, u)?;
    Ok(mask.free_nodes().iter().zip(&g).map(|(&i, gi)| phi.values()[i] * gi).sum())
}

/// `Tail(u; x0, r)` with the unit kernel: box nodes at distance `>= r` by the midpoint
/// rule, the exterior of the box exactly (in 1D) or by quadrature (2D) with `|u| = |g_∞|`.
pub fn tail_quantity(kernel: &KernelSpec, lattice: &Lattice, u: &Field, x0: &Point, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("tail radius must be positive, got {r}")));
    }
    if u.len() != lattice.node_count() {
        return Err(Error::Contract("field does not match lattice".into()));
    }
    let p = kernel.p();
    let sp = kernel.sp();
    let ex = kernel.exponent();
    let vol = lattice.cell_volume();
    let mut s = 0.0;
    for (i, v) in u.values().iter().enumerate() {
        let d = dist(&lattice.node_point(i), x0);
        if d >= r {
            s += vol * v.abs().powf(p - 1.0) * d.powf(-ex);
        }
    }
    let g = u.far_field().abs();
    if g != 0.0 {
        let ext = crate::kernel::exterior_power_integral(kernel, &lattice.box_region(), x0, r)?;
        s += g.powf(p - 1.0) * ext;
    }
    let total = r.powf(sp) * s;
    Ok(if total == 0.0 { 0.0 } else { total.powf(1.0 / (p - 1.0)) })
}

/// `h^n Σ|u_i|^p / ((1 + diam(Ω)^{sp}) (pair + tail))` for `u` supported on the FREE nodes.
pub fn poincare_ratio(table: &WeightTable, mask: &DomainMask, u: &Field) -> Result<f64> {
    check_len(table, u)?;
    if u.far_field() != 0.0 || mask.fixed_nodes().iter().any(|&i| u.values()[i] != 0.0) {
        return Err(Error::Contract("Poincaré diagnostic needs u = 0 off the FREE set".into()));
    }
    let e = energy_total(table, u, true)?;
    if e.lp_term == 0.0 {
        return Ok(0.0);
    }
    let l = table.lattice();
    // the diameter is attained on FREE nodes adjacent to the complement
    let b: Vec<Point> = mask
        .free_nodes()
        .into_iter()
        .filter(|&i| {
            let c = l.coords(i);
            let m = l.cells();
            let mut near = Vec::new();
            for a in 0..l.dim() {
                for d in [-1i64, 1] {
                    let mut cc = c;
                    let v = cc[a] as i64 + d;
                    if v < 0 || v >= m as i64 {
                        continue;
                    }
                    cc[a] = v as usize;
                    near.push(l.index(cc));
                }
            }
            near.iter().any(|&j| !mask.is_free(j))
        })
        .map(|i| l.node_point(i))
        .collect();
    let mut diam: f64 = 0.0;
    for (k, x) in b.iter().enumerate() {
        for y in &b[k + 1..] {
            diam = diam.max(dist(x, y));
        }
    }
    let sp = table.kernel().sp();
    Ok(e.lp_term / ((1.0 + diam.powf(sp)) * (e.pair_energy + e.tail_energy)))
}
