//! Discrete Sobolev and condenser capacities, zero-capacity probes, ball scaling and the
//! dyadic Wiener profile.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{dist, DomainMask, Lattice, Point};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::kernel::{build_weight_table, KernelSpec, WeightTable};
use crate::solve::{capacitary_potential, constrained_potential, SolveOptions};

/// Threshold on `I_k` for the divergent-like trend.
pub const WIENER_FLOOR: f64 = 0.01;
/// Decay factor over the last three scales for the convergent-like trend.
pub const WIENER_DECAY: f64 = 2.0;
/// Distance of `sp` from the critical value under which a probe is labelled borderline.
pub const BORDERLINE_BAND: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacityKind {
    Sobolev,
    Condenser,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityResult {
    pub kind: CapacityKind,
    pub set: String,
    pub value: f64,
    pub h: f64,
    pub potential: Option<Field>,
}

/// `cap_h(K, Ω_c)`: energy of the capacitary potential, `u = 1` on `K`, `u = 0` off `Ω_c`.
pub fn condenser_capacity(table: &WeightTable, k: &[usize], omega: &[usize], opts: &SolveOptions) -> Result<CapacityResult> {
    let r = capacitary_potential(table, k, omega, opts)?.require_converged()?;
    Ok(CapacityResult {
        kind: CapacityKind::Condenser,
        set: format!("{} nodes in open set of {}", k.len(), omega.len()),
        value: r.energy,
        h: table.lattice().h(),
        potential: Some(r.solution),
    })
}

/// `C_h(E)`: minimum of pair + tail energy plus `h^dim Σ |u|^p` over `u = 1` on `E`.
/// The competitor may be nonzero on every non-edge node of the box.
pub fn sobolev_capacity(table: &WeightTable, e: &[usize], opts: &SolveOptions) -> Result<CapacityResult> {
    let l = table.lattice();
    if let Some(&i) = e.iter().find(|&&i| i >= l.node_count() || l.is_edge_node(i)) {
        return Err(Error::Contract(format!("node {i} is not an interior node of the box")));
    }
    let omega: Vec<usize> = (0..l.node_count()).filter(|&i| !l.is_edge_node(i)).collect();
    let r = constrained_potential(table, e, &omega, l.cell_volume(), opts)?.require_converged()?;
    Ok(CapacityResult {
        kind: CapacityKind::Sobolev,
        set: format!("{} nodes", e.len()),
        value: r.energy,
        h: l.h(),
        potential: Some(r.solution),
    })
}

/// Node set of the closed ball `B̄(x0, r)`.
pub fn closed_ball_nodes(lattice: &Lattice, x0: &Point, r: f64) -> Vec<usize> {
    (0..lattice.node_count())
        .filter(|&i| dist(&lattice.node_point(i), x0) <= r * (1.0 + 1e-12))
        .collect()
}

/// Node set of the open ball `B(x0, r)`.
pub fn open_ball_nodes(lattice: &Lattice, x0: &Point, r: f64) -> Vec<usize> {
    (0..lattice.node_count())
        .filter(|&i| dist(&lattice.node_point(i), x0) < r * (1.0 - 1e-12))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProbeShape {
    /// The node nearest `at`.
    Point { at: Point },
    /// Nodes on the hyperplane `x_1 = 0` with `|x'| <= half_length` (a point in 1D).
    Slice { half_length: f64 },
}

impl ProbeShape {
    /// Dimension-critical product: capacity vanishes for `sp` below it.
    pub fn critical_sp(&self, dim: usize) -> f64 {
        match self {
            ProbeShape::Point { .. } => dim as f64,
            ProbeShape::Slice { .. } => 1.0,
        }
    }

    pub fn nodes(&self, lattice: &Lattice) -> Result<Vec<usize>> {
        let v = match self {
            ProbeShape::Point { at } => vec![lattice.nearest_node(at)],
            ProbeShape::Slice { half_length } => {
                let c = lattice.nearest_node(&[0.0, 0.0]);
                let x1 = lattice.node_point(c)[0];
                (0..lattice.node_count())
                    .filter(|&i| {
                        let x = lattice.node_point(i);
                        x[0] == x1 && (lattice.dim() == 1 || x[1].abs() <= *half_length)
                    })
                    .collect()
            }
        };
        if v.iter().any(|&i| lattice.is_edge_node(i)) {
            return Err(Error::config("probe.shape", "shape touches the box edge"));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeTrend {
    Decaying,
    BoundedBelow,
    Borderline,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub h: f64,
    pub nodes: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroCapacityProbe {
    pub shape: ProbeShape,
    pub sp: f64,
    pub critical_sp: f64,
    pub rows: Vec<ProbeRow>,
    pub trend: ProbeTrend,
}

/// Sobolev capacity of `shape` on `lattice` and its two refinements.
pub fn zero_capacity_probe(kernel: &KernelSpec, lattice: &Lattice, shape: ProbeShape, opts: &SolveOptions) -> Result<ZeroCapacityProbe> {
    let grids = [*lattice, lattice.refined(), lattice.refined().refined()];
    let mut rows = Vec::with_capacity(3);
    for l in &grids {
        let table = build_weight_table(kernel, l)?;
        let e = shape.nodes(l)?;
        let c = sobolev_capacity(&table, &e, opts)?;
        rows.push(ProbeRow {
            h: l.h(),
            nodes: e.len(),
            value: c.value,
        });
    }
    let critical = shape.critical_sp(lattice.dim());
    let v: Vec<f64> = rows.iter().map(|r| r.value).collect();
    let trend = if (kernel.sp() - critical).abs() < BORDERLINE_BAND {
        ProbeTrend::Borderline
    } else if v.windows(2).all(|w| w[1] < w[0]) && kernel.sp() < critical {
        ProbeTrend::Decaying
    } else if v[2] >= 0.5 * v[0] {
        ProbeTrend::BoundedBelow
    } else {
        ProbeTrend::Inconclusive
    };
    Ok(ZeroCapacityProbe {
        shape,
        sp: kernel.sp(),
        critical_sp: critical,
        rows,
        trend,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub k: u32,
    pub rho: f64,
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingSlope {
    pub x0: Point,
    pub points: Vec<ScalingPoint>,
    pub slope: f64,
    /// `dim - sp`.
    pub expected: f64,
    pub borderline: bool,
}

/// Least-squares slope of `log2 cap_h(B̄(x0, ρ_k), B(x0, 2ρ_k))` against `-k`, `ρ_k = 2^{-k}`.
pub fn capacity_scaling_slope(table: &WeightTable, x0: &Point, ks: &[u32], opts: &SolveOptions) -> Result<ScalingSlope> {
    if ks.len() < 3 {
        return Err(Error::Contract(format!("scaling slope needs at least 3 radii, got {}", ks.len())));
    }
    let l = table.lattice();
    let h = l.h();
    for &k in ks {
        let rho = 0.5f64.powi(k as i32);
        if rho < 8.0 * h * (1.0 - 1e-12) {
            return Err(Error::Contract(format!("radius 2^-{k} is below 8h = {}", 8.0 * h)));
        }
        check_inside(l, x0, 2.0 * rho)?;
    }
    let points = ks
        .par_iter()
        .map(|&k| {
            let rho = 0.5f64.powi(k as i32);
            let kk = closed_ball_nodes(l, x0, rho);
            let om = open_ball_nodes(l, x0, 2.0 * rho);
            let c = condenser_capacity(table, &kk, &om, opts)?;
            Ok(ScalingPoint {
                k,
                rho,
                capacity: c.value,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = points.iter().map(|p| -(p.k as f64)).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.capacity.log2()).collect();
    let slope = least_squares_slope(&xs, &ys);
    let expected = l.dim() as f64 - table.kernel().sp();
    Ok(ScalingSlope {
        x0: *x0,
        points,
        slope,
        expected,
        borderline: expected.abs() < BORDERLINE_BAND,
    })
}

pub(crate) fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn check_inside(l: &Lattice, x0: &Point, r: f64) -> Result<()> {
    let bx = l.box_region();
    for a in 0..l.dim() {
        if x0[a] - r <= bx.lo[a] || x0[a] + r >= bx.hi(a) {
            return Err(Error::Contract(format!("ball B({x0:?}, {r}) leaves the box")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WienerTrend {
    DivergentLike,
    ConvergentLike,
    Inconclusive,
}

impl WienerTrend {
    pub fn as_str(&self) -> &'static str {
        match self {
            WienerTrend::DivergentLike => "divergent-like",
            WienerTrend::ConvergentLike => "convergent-like",
            WienerTrend::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WienerRow {
    pub k: u32,
    pub rho: f64,
    pub c_k: f64,
    pub integrand: f64,
    pub partial_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WienerProfile {
    pub x0: Point,
    pub h: f64,
    pub k_min: u32,
    pub k_max: u32,
    pub rows: Vec<WienerRow>,
    pub trend: WienerTrend,
    pub flags: Vec<String>,
}

impl WienerProfile {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,rho,c_k,I_k,S_k\n");
        for r in &self.rows {
            s.push_str(&format!("{},{:e},{:e},{:e},{:e}\n", r.k, r.rho, r.c_k, r.integrand, r.partial_sum));
        }
        s
    }
}

/// Trend of a dyadic integrand sequence (finest scale last).
pub fn wiener_trend(integrand: &[f64]) -> WienerTrend {
    let n = integrand.len();
    if n < 3 {
        return WienerTrend::Inconclusive;
    }
    let last = &integrand[n - 3..];
    if last.iter().all(|&v| v > WIENER_FLOOR) {
        WienerTrend::DivergentLike
    } else if last[2] * WIENER_DECAY <= last[0] {
        WienerTrend::ConvergentLike
    } else {
        WienerTrend::Inconclusive
    }
}

/// Dyadic Wiener sum at `x0`: `c_k = cap_h(B̄(x0, ρ_k) \ Ω, B(x0, 2ρ_k))` for
/// `ρ_k = 2^{-k}`, from the largest radius with `B(x0, 2ρ)` inside the box (and `ρ <= 1/2`)
/// down to `ρ >= 8h`.
pub fn wiener_profile(table: &WeightTable, mask: &DomainMask, x0: &Point, opts: &SolveOptions) -> Result<WienerProfile> {
    let l = mask.lattice();
    if table.lattice() != l {
        return Err(Error::Contract("weight table and mask live on different lattices".into()));
    }
    let h = l.h();
    let mut k_min = 1u32;
    while check_inside(l, x0, 2.0 * 0.5f64.powi(k_min as i32)).is_err() {
        k_min += 1;
        if k_min > 60 {
            return Err(Error::Contract(format!("point {x0:?} is too close to the box edge")));
        }
    }
    let mut k_max = k_min;
    while 0.5f64.powi(k_max as i32 + 1) >= 8.0 * h {
        k_max += 1;
    }
    if 0.5f64.powi(k_max as i32) < 8.0 * h {
        return Err(Error::config("lattice.cells", "no dyadic radius of at least 8h fits around the point"));
    }
    let ks: Vec<u32> = (k_min..=k_max).collect();
    let kernel = table.kernel();
    let expo = l.dim() as f64 - kernel.sp();
    let caps = ks
        .par_iter()
        .map(|&k| {
            let rho = 0.5f64.powi(k as i32);
            let kk: Vec<usize> = closed_ball_nodes(l, x0, rho).into_iter().filter(|&i| !mask.is_free(i)).collect();
            let om = open_ball_nodes(l, x0, 2.0 * rho);
            condenser_capacity(table, &kk, &om, opts).map(|c| c.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut s = 0.0;
    let rows: Vec<WienerRow> = ks
        .iter()
        .zip(&caps)
        .map(|(&k, &c)| {
            let rho = 0.5f64.powi(k as i32);
            let integrand = (c / rho.powf(expo)).powf(1.0 / (kernel.p() - 1.0)) * std::f64::consts::LN_2;
            s += integrand;
            WienerRow {
                k,
                rho,
                c_k: c,
                integrand,
                partial_sum: s,
            }
        })
        .collect();
    let trend = wiener_trend(&rows.iter().map(|r| r.integrand).collect::<Vec<_>>());
    let mut flags = vec![
        format!("resolved scales: rho = 2^-{k_min} .. 2^-{k_max} (rho >= 8h)"),
        format!("trend heuristic: divergent-like if the last three I_k > {WIENER_FLOOR}, convergent-like if I_k drops by {WIENER_DECAY}x over them"),
    ];
    flags.extend(mask.flags().iter().cloned());
    Ok(WienerProfile {
        x0: *x0,
        h,
        k_min,
        k_max,
        rows,
        trend,
        flags,
    })
}
