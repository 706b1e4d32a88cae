use serde::{Deserialize, Serialize};

use super::{dist, DomainMask, Lattice, NodeStatus, Point};
use crate::capacity::condenser_capacity;
use crate::error::{Error, Result};
use crate::kernel::WeightTable;
use crate::solve::SolveOptions;

/// Which construction produced a mask, with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Gallery {
    PuncturedBall { center: Point, radius: f64, removed_node: usize },
    Ball { center: Point, radius: f64 },
    Comb { center: Point, center_node: usize, holes: Vec<CombHole>, jmax: usize, feasible_jmax: usize },
    ExteriorBlock { vertex: Point },
    HalfspaceSlit,
    RemovedBlock { center: Point, radius: f64, half_length: f64 },
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombHole {
    pub j: usize,
    pub center: Point,
    /// Radius of the closed ball whose nodes form the hole.
    pub radius: f64,
    pub nodes: Vec<usize>,
    /// Measured condenser capacity relative to the dyadic ball around the comb centre.
    pub capacity: f64,
    pub budget: f64,
    pub budget_met: bool,
}

impl Gallery {
    pub fn name(&self) -> &'static str {
        match self {
            Gallery::PuncturedBall { .. } => "punctured_ball",
            Gallery::Ball { .. } => "ball",
            Gallery::Comb { .. } => "comb",
            Gallery::ExteriorBlock { .. } => "exterior_block",
            Gallery::HalfspaceSlit => "halfspace_slit",
            Gallery::RemovedBlock { .. } => "removed_block",
            Gallery::Custom => "custom",
        }
    }

    pub fn point_of_interest(&self, lattice: &Lattice) -> Option<Point> {
        match self {
            Gallery::PuncturedBall { removed_node, .. } => Some(lattice.node_point(*removed_node)),
            Gallery::Comb { center_node, .. } => Some(lattice.node_point(*center_node)),
            Gallery::Ball { center, .. } | Gallery::RemovedBlock { center, .. } => Some(*center),
            Gallery::ExteriorBlock { vertex } => Some(*vertex),
            Gallery::HalfspaceSlit => Some([0.0, 0.0]),
            Gallery::Custom => None,
        }
    }
}

/// Serializable recipe for a gallery mask; the comb needs a weight table because its
/// holes are sized by measured capacity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainSpec {
    PuncturedBall {
        #[serde(default)]
        center: Point,
        #[serde(default = "unit")]
        radius: f64,
    },
    Ball {
        #[serde(default)]
        center: Point,
        #[serde(default = "unit")]
        radius: f64,
    },
    Comb {
        #[serde(default)]
        center: Point,
        #[serde(default)]
        jmax: Option<usize>,
    },
    ExteriorBlock {
        #[serde(default)]
        vertex: Point,
    },
    RemovedBlock {
        #[serde(default)]
        center: Point,
        #[serde(default = "unit")]
        radius: f64,
        half_length: f64,
    },
    HalfspaceSlit,
}

fn unit() -> f64 {
    1.0
}

impl DomainSpec {
    pub fn build(&self, table: &WeightTable, opts: &SolveOptions) -> Result<DomainMask> {
        let l = table.lattice();
        match self {
            DomainSpec::PuncturedBall { center, radius } => make_punctured_ball(l, *center, *radius),
            DomainSpec::Ball { center, radius } => make_ball(l, *center, *radius),
            DomainSpec::Comb { center, jmax } => make_comb(table, *center, *jmax, opts),
            DomainSpec::ExteriorBlock { vertex } => make_exterior_block(l, *vertex),
            DomainSpec::RemovedBlock {
                center,
                radius,
                half_length,
            } => make_removed_block(l, *center, *radius, *half_length),
            DomainSpec::HalfspaceSlit => make_halfspace_slit(l),
        }
    }
}

fn check_ball(lattice: &Lattice, x0: &Point, r: f64) -> Result<()> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::config("domain.radius", format!("radius must lie in (0, 1], got {r}")));
    }
    let bx = lattice.box_region();
    let margin = 2.0 * lattice.h();
    for a in 0..lattice.dim() {
        if x0[a] - r < bx.lo[a] + margin || x0[a] + r > bx.hi(a) - margin {
            return Err(Error::config(
                "domain.center",
                format!("ball B({x0:?}, {r}) is not inside the box with a two-cell margin"),
            ));
        }
    }
    Ok(())
}

fn ball_status(lattice: &Lattice, x0: &Point, r: f64) -> Vec<NodeStatus> {
    (0..lattice.node_count())
        .map(|i| {
            if dist(&lattice.node_point(i), x0) < r {
                NodeStatus::Free
            } else {
                NodeStatus::Fixed
            }
        })
        .collect()
}

/// `B(x0, R)` with the node nearest `x0` removed.
pub fn make_punctured_ball(lattice: &Lattice, x0: Point, radius: f64) -> Result<DomainMask> {
    check_ball(lattice, &x0, radius)?;
    let mut status = ball_status(lattice, &x0, radius);
    let c = lattice.nearest_node(&x0);
    status[c] = NodeStatus::Fixed;
    DomainMask::new(
        *lattice,
        status,
        vec![c],
        Gallery::PuncturedBall {
            center: x0,
            radius,
            removed_node: c,
        },
    )
}

/// `B(x0, R)` without a puncture (reference for removability runs).
pub fn make_ball(lattice: &Lattice, x0: Point, radius: f64) -> Result<DomainMask> {
    check_ball(lattice, &x0, radius)?;
    let status = ball_status(lattice, &x0, radius);
    DomainMask::new(*lattice, status, vec![], Gallery::Ball { center: x0, radius })
}

/// `B(x0, R)` minus the closed block `|x_1 - x0_1| <= half_length` (and `|x_2 - x0_2| <= half_length` in 2D).
pub fn make_removed_block(lattice: &Lattice, x0: Point, radius: f64, half_length: f64) -> Result<DomainMask> {
    check_ball(lattice, &x0, radius)?;
    if !(half_length > 0.0 && half_length < radius) {
        return Err(Error::config("domain.half_length", "block half length must lie in (0, radius)"));
    }
    let mut status = ball_status(lattice, &x0, radius);
    let mut removed = Vec::new();
    for (i, st) in status.iter_mut().enumerate() {
        let x = lattice.node_point(i);
        if (0..lattice.dim()).all(|a| (x[a] - x0[a]).abs() <= half_length) {
            *st = NodeStatus::Fixed;
            removed.push(i);
        }
    }
    if removed.is_empty() {
        // at least the node nearest the centre
        let c = lattice.nearest_node(&x0);
        status[c] = NodeStatus::Fixed;
        removed.push(c);
    }
    DomainMask::new(
        *lattice,
        status,
        removed,
        Gallery::RemovedBlock {
            center: x0,
            radius,
            half_length,
        },
    )
}

/// Largest `j` whose comb hole centre `3/4 * 2^{-j}` is at least `8h` from the centre.
pub fn comb_feasible_jmax(lattice: &Lattice) -> usize {
    let h = lattice.h();
    let mut j = 0;
    while 0.75 * 0.5f64.powi(j as i32 + 1) >= 8.0 * h {
        j += 1;
    }
    j
}

/// The comb: the unit ball around `center`, minus the node nearest `center`, minus holes
/// `K_j` at `x_j = c + (3/4) 2^{-j} e_1`, `j = 1..=jmax`. Each hole is the largest
/// node-representable closed ball of radius `< 2^{-j}/8` whose measured condenser
/// capacity relative to `B(c, 2^{-j})` is below `2^{-(j+1)^2}`; if even a single node
/// exceeds the budget, the hole is that single node and the mask carries a flag.
pub fn make_comb(table: &WeightTable, center: Point, jmax: Option<usize>, opts: &SolveOptions) -> Result<DomainMask> {
    let lattice = *table.lattice();
    check_ball(&lattice, &center, 1.0)?;
    let feasible = comb_feasible_jmax(&lattice);
    let jmax = jmax.unwrap_or(feasible);
    if jmax > feasible || jmax == 0 {
        return Err(Error::config(
            "domain.jmax",
            format!("jmax = {jmax} not resolvable on this grid; max feasible jmax is {feasible}"),
        ));
    }
    let mut status = ball_status(&lattice, &center, 1.0);
    let c = lattice.nearest_node(&center);
    status[c] = NodeStatus::Fixed;
    let p0 = lattice.node_point(c);
    let pts = lattice.points();
    let mut holes = Vec::with_capacity(jmax);
    let mut flags = vec![format!("comb truncated at jmax = {jmax} (finite resolution)")];
    for j in 1..=jmax {
        let scale = 0.5f64.powi(j as i32);
        let xj = [p0[0] + 0.75 * scale, p0[1]];
        let budget = 0.5f64.powi(((j + 1) * (j + 1)) as i32);
        let outer: Vec<usize> = (0..pts.len()).filter(|&i| dist(&pts[i], &p0) < scale).collect();
        let mut by_dist: Vec<(f64, usize)> = outer
            .iter()
            .map(|&i| (dist(&pts[i], &xj), i))
            .filter(|(d, _)| *d < scale / 8.0)
            .collect();
        if by_dist.is_empty() {
            by_dist.push((dist(&pts[lattice.nearest_node(&xj)], &xj), lattice.nearest_node(&xj)));
        }
        by_dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        // candidate radii: distinct distances
        let mut radii: Vec<f64> = by_dist.iter().map(|d| d.0).collect();
        radii.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1e-300));
        let set_for = |r: f64| -> Vec<usize> {
            let mut v: Vec<usize> = by_dist.iter().filter(|d| d.0 <= r * (1.0 + 1e-12)).map(|d| d.1).collect();
            v.sort_unstable();
            v
        };
        let cap = |k: &[usize]| condenser_capacity(table, k, &outer, opts).map(|r| r.value);
        // bisection over candidate index for the largest radius meeting the budget
        let first = set_for(radii[0]);
        let c_first = cap(&first)?;
        let (radius, nodes, capacity, met) = if c_first >= budget {
            let single = vec![by_dist[0].1];
            let c1 = if first.len() == 1 { c_first } else { cap(&single)? };
            (0.0, single, c1, c1 < budget)
        } else {
            let (mut lo, mut hi) = (0usize, radii.len()); // radii[lo] meets, radii[hi] (if any) fails
            let mut c_lo = c_first;
            while hi - lo > 1 {
                let mid = (lo + hi) / 2;
                let cm = cap(&set_for(radii[mid]))?;
                if cm < budget {
                    lo = mid;
                    c_lo = cm;
                } else {
                    hi = mid;
                }
            }
            (radii[lo], set_for(radii[lo]), c_lo, true)
        };
        if !met {
            flags.push(format!("budget unverified at this h (j = {j}: capacity {capacity:.4e} >= {budget:.4e})"));
        }
        for &i in &nodes {
            status[i] = NodeStatus::Fixed;
        }
        holes.push(CombHole {
            j,
            center: xj,
            radius,
            nodes,
            capacity,
            budget,
            budget_met: met,
        });
    }
    let mut removed = vec![c];
    removed.extend(holes.iter().flat_map(|h| h.nodes.iter().copied()));
    Ok(DomainMask::new(
        lattice,
        status,
        removed,
        Gallery::Comb {
            center,
            center_node: c,
            holes,
            jmax,
            feasible_jmax: feasible,
        },
    )?
    .with_flags(flags))
}

fn on_cell_boundary(lattice: &Lattice, x: f64, axis: usize) -> bool {
    let t = (x - lattice.lo()[axis]) / lattice.h();
    (t - t.round()).abs() < 1e-9
}

/// 1D: `Ω = (x0, x0 + 1)`. 2D: `B(x0 + (1/2, 1/2), 1)` minus the closed quadrant `{y <= x0}`.
pub fn make_exterior_block(lattice: &Lattice, x0: Point) -> Result<DomainMask> {
    for a in 0..lattice.dim() {
        if !on_cell_boundary(lattice, x0[a], a) {
            return Err(Error::config("domain.vertex", format!("vertex {x0:?} is not on a cell boundary")));
        }
    }
    let bx = lattice.box_region();
    let h = lattice.h();
    let status: Vec<NodeStatus> = if lattice.dim() == 1 {
        if x0[0] + 1.0 > bx.hi(0) - h || x0[0] < bx.lo[0] + h {
            return Err(Error::config("domain.vertex", "interval (x0, x0+1) does not fit in the box"));
        }
        (0..lattice.node_count())
            .map(|i| {
                let x = lattice.node_point(i)[0];
                if x > x0[0] && x < x0[0] + 1.0 {
                    NodeStatus::Free
                } else {
                    NodeStatus::Fixed
                }
            })
            .collect()
    } else {
        let c = [x0[0] + 0.5, x0[1] + 0.5];
        check_ball(lattice, &c, 1.0)?;
        (0..lattice.node_count())
            .map(|i| {
                let x = lattice.node_point(i);
                if dist(&x, &c) < 1.0 && !(x[0] <= x0[0] && x[1] <= x0[1]) {
                    NodeStatus::Free
                } else {
                    NodeStatus::Fixed
                }
            })
            .collect()
    };
    DomainMask::new(*lattice, status, vec![], Gallery::ExteriorBlock { vertex: x0 })
}

/// Upper half of the unit ball (2D only).
pub fn make_halfspace_slit(lattice: &Lattice) -> Result<DomainMask> {
    if lattice.dim() != 2 {
        return Err(Error::config("lattice.dim", "the half-space slit domain is two-dimensional"));
    }
    check_ball(lattice, &[0.0, 0.0], 1.0)?;
    let status = (0..lattice.node_count())
        .map(|i| {
            let x = lattice.node_point(i);
            if dist(&x, &[0.0, 0.0]) < 1.0 && x[1] > 0.0 {
                NodeStatus::Free
            } else {
                NodeStatus::Fixed
            }
        })
        .collect();
    DomainMask::new(*lattice, status, vec![], Gallery::HalfspaceSlit)
}

/// FREE nodes in the dyadic annulus `2^{-m-1} <= |x - x0| < 2^{-m}`.
pub fn shell_nodes(mask: &DomainMask, x0: &Point, m: u32) -> Result<Vec<usize>> {
    let l = mask.lattice();
    let outer = 0.5f64.powi(m as i32);
    if outer < 4.0 * l.h() {
        return Err(Error::config("shell.m", format!("shell 2^-{m} is below four cells")));
    }
    let inner = 0.5 * outer;
    Ok((0..l.node_count())
        .filter(|&i| {
            if !mask.is_free(i) {
                return false;
            }
            let d = dist(&l.node_point(i), x0);
            d >= inner && d < outer
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn punctured_ball_counts() {
        let l = Lattice::default_box(1, 64).unwrap();
        let m = make_punctured_ball(&l, [0.0, 0.0], 1.0).unwrap();
        assert_eq!(m.removed().len(), 1);
        let r = m.removed()[0];
        assert!(dist(&l.node_point(r), &[0.0, 0.0]) <= l.h() / 2.0 + 1e-15);
        let in_ball = (0..64).filter(|&i| l.node_point(i)[0].abs() < 1.0).count();
        assert_eq!(m.free_count(), in_ball - 1);
        assert!(make_punctured_ball(&l, [1.5, 0.0], 1.0).is_err());
    }

    #[test]
    fn comb_feasible_jmax_arithmetic() {
        let l = Lattice::default_box(1, 8192).unwrap();
        let h = l.h();
        let expected: usize = (1..64usize).filter(|&j| 3.0 * 0.5f64.powi(j as i32) / 4.0 >= 8.0 * h).max().unwrap();
        assert_eq!(comb_feasible_jmax(&l), expected);
        assert_eq!(expected, 7);
    }

    #[test]
    fn exterior_block_1d() {
        let l = Lattice::default_box(1, 64).unwrap();
        let m = make_exterior_block(&l, [0.0, 0.0]).unwrap();
        for i in 0..64 {
            let x = l.node_point(i)[0];
            assert_eq!(m.is_free(i), x > 0.0 && x < 1.0);
        }
        assert!(make_exterior_block(&l, [0.01, 0.0]).is_err());
        // block of fixed nodes of width >= 0.5 to the left of the vertex
        let left = (0..64).filter(|&i| {
            let x = l.node_point(i)[0];
            x < 0.0 && x > -0.5
        });
        assert!(left.into_iter().all(|i| !m.is_free(i)));
    }

    #[test]
    fn exterior_block_2d_quadrant_fixed() {
        let l = Lattice::default_box(2, 32).unwrap();
        let m = make_exterior_block(&l, [0.0, 0.0]).unwrap();
        for i in 0..l.node_count() {
            let x = l.node_point(i);
            if x[0] < 0.0 && x[1] < 0.0 {
                assert!(!m.is_free(i));
            }
        }
        assert!(m.is_free(l.nearest_node(&[0.1, 0.1])));
    }

    #[test]
    fn halfspace_slit_rows() {
        let l = Lattice::default_box(2, 32).unwrap();
        let m = make_halfspace_slit(&l).unwrap();
        let h = l.h();
        assert!(m.is_free(l.nearest_node(&[h / 2.0, h / 2.0])));
        assert!(!m.is_free(l.nearest_node(&[h / 2.0, -h / 2.0])));
        let ball = (0..l.node_count()).filter(|&i| dist(&l.node_point(i), &[0.0, 0.0]) < 1.0).count();
        let row = (0..l.node_count())
            .filter(|&i| {
                let x = l.node_point(i);
                x[0].abs() < 1.0 && (x[1] - h / 2.0).abs() < 1e-12
            })
            .count();
        assert!((m.free_count() as i64 - ball as i64 / 2).unsigned_abs() as usize <= row);
        assert!(make_halfspace_slit(&Lattice::default_box(1, 32).unwrap()).is_err());
    }

    #[test]
    fn shells_disjoint_and_covering() {
        let l = Lattice::default_box(1, 256).unwrap();
        let m = make_punctured_ball(&l, [0.0, 0.0], 1.0).unwrap();
        let x0 = m.point_of_interest().unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for k in 1..=4 {
            for i in shell_nodes(&m, &x0, k).unwrap() {
                assert!(seen.insert(i));
            }
        }
        assert!(shell_nodes(&m, &x0, 7).is_err());
        let s1 = shell_nodes(&m, &x0, 1).unwrap();
        assert!(s1.iter().all(|&i| {
            let d = (l.node_point(i)[0] - x0[0]).abs();
            (0.25..0.5).contains(&d)
        }));
    }
}
