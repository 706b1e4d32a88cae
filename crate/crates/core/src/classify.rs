//! Boundary-point classification from the single solution `H d_{x0}`, the gallery ground
//! truth, and the refinement experiments built around it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{dist, make_ball, make_punctured_ball, shell_nodes, DataSpec, DomainMask, DomainSpec, Gallery, Lattice, Point};
use crate::energy::residual_at_node;
use crate::error::{Error, Result};
use crate::kernel::{build_weight_table, KernelSpec, WeightTable};
use crate::solve::{capacitary_potential, dirichlet_solve, SolveOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    pub delta_reg: f64,
    pub delta_gap: f64,
    pub window: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            delta_reg: 0.05,
            delta_gap: 0.10,
            window: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Label {
    Regular,
    Semiregular,
    StronglyIrregular,
    Indeterminate,
}

impl Label {
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Regular => "regular",
            Label::Semiregular => "semiregular",
            Label::StronglyIrregular => "strongly-irregular",
            Label::Indeterminate => "indeterminate",
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The decision rule on the window estimates `ℓ̂ <= û`.
pub fn decide(l_hat: f64, u_hat: f64, t: &Thresholds) -> Label {
    if u_hat <= t.delta_reg {
        Label::Regular
    } else if l_hat >= t.delta_reg && u_hat - l_hat <= t.delta_gap {
        Label::Semiregular
    } else if l_hat <= t.delta_reg && u_hat >= t.delta_reg + t.delta_gap {
        Label::StronglyIrregular
    } else {
        Label::Indeterminate
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellStat {
    pub m: u32,
    pub nodes: usize,
    pub min: f64,
    pub max: f64,
    /// Node where the minimum is attained (lowest index on ties).
    pub argmin: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub x0: Point,
    pub h: f64,
    pub s: f64,
    pub p: f64,
    pub shells: Vec<ShellStat>,
    pub l_hat: f64,
    pub u_hat: f64,
    pub label: Label,
    pub thresholds: Thresholds,
    /// First and last shell index `m` of the estimation window.
    pub window: (u32, u32),
    /// `|sp - dim| < 0.1`: reported, never asserted.
    pub borderline: bool,
    pub flags: Vec<String>,
}

impl ClassificationReport {
    pub fn shells_csv(&self) -> String {
        let mut s = String::from("m,nodes,min,max,argmin\n");
        for r in &self.shells {
            s.push_str(&format!("{},{},{:e},{:e},{}\n", r.m, r.nodes, r.min, r.max, r.argmin));
        }
        s
    }
}

/// Shell statistics of `u` around `x0` for every non-empty resolved shell `2^{-m} >= 4h`,
/// `m >= 0`.
pub fn shell_stats(mask: &DomainMask, x0: &Point, u: &[f64]) -> Vec<ShellStat> {
    let mut out = Vec::new();
    let mut m = 0u32;
    while let Ok(nodes) = shell_nodes(mask, x0, m) {
        if let Some(&first) = nodes.first() {
            let (mut min, mut max, mut argmin) = (u[first], u[first], first);
            for &i in &nodes[1..] {
                if u[i] < min {
                    min = u[i];
                    argmin = i;
                }
                max = max.max(u[i]);
            }
            out.push(ShellStat {
                m,
                nodes: nodes.len(),
                min,
                max,
                argmin,
            });
        }
        m += 1;
    }
    out
}

fn is_boundary_location(mask: &DomainMask, x0: &Point) -> bool {
    let l = mask.lattice();
    let h = l.h();
    // within one cell of both a FREE and a FIXED node
    let near = |free: bool| {
        (0..l.node_count()).any(|i| mask.is_free(i) == free && dist(&l.node_point(i), x0) <= 1.5 * h)
    };
    near(true) && near(false)
}

/// Solves `H d_{x0}` and applies the window decision rule.
pub fn classify_point(table: &WeightTable, mask: &DomainMask, x0: &Point, t: &Thresholds, opts: &SolveOptions) -> Result<ClassificationReport> {
    if !is_boundary_location(mask, x0) {
        return Err(Error::Contract(format!("{x0:?} is not a boundary location of the mask")));
    }
    if t.window == 0 {
        return Err(Error::config("thresholds.window", "window must be positive"));
    }
    let sol = dirichlet_solve(table, mask, &DataSpec::DistCap { x0: *x0 }, opts)?.require_converged()?;
    let shells = shell_stats(mask, x0, sol.solution.values());
    if shells.len() < t.window.max(3) {
        return Err(Error::config(
            "lattice.cells",
            format!("only {} resolvable shells around {x0:?}; need {}", shells.len(), t.window.max(3)),
        ));
    }
    let win = &shells[shells.len() - t.window..];
    let l_hat = win.iter().map(|s| s.min).fold(f64::INFINITY, f64::min);
    let u_hat = win.iter().map(|s| s.max).fold(f64::NEG_INFINITY, f64::max);
    let label = decide(l_hat, u_hat, t);
    let k = table.kernel();
    let borderline = (k.sp() - mask.lattice().dim() as f64).abs() < crate::capacity::BORDERLINE_BAND;
    let (m0, m1) = (win[0].m, win[win.len() - 1].m);
    let mut flags = vec![format!("resolved shells: m = {}..{} (2^-m >= 4h); window m = {m0}..{m1}", shells[0].m, m1)];
    if label == Label::Indeterminate {
        flags.push("unresolved scales: window estimates do not separate the three classes".into());
    }
    if borderline {
        flags.push("borderline: sp within 0.1 of dim".into());
    }
    flags.extend(mask.flags().iter().cloned());
    Ok(ClassificationReport {
        x0: *x0,
        h: mask.lattice().h(),
        s: k.s(),
        p: k.p(),
        shells,
        l_hat,
        u_hat,
        label,
        thresholds: *t,
        window: (m0, m1),
        borderline,
        flags,
    })
}

/// Ground-truth label of a gallery point from its construction.
pub fn geometric_oracle(kernel: &KernelSpec, mask: &DomainMask, x0: &Point) -> Result<Label> {
    let l = mask.lattice();
    let point_has_zero_capacity = kernel.sp() <= l.dim() as f64;
    let at = |node: usize| dist(&l.node_point(node), x0) <= 0.5 * l.h();
    match mask.gallery() {
        Gallery::PuncturedBall { removed_node, .. } if at(*removed_node) => Ok(if point_has_zero_capacity {
            Label::Semiregular
        } else {
            Label::Regular
        }),
        Gallery::Comb { center_node, .. } if at(*center_node) => Ok(if point_has_zero_capacity {
            Label::StronglyIrregular
        } else {
            Label::Regular
        }),
        // fat complements: spheres, quadrants, half-spaces, blocks
        Gallery::PuncturedBall { .. }
        | Gallery::Comb { .. }
        | Gallery::Ball { .. }
        | Gallery::ExteriorBlock { .. }
        | Gallery::RemovedBlock { .. }
        | Gallery::HalfspaceSlit => {
            if is_boundary_location(mask, x0) {
                Ok(Label::Regular)
            } else {
                Err(Error::Contract(format!("{x0:?} is not a boundary location of the mask")))
            }
        }
        Gallery::Custom => Err(Error::Unsupported("no ground truth for custom masks".into())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceRow {
    pub m: u32,
    pub node: usize,
    pub value: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceSeries {
    pub data: DataSpec,
    pub g_x0: f64,
    pub rows: Vec<SequenceRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniversalSequence {
    pub x0: Point,
    pub series: Vec<SequenceSeries>,
    pub flags: Vec<String>,
}

/// Evaluates `H g(y_m) - g(x0)` along the shell argmins `y_m` of `H d_{x0}`; requires a
/// strongly irregular label.
pub fn universal_sequence_probe(
    table: &WeightTable,
    mask: &DomainMask,
    report: &ClassificationReport,
    test_data: &[DataSpec],
    opts: &SolveOptions,
) -> Result<UniversalSequence> {
    if report.label != Label::StronglyIrregular {
        return Err(Error::Contract(format!(
            "universal sequence needs a strongly irregular point, got {}",
            report.label
        )));
    }
    let mut u = universal_sequence_along(table, mask, &report.x0, &report.shells, test_data, opts)?;
    u.flags.extend(report.flags.iter().cloned());
    Ok(u)
}

/// The same evaluation along given shells, without checking the label.
pub fn universal_sequence_along(
    table: &WeightTable,
    mask: &DomainMask,
    x0: &Point,
    shells: &[ShellStat],
    test_data: &[DataSpec],
    opts: &SolveOptions,
) -> Result<UniversalSequence> {
    let series = test_data
        .par_iter()
        .map(|g| {
            let g_x0 = g
                .eval(x0)
                .ok_or_else(|| Error::Unsupported("test data must have a pointwise value at x0".into()))?;
            let u = dirichlet_solve(table, mask, g, opts)?.require_converged()?;
            let rows = shells
                .iter()
                .map(|s| {
                    let value = u.solution.values()[s.argmin];
                    SequenceRow {
                        m: s.m,
                        node: s.argmin,
                        value,
                        deviation: value - g_x0,
                    }
                })
                .collect();
            Ok(SequenceSeries { data: g.clone(), g_x0, rows })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut flags = Vec::new();
    let first = shells.first().map_or(0, |s| s.m);
    let last = shells.last().map_or(0, |s| s.m);
    let skipped = (first..=last).filter(|m| !shells.iter().any(|s| s.m == *m)).count();
    if skipped > 0 {
        flags.push(format!("{skipped} empty shells skipped"));
    }
    Ok(UniversalSequence { x0: *x0, series, flags })
}

fn three_grids(lattice: &Lattice) -> [Lattice; 3] {
    [*lattice, lattice.refined(), lattice.refined().refined()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovabilityRow {
    pub h: f64,
    pub free_nodes: usize,
    pub difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovabilityTable {
    pub x0: Point,
    pub sp: f64,
    pub dim: usize,
    pub rows: Vec<RemovabilityRow>,
    pub flags: Vec<String>,
}

/// Sup-norm difference of `H d_{x0}` on `B(x0, R)` with and without the node at `x0`,
/// over the common FREE nodes, on three nested grids.
pub fn removability_experiment(kernel: &KernelSpec, lattice: &Lattice, x0: &Point, radius: f64, opts: &SolveOptions) -> Result<RemovabilityTable> {
    let g = DataSpec::DistCap { x0: *x0 };
    let mut rows = Vec::with_capacity(3);
    for l in three_grids(lattice) {
        let table = build_weight_table(kernel, &l)?;
        let punct = make_punctured_ball(&l, *x0, radius)?;
        let full = make_ball(&l, *x0, radius)?;
        let a = dirichlet_solve(&table, &punct, &g, opts)?.require_converged()?;
        let b = dirichlet_solve(&table, &full, &g, opts)?.require_converged()?;
        let free = punct.free_nodes();
        let difference = free
            .iter()
            .map(|&i| (a.solution.values()[i] - b.solution.values()[i]).abs())
            .fold(0.0, f64::max);
        rows.push(RemovabilityRow {
            h: l.h(),
            free_nodes: free.len(),
            difference,
        });
    }
    let mut flags = Vec::new();
    if kernel.sp() > lattice.dim() as f64 {
        flags.push("sp > dim: a point has positive capacity and is not expected to be removable".into());
    }
    Ok(RemovabilityTable {
        x0: *x0,
        sp: kernel.sp(),
        dim: lattice.dim(),
        rows,
        flags,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpnessRow {
    pub h: f64,
    pub set_nodes: usize,
    /// `max_{i in K} |residual_i|` of the capacitary potential.
    pub max_residual: f64,
    /// `Σ_{i in K} |residual_i|`.
    pub total_residual: f64,
    pub potential_min: f64,
    pub potential_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpnessTable {
    pub domain: DomainSpec,
    pub sp: f64,
    pub rows: Vec<SharpnessRow>,
}

/// Residuals on `K` of the capacitary potential of the removed set `K` in `Ω ∪ K`, on three
/// nested grids. A punctured ball gives the single-node control.
pub fn sharpness_experiment(kernel: &KernelSpec, lattice: &Lattice, domain: &DomainSpec, opts: &SolveOptions) -> Result<SharpnessTable> {
    if !matches!(domain, DomainSpec::RemovedBlock { .. } | DomainSpec::PuncturedBall { .. }) {
        return Err(Error::Unsupported("sharpness runs on removed-block or punctured-ball domains".into()));
    }
    let mut rows = Vec::with_capacity(3);
    for l in three_grids(lattice) {
        let table = build_weight_table(kernel, &l)?;
        let mask = domain.build(&table, opts)?;
        let k = mask.removed().to_vec();
        if matches!(domain, DomainSpec::RemovedBlock { .. }) && k.len() < 1 << l.dim() {
            return Err(Error::config("domain.half_length", "removed block has fewer than 2^dim nodes"));
        }
        let mut omega = mask.free_nodes();
        omega.extend(&k);
        omega.sort_unstable();
        let u = capacitary_potential(&table, &k, &omega, opts)?.require_converged()?.solution;
        let res = k
            .par_iter()
            .map(|&i| residual_at_node(&table, &u, i).map(f64::abs))
            .collect::<Result<Vec<f64>>>()?;
        let (potential_min, potential_max) = u
            .values()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        rows.push(SharpnessRow {
            h: l.h(),
            set_nodes: k.len(),
            max_residual: res.iter().copied().fold(0.0, f64::max),
            total_residual: res.iter().sum(),
            potential_min,
            potential_max,
        });
    }
    Ok(SharpnessTable {
        domain: domain.clone(),
        sp: kernel.sp(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub s: f64,
    pub p: f64,
    pub sp: f64,
    pub label: Label,
    pub oracle: Label,
    pub borderline: bool,
    pub l_hat: f64,
    pub u_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub domain: DomainSpec,
    pub rows: Vec<SweepRow>,
    /// Pairs `(a, b)` with `a` semiregular, `sp_b <= sp_a` and `b` not semiregular.
    pub implication_violations: Vec<(usize, usize)>,
}

/// Classifies the gallery point of `domain` for each `(s, p)` (multiplier and `λ` from
/// `base`) and checks that semiregularity propagates to smaller products `sp`.
pub fn sp_sweep(
    base: &KernelSpec,
    lattice: &Lattice,
    domain: &DomainSpec,
    pairs: &[(f64, f64)],
    t: &Thresholds,
    opts: &SolveOptions,
) -> Result<SweepReport> {
    let rows = pairs
        .par_iter()
        .map(|&(s, p)| {
            let kernel = KernelSpec::new(s, p, lattice.dim())?
                .with_multiplier(base.multiplier())?
                .with_lambda(base.lambda())?;
            let table = build_weight_table(&kernel, lattice)?;
            let mask = domain.build(&table, opts)?;
            let x0 = mask
                .point_of_interest()
                .ok_or_else(|| Error::Unsupported("domain has no distinguished point".into()))?;
            let r = classify_point(&table, &mask, &x0, t, opts)?;
            Ok(SweepRow {
                s,
                p,
                sp: s * p,
                label: r.label,
                oracle: geometric_oracle(&kernel, &mask, &x0)?,
                borderline: r.borderline,
                l_hat: r.l_hat,
                u_hat: r.u_hat,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut implication_violations = Vec::new();
    for (a, ra) in rows.iter().enumerate() {
        if ra.label != Label::Semiregular {
            continue;
        }
        for (b, rb) in rows.iter().enumerate() {
            if rb.sp <= ra.sp && rb.label != Label::Semiregular {
                implication_violations.push((a, b));
            }
        }
    }
    Ok(SweepReport {
        domain: domain.clone(),
        rows,
        implication_violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::make_exterior_block;

    #[test]
    fn decision_rule_regions() {
        let t = Thresholds::default();
        assert_eq!(decide(0.0, 0.04, &t), Label::Regular);
        assert_eq!(decide(0.3, 0.35, &t), Label::Semiregular);
        assert_eq!(decide(0.01, 0.4, &t), Label::StronglyIrregular);
        assert_eq!(decide(0.2, 0.5, &t), Label::Indeterminate);
        assert_eq!(decide(0.01, 0.1, &t), Label::Indeterminate);
    }

    #[test]
    fn labels_serialize_with_hyphens() {
        assert_eq!(serde_json::to_string(&Label::StronglyIrregular).unwrap(), "\"strongly-irregular\"");
    }

    #[test]
    fn exterior_block_shells_decay_and_are_sandwiched() {
        let l = Lattice::default_box(1, 1024).unwrap();
        let k = KernelSpec::new(0.4, 2.0, 1).unwrap();
        let t = build_weight_table(&k, &l).unwrap();
        let mask = make_exterior_block(&l, [0.0, 0.0]).unwrap();
        let r = classify_point(&t, &mask, &[0.0, 0.0], &Thresholds::default(), &SolveOptions::default()).unwrap();
        assert!(r.shells.iter().all(|s| s.min <= s.max));
        assert!(r.l_hat <= r.u_hat && r.l_hat >= 0.0 && r.u_hat <= 1.0);
        assert_eq!(geometric_oracle(&k, &mask, &[0.0, 0.0]).unwrap(), Label::Regular);
        // regular point: shell maxima decrease towards 0 and never reach semiregular shape
        assert!(r.shells.windows(2).all(|w| w[1].max < w[0].max));
        assert_ne!(r.label, Label::Semiregular);
    }

    #[test]
    fn interior_points_are_rejected() {
        let l = Lattice::default_box(1, 256).unwrap();
        let k = KernelSpec::new(0.4, 2.0, 1).unwrap();
        let t = build_weight_table(&k, &l).unwrap();
        let mask = make_ball(&l, [0.0, 0.0], 1.0).unwrap();
        assert!(classify_point(&t, &mask, &[0.0, 0.0], &Thresholds::default(), &SolveOptions::default()).is_err());
    }

    #[test]
    fn oracle_follows_point_capacity() {
        let l = Lattice::default_box(1, 256).unwrap();
        let mask = make_punctured_ball(&l, [0.0, 0.0], 1.0).unwrap();
        let x0 = mask.point_of_interest().unwrap();
        let lo = KernelSpec::new(0.4, 2.0, 1).unwrap();
        let hi = KernelSpec::new(0.9, 2.5, 1).unwrap();
        assert_eq!(geometric_oracle(&lo, &mask, &x0).unwrap(), Label::Semiregular);
        assert_eq!(geometric_oracle(&hi, &mask, &x0).unwrap(), Label::Regular);
    }

    #[test]
    fn identical_masks_give_zero_difference() {
        let l = Lattice::default_box(1, 128).unwrap();
        let k = KernelSpec::new(0.3, 2.0, 1).unwrap();
        let t = build_weight_table(&k, &l).unwrap();
        let mask = make_punctured_ball(&l, [0.0, 0.0], 1.0).unwrap();
        let g = DataSpec::DistCap { x0: [0.0, 0.0] };
        let a = dirichlet_solve(&t, &mask, &g, &SolveOptions::default()).unwrap();
        let b = dirichlet_solve(&t, &mask, &g, &SolveOptions::default()).unwrap();
        assert_eq!(a.solution.max_abs_diff(&b.solution), 0.0);
    }
}
