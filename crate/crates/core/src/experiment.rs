//! Task dispatch: turns an `ExperimentConfig` into report files.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::capacity::{
    capacity_scaling_slope, closed_ball_nodes, condenser_capacity, open_ball_nodes, sobolev_capacity, wiener_profile,
    zero_capacity_probe, CapacityKind, WienerTrend,
};
use crate::classify::{
    classify_point, geometric_oracle, removability_experiment, sharpness_experiment, sp_sweep, universal_sequence_probe,
    ClassificationReport, Label,
};
use crate::config::{CapacityTask, ExperimentConfig, Task};
use crate::domain::{DataSpec, DomainMask, DomainSpec, NodeStatus, Point};
use crate::error::{Error, Result};
use crate::kernel::{build_weight_table, KernelSpec, WeightTable};
use crate::report::{num, render_svg, to_json, write_atomic, Csv, Envelope, Series};
use crate::solve::{dirichlet_solve, SolveOptions};

/// One output file.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

fn art(name: &str, contents: impl Into<String>) -> Artifact {
    Artifact {
        name: name.into(),
        contents: contents.into(),
    }
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    hash: String,
    opts: SolveOptions,
}

impl Ctx<'_> {
    fn envelope<T: Serialize>(&self, h: f64, flags: &[String], result: &T) -> Result<String> {
        to_json(&Envelope {
            task: self.cfg.task.as_str(),
            config_hash: &self.hash,
            seed: self.cfg.seed,
            h,
            flags,
            result,
        })
    }

    fn setup(&self) -> Result<(KernelSpec, WeightTable, DomainMask, Point)> {
        let kernel = self.cfg.kernel_spec()?;
        let lattice = self.cfg.lattice()?;
        let table = build_weight_table(&kernel, &lattice)?;
        let mask = self.cfg.domain.build(&table, &self.opts)?;
        let x0 = self.point(&mask)?;
        Ok((kernel, table, mask, x0))
    }

    fn point(&self, mask: &DomainMask) -> Result<Point> {
        self.cfg
            .point
            .or_else(|| mask.point_of_interest())
            .ok_or_else(|| Error::config("point", "no point given and the domain has no distinguished point"))
    }
}

/// Runs the configured task and returns its artifacts (nothing is written).
pub fn run(cfg: &ExperimentConfig) -> Result<Vec<Artifact>> {
    cfg.validate()?;
    let ctx = Ctx {
        cfg,
        hash: cfg.hash(),
        opts: cfg.solve_options(),
    };
    match cfg.task {
        Task::Solve => solve(&ctx),
        Task::Capacity => capacity(&ctx),
        Task::Wiener => wiener(&ctx),
        Task::Classify => classify(&ctx),
        Task::Sweep => sweep(&ctx),
        Task::Removability => removability(&ctx),
        Task::Sharpness => sharpness(&ctx),
        Task::UniversalSequence => universal(&ctx),
        Task::Suite => suite(&ctx),
    }
}

/// Writes artifacts into `dir`, each atomically.
pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<()> {
    for a in artifacts {
        write_atomic(&dir.join(&a.name), a.contents.as_bytes())?;
    }
    Ok(())
}

fn solve(ctx: &Ctx) -> Result<Vec<Artifact>> {
    let (_, table, mask, x0) = ctx.setup()?;
    let data = ctx.cfg.data.clone().unwrap_or(DataSpec::DistCap { x0 });
    let r = dirichlet_solve(&table, &mask, &data, &ctx.opts)?.require_converged()?;
    let l = mask.lattice();
    let mut csv = Csv::new(&["node", "x", "y", "status", "u"]);
    for (i, u) in r.solution.values().iter().enumerate() {
        let x = l.node_point(i);
        let st = match mask.status(i) {
            NodeStatus::Free => "free",
            NodeStatus::Fixed => "fixed",
        };
        csv.row(&[i.to_string(), num(x[0]), num(x[1]), st.into(), num(*u)]);
    }
    #[derive(Serialize)]
    struct Summary<'a> {
        data: &'a DataSpec,
        domain: &'a str,
        free_nodes: usize,
        iterations: usize,
        final_gradient_norm: f64,
        energy: f64,
        far_field: f64,
    }
    let s = Summary {
        data: &data,
        domain: mask.gallery().name(),
        free_nodes: mask.free_count(),
        iterations: r.iterations,
        final_gradient_norm: r.final_gradient_norm,
        energy: r.energy,
        far_field: r.solution.far_field(),
    };
    Ok(vec![art("solution.csv", csv.as_str()), art("solve.json", ctx.envelope(l.h(), mask.flags(), &s)?)])
}

fn capacity(ctx: &Ctx) -> Result<Vec<Artifact>> {
    let kernel = ctx.cfg.kernel_spec()?;
    let lattice = ctx.cfg.lattice()?;
    let flags = vec!["node-set capacities only; extensions to open and arbitrary sets are not computed".to_string()];
    match &ctx.cfg.capacity {
        CapacityTask::Scaling { ks } => {
            let table = build_weight_table(&kernel, &lattice)?;
            let x0 = ctx.cfg.point.unwrap_or([0.0, 0.0]);
            let r = capacity_scaling_slope(&table, &x0, ks, &ctx.opts)?;
            let mut csv = Csv::new(&["k", "rho", "capacity"]);
            for p in &r.points {
                csv.row(&[p.k.to_string(), num(p.rho), num(p.capacity)]);
            }
            let svg = render_svg(
                "ball condenser capacity",
                "k (rho = 2^-k)",
                "log2 capacity",
                &[Series {
                    name: "log2 cap".into(),
                    points: r.points.iter().map(|p| (p.k as f64, p.capacity.log2())).collect(),
                }],
            )?;
            Ok(vec![
                art("capacity.csv", csv.as_str()),
                art("capacity.json", ctx.envelope(lattice.h(), &flags, &r)?),
                art("capacity.svg", svg),
            ])
        }
        CapacityTask::Probe { shape } => {
            let r = zero_capacity_probe(&kernel, &lattice, *shape, &ctx.opts)?;
            let mut csv = Csv::new(&["h", "nodes", "value"]);
            for row in &r.rows {
                csv.row(&[num(row.h), row.nodes.to_string(), num(row.value)]);
            }
            let svg = render_svg(
                "Sobolev capacity under refinement",
                "log2 h",
                "capacity",
                &[Series {
                    name: "C_h".into(),
                    points: r.rows.iter().map(|row| (row.h.log2(), row.value)).collect(),
                }],
            )?;
            Ok(vec![
                art("capacity.csv", csv.as_str()),
                art("capacity.json", ctx.envelope(lattice.h(), &flags, &r)?),
                art("capacity.svg", svg),
            ])
        }
        CapacityTask::Ball { kind, radius } => {
            let table = build_weight_table(&kernel, &lattice)?;
            let x0 = ctx.cfg.point.unwrap_or([0.0, 0.0]);
            let k = closed_ball_nodes(&lattice, &x0, *radius);
            let mut r = match kind {
                CapacityKind::Sobolev => sobolev_capacity(&table, &k, &ctx.opts)?,
                CapacityKind::Condenser => condenser_capacity(&table, &k, &open_ball_nodes(&lattice, &x0, 2.0 * radius), &ctx.opts)?,
            };
            r.potential = None;
            Ok(vec![art("capacity.json", ctx.envelope(lattice.h(), &flags, &r)?)])
        }
    }
}

fn wiener(ctx: &Ctx) -> Result<Vec<Artifact>> {
    let (_, table, mask, x0) = ctx.setup()?;
    let w = wiener_profile(&table, &mask, &x0, &ctx.opts)?;
    let svg = render_svg(
        "Wiener partial sums",
        "k (rho = 2^-k)",
        "S_k",
        &[Series {
            name: "S_k".into(),
            points: w.rows.iter().map(|r| (r.k as f64, r.partial_sum)).collect(),
        }],
    )?;
    Ok(vec![
        art("wiener.csv", w.to_csv()),
        art("wiener.json", ctx.envelope(w.h, &w.flags, &w)?),
        art("wiener.svg", svg),
    ])
}

fn shell_plot(r: &ClassificationReport) -> Result<String> {
    render_svg(
        "shell statistics of H d_x0",
        "m (shell 2^-m-1 <= |x - x0| < 2^-m)",
        "H d_x0",
        &[
            Series {
                name: "shell min".into(),
                points: r.shells.iter().map(|s| (s.m as f64, s.min)).collect(),
            },
            Series {
                name: "shell max".into(),
                points: r.shells.iter().map(|s| (s.m as f64, s.max)).collect(),
            },
        ],
    )
}

#[derive(Serialize)]
struct Classified<'a> {
    report: &'a ClassificationReport,
    oracle: Option<Label>,
}

fn classify(ctx: &Ctx) -> Result<Vec<Artifact>> {
    let (kernel, table, mask, x0) = ctx.setup()?;
    let r = classify_point(&table, &mask, &x0, &ctx.cfg.thresholds, &ctx.opts)?;
    let oracle = geometric_oracle(&kernel, &mask, &x0).ok();
    Ok(vec![
        art("shells.csv", r.shells_csv()),
        art("classify.json", ctx.envelope(r.h, &r.flags, &Classified { report: &r, oracle })?),
        art("shells.svg", shell_plot(&r)?),
    ])
}

fn sweep(ctx: &Ctx) -> Result<Vec<Artifact>> {
    let kernel = ctx.cfg.kernel_spec()?;
    let lattice = ctx.cfg.lattice()?;
    let r = sp_sweep(&kernel, &lattice, &ctx.cfg.domain, &ctx.cfg.pairs, &ctx.cfg.thresholds, &ctx.opts)?;
    let mut csv = Csv::new(&["s", "p", "sp", "label", "oracle", "borderline", "l_hat", "u_hat"]);
    for row in &r.rows {
        csv.row(&[
            num(row.s),
            num(row.p),
            num(row.sp),
            row.label.to_string(),
            row.oracle.to_string(),
            row.borderline.to_string(),
            num(row.l_hat),
            num(row.u_hat),
        ]);
    }
    let flags = vec!["finite-scale evidence; borderline rows are reported, not asserted".to_string()];
    Ok(vec![art("sweep.csv", csv.as_str()), art("sweep.json", ctx.envelope(lattice.h(), &flags, &r)?)])
}

fn removability(ctx: &Ctx) -> Result<Vec<Artifact>> {
    let kernel = ctx.cfg.kernel_spec()?;
    let lattice = ctx.cfg.lattice()?;
    let (center, radius) = match ctx.cfg.domain {
        DomainSpec::PuncturedBall { center, radius } | DomainSpec::Ball { center, radius } => (center, radius),
        _ => return Err(Error::config("domain.kind", "removability runs on a punctured ball")),
    };
    let r = removability_experiment(&kernel, &lattice, &center, radius, &ctx.opts)?;
    let mut csv = Csv::new(&["h", "free_nodes", "difference"]);
    for row in &r.rows {
        csv.row(&[num(row.h), row.free_nodes.to_string(), num(row.difference)]);
    }
    let svg = render_svg(
        "punctured vs full ball",
        "log2 h",
        "sup difference",
        &[Series {
            name: "difference".into(),
            points: r.rows.iter().map(|row| (row.h.log2(), row.difference)).collect(),
        }],
    )?;
    Ok(vec![
        art("removability.csv", csv.as_str()),
        art("removability.json", ctx.envelope(lattice.h(), &r.flags, &r)?),
        art("removability.svg", svg),
    ])
}

fn sharpness(ctx: &Ctx) -> Result<Vec<Artifact>> {
    let kernel = ctx.cfg.kernel_spec()?;
    let lattice = ctx.cfg.lattice()?;
    let r = sharpness_experiment(&kernel, &lattice, &ctx.cfg.domain, &ctx.opts)?;
    let mut csv = Csv::new(&["h", "set_nodes", "max_residual", "total_residual", "potential_min", "potential_max"]);
    for row in &r.rows {
        csv.row(&[
            num(row.h),
            row.set_nodes.to_string(),
            num(row.max_residual),
            num(row.total_residual),
            num(row.potential_min),
            num(row.potential_max),
        ]);
    }
    Ok(vec![art("sharpness.csv", csv.as_str()), art("sharpness.json", ctx.envelope(lattice.h(), &[], &r)?)])
}

fn universal(ctx: &Ctx) -> Result<Vec<Artifact>> {
    let (_, table, mask, x0) = ctx.setup()?;
    let rep = classify_point(&table, &mask, &x0, &ctx.cfg.thresholds, &ctx.opts)?;
    let u = universal_sequence_probe(&table, &mask, &rep, &ctx.cfg.test_data, &ctx.opts)?;
    let mut csv = Csv::new(&["series", "m", "node", "value", "deviation"]);
    for (k, s) in u.series.iter().enumerate() {
        for row in &s.rows {
            csv.row(&[k.to_string(), row.m.to_string(), row.node.to_string(), num(row.value), num(row.deviation)]);
        }
    }
    Ok(vec![
        art("universal_sequence.csv", csv.as_str()),
        art("universal_sequence.json", ctx.envelope(rep.h, &u.flags, &u)?),
    ])
}

/// The default acceptance pairs `(s, p)`.
pub const SUITE_PAIRS: [(f64, f64); 4] = [(0.4, 2.0), (0.5, 2.0), (0.3, 3.0), (0.9, 2.5)];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteRow {
    pub domain: String,
    pub s: f64,
    pub p: f64,
    pub label: Label,
    pub oracle: Label,
    pub borderline: bool,
    pub l_hat: f64,
    pub u_hat: f64,
    pub wiener: WienerTrend,
    pub flags: Vec<String>,
}

/// The classification matrix {punctured ball, exterior block, comb} x pairs on the
/// configured lattice and multiplier.
pub fn suite_rows(base: &KernelSpec, cfg: &ExperimentConfig, opts: &SolveOptions) -> Result<Vec<SuiteRow>> {
    let lattice = cfg.lattice()?;
    let domains = [
        DomainSpec::PuncturedBall {
            center: [0.0, 0.0],
            radius: 1.0,
        },
        DomainSpec::ExteriorBlock { vertex: [0.0, 0.0] },
        DomainSpec::Comb {
            center: [0.0, 0.0],
            jmax: None,
        },
    ];
    let pairs: Vec<(f64, f64)> = if cfg.pairs.is_empty() { SUITE_PAIRS.to_vec() } else { cfg.pairs.clone() };
    let jobs: Vec<(&DomainSpec, (f64, f64))> = domains.iter().flat_map(|d| pairs.iter().map(move |&sp| (d, sp))).collect();
    jobs.par_iter()
        .map(|&(d, (s, p))| {
            let kernel = KernelSpec::new(s, p, lattice.dim())?
                .with_multiplier(base.multiplier())?
                .with_lambda(base.lambda())?;
            let table = build_weight_table(&kernel, &lattice)?;
            let mask = d.build(&table, opts)?;
            let x0 = mask.point_of_interest().expect("gallery point");
            let r = classify_point(&table, &mask, &x0, &cfg.thresholds, opts)?;
            let w = wiener_profile(&table, &mask, &x0, opts)?;
            Ok(SuiteRow {
                domain: mask.gallery().name().into(),
                s,
                p,
                label: r.label,
                oracle: geometric_oracle(&kernel, &mask, &x0)?,
                borderline: r.borderline,
                l_hat: r.l_hat,
                u_hat: r.u_hat,
                wiener: w.trend,
                flags: r.flags,
            })
        })
        .collect()
}

fn suite(ctx: &Ctx) -> Result<Vec<Artifact>> {
    let base = ctx.cfg.kernel_spec()?;
    let rows = suite_rows(&base, ctx.cfg, &ctx.opts)?;
    let mut csv = Csv::new(&["domain", "s", "p", "label", "oracle", "borderline", "l_hat", "u_hat", "wiener"]);
    for r in &rows {
        csv.row(&[
            r.domain.clone(),
            num(r.s),
            num(r.p),
            r.label.to_string(),
            r.oracle.to_string(),
            r.borderline.to_string(),
            num(r.l_hat),
            num(r.u_hat),
            r.wiener.as_str().into(),
        ]);
    }
    let flags = vec!["wiener trends and window labels are finite-scale heuristics".to_string()];
    Ok(vec![
        art("suite.csv", csv.as_str()),
        art("suite.json", ctx.envelope(ctx.cfg.lattice()?.h(), &flags, &rows)?),
    ])
}
