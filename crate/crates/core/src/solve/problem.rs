//! Reduced problem over the FREE unknowns and the two minimisation engines.

use rayon::prelude::*;

use super::cg::{dot, norm_inf, pcg};
use super::{LinearBackend, SolveOptions};
use crate::conv::Convolver;
use crate::kernel::WeightTable;
use crate::power::Power;

/// Entries above which `W` restricted to FREE × active is not stored densely.
const DENSE_WEIGHT_LIMIT: usize = 30_000_000;
/// Entries above which the Newton Hessian is applied matrix-free.
const DENSE_HESSIAN_LIMIT: usize = 36_000_000;

/// `min (1/p) Σ_{i∈F} [ Σ_{j∈A\i} κ_j W_ij |x_i - u_j|^p + 2 out_i |x_i - c|^p ]` where
/// `A` = FREE nodes plus FIXED nodes whose data differ from the far field `c`, `κ_j` is
/// 1 for FREE and 2 for FIXED `j`, and `out_i` collects the weight towards all nodes
/// outside `A`, the exterior tail and half the L^p mass.
pub(crate) struct Problem<'a> {
    table: &'a WeightTable,
    pw: Power,
    free: Vec<usize>,
    active: Vec<usize>,
    /// FREE position of each active node, `usize::MAX` for FIXED ones.
    active_pos: Vec<usize>,
    kappa: Vec<f64>,
    /// Data at active nodes (FREE entries are overwritten per evaluation).
    active_data: Vec<f64>,
    /// Data on all nodes.
    data: Vec<f64>,
    c: f64,
    half_mass: f64,
    out: Vec<f64>,
    wmat: Option<Vec<f64>>,
    pub scale: f64,
    pub lo: f64,
    pub hi: f64,
    use_conv: bool,
}

pub(crate) struct Outcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub gnorm_rel: f64,
    pub converged: bool,
}

impl<'a> Problem<'a> {
    /// `free` sorted; `data` has one value per node (FREE entries ignored).
    pub fn new(table: &'a WeightTable, free: Vec<usize>, data: &[f64], c: f64, mass: f64, backend: LinearBackend) -> Self {
        let n = table.node_count();
        let mut is_free = vec![false; n];
        for &i in &free {
            is_free[i] = true;
        }
        let active: Vec<usize> = (0..n).filter(|&i| is_free[i] || data[i] != c).collect();
        let mut pos_of = vec![usize::MAX; n];
        for (k, &i) in free.iter().enumerate() {
            pos_of[i] = k;
        }
        let active_pos: Vec<usize> = active.iter().map(|&i| pos_of[i]).collect();
        let kappa = active_pos.iter().map(|&p| if p == usize::MAX { 2.0 } else { 1.0 }).collect();
        let active_data = active.iter().map(|&i| if is_free[i] { c } else { data[i] }).collect();
        let mut lo = c;
        let mut hi = c;
        for i in 0..n {
            if !is_free[i] {
                lo = lo.min(data[i]);
                hi = hi.max(data[i]);
            }
        }
        let pw = Power::new(table.kernel().p());
        let use_conv = pw.p() == 2.0
            && match backend {
                LinearBackend::Convolution => true,
                LinearBackend::Direct => false,
                LinearBackend::Auto => free.len() >= 1024,
            };
        let range = if hi > lo { hi - lo } else { 1.0 };
        let half_mass = 0.5 * mass;
        let dmax = free
            .iter()
            .map(|&i| table.row_sum(i) + table.tail(i) + half_mass)
            .fold(0.0, f64::max);
        let scale = 2.0 * dmax * range.powf(pw.p() - 1.0);
        let mut prob = Self {
            table,
            pw,
            free,
            active,
            active_pos,
            kappa,
            active_data,
            data: data.to_vec(),
            c,
            half_mass,
            out: Vec::new(),
            wmat: None,
            scale,
            lo,
            hi,
            use_conv,
        };
        if !use_conv {
            let na = prob.active.len();
            if prob.free.len() * na <= DENSE_WEIGHT_LIMIT {
                let rows: Vec<Vec<f64>> = prob
                    .free
                    .par_iter()
                    .map(|&i| prob.active.iter().map(|&j| table.weight(i, j)).collect())
                    .collect();
                prob.wmat = Some(rows.concat());
            }
            prob.out = (0..prob.free.len())
                .into_par_iter()
                .map(|k| {
                    let i = prob.free[k];
                    let mut s = 0.0;
                    prob.for_active(k, |_, w| s += w);
                    table.row_sum(i) - s + table.tail(i) + prob.half_mass
                })
                .collect();
        }
        prob
    }

    pub fn n(&self) -> usize {
        self.free.len()
    }
    pub fn free(&self) -> &[usize] {
        &self.free
    }

    #[inline]
    fn for_active(&self, k: usize, mut f: impl FnMut(usize, f64)) {
        let i = self.free[k];
        match &self.wmat {
            Some(w) => {
                let na = self.active.len();
                let row = &w[k * na..(k + 1) * na];
                for (a, &wij) in row.iter().enumerate() {
                    if self.active[a] != i {
                        f(a, wij);
                    }
                }
            }
            None => {
                for (a, &j) in self.active.iter().enumerate() {
                    if j != i {
                        f(a, self.table.weight(i, j));
                    }
                }
            }
        }
    }

    fn active_values(&self, x: &[f64]) -> Vec<f64> {
        self.active_pos
            .iter()
            .zip(&self.active_data)
            .map(|(&p, &d)| if p == usize::MAX { d } else { x[p] })
            .collect()
    }

    /// Full node vector with `x` on the FREE nodes.
    pub fn full(&self, x: &[f64]) -> Vec<f64> {
        let mut u = self.data.clone();
        for (k, &i) in self.free.iter().enumerate() {
            u[i] = x[k];
        }
        u
    }

    /// Objective (up to a constant) and gradient.
    pub fn eval(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let ua = self.active_values(x);
        let pw = self.pw;
        let rows: Vec<(f64, f64)> = (0..self.n())
            .into_par_iter()
            .map(|k| {
                let xi = x[k];
                let (mut f, mut g) = (0.0, 0.0);
                self.for_active(k, |a, w| {
                    let t = xi - ua[a];
                    let ph = pw.phi(t);
                    f += self.kappa[a] * w * t * ph;
                    g += w * ph;
                });
                let t = xi - self.c;
                let ph = pw.phi(t);
                f += 2.0 * self.out[k] * t * ph;
                g += self.out[k] * ph;
                (f, 2.0 * g)
            })
            .collect();
        let f = rows.iter().map(|r| r.0).sum::<f64>() / pw.p();
        (f, rows.into_iter().map(|r| r.1).collect())
    }

    fn eps2(&self) -> f64 {
        let e = 1e-12 * (self.hi - self.lo).max(1e-300);
        e * e
    }

    /// Hessian diagonal and, if small enough, the dense Hessian (row-major).
    fn hessian(&self, x: &[f64]) -> (Vec<f64>, Option<Vec<f64>>) {
        let ua = self.active_values(x);
        let eps2 = self.eps2();
        let pw = self.pw;
        let n = self.n();
        let dense = n * n <= DENSE_HESSIAN_LIMIT;
        let rows: Vec<(f64, Vec<f64>)> = (0..n)
            .into_par_iter()
            .map(|k| {
                let xi = x[k];
                let mut row = if dense { vec![0.0; n] } else { Vec::new() };
                let mut d = 0.0;
                self.for_active(k, |a, w| {
                    let h = w * pw.model_curvature(xi - ua[a], eps2);
                    d += h;
                    let p = self.active_pos[a];
                    if dense && p != usize::MAX {
                        row[p] = -2.0 * h;
                    }
                });
                d += self.out[k] * pw.model_curvature(xi - self.c, eps2);
                if dense {
                    row[k] = 2.0 * d;
                }
                (2.0 * d, row)
            })
            .collect();
        let diag = rows.iter().map(|r| r.0).collect();
        let mat = if dense { Some(rows.into_iter().flat_map(|r| r.1).collect()) } else { None };
        (diag, mat)
    }

    fn hess_apply(&self, x: &[f64], ua: &[f64], diag: &[f64], mat: &Option<Vec<f64>>, v: &[f64], out: &mut [f64]) {
        let n = self.n();
        match mat {
            Some(h) => {
                out.par_iter_mut().enumerate().for_each(|(k, o)| {
                    *o = dot(&h[k * n..(k + 1) * n], v);
                });
            }
            None => {
                let eps2 = self.eps2();
                let pw = self.pw;
                out.par_iter_mut().enumerate().for_each(|(k, o)| {
                    let mut s = 0.0;
                    self.for_active(k, |a, w| {
                        let p = self.active_pos[a];
                        if p != usize::MAX {
                            s += w * pw.model_curvature(x[k] - ua[a], eps2) * v[p];
                        }
                    });
                    *o = diag[k] * v[k] - 2.0 * s;
                });
            }
        }
    }

    /// Damped inexact Newton with Armijo backtracking.
    pub fn newton(&self, mut x: Vec<f64>, opts: &SolveOptions) -> Outcome {
        let n = self.n();
        let target = opts.tolerance * self.scale;
        let (mut f, mut g) = self.eval(&x);
        let g0 = dot(&g, &g).sqrt();
        let mut iterations = 0;
        loop {
            let gn = norm_inf(&g);
            if gn == 0.0 || gn <= target {
                return Outcome {
                    x,
                    iterations,
                    gnorm_rel: gn / self.scale,
                    converged: true,
                };
            }
            if iterations >= opts.max_iterations {
                return Outcome {
                    x,
                    iterations,
                    gnorm_rel: gn / self.scale,
                    converged: false,
                };
            }
            iterations += 1;
            let (diag, mat) = self.hessian(&x);
            let ua = self.active_values(&x);
            let g2 = dot(&g, &g).sqrt();
            let eta = (g2 / g0).sqrt().clamp(1e-10, 0.1);
            let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
            let mut d = vec![0.0; n];
            // Near the target, solve the Newton system well past it so the accepted
            // iterate is accurate in the solution, not just in the gradient.
            let stop = (g2 * eta).min(1e-3 * target);
            pcg(
                |v, out| self.hess_apply(&x, &ua, &diag, &mat, v, out),
                &diag,
                &rhs,
                &mut d,
                |r| dot(r, r).sqrt() <= stop,
                (4 * n).clamp(50, 2000),
            );
            let mut slope = dot(&g, &d);
            if !(slope < 0.0) {
                d = g.iter().zip(&diag).map(|(g, h)| -g / h).collect();
                slope = dot(&g, &d);
            }
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let xt: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
                let (ft, gt) = self.eval(&xt);
                let armijo = ft <= f + 1e-4 * t * slope;
                let flat = ft - f <= 1e-12 * f.abs() && norm_inf(&gt) < norm_inf(&g);
                if armijo || flat {
                    x = xt;
                    f = ft;
                    g = gt;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                let gn = norm_inf(&g);
                return Outcome {
                    x,
                    iterations,
                    gnorm_rel: gn / self.scale,
                    converged: gn <= target,
                };
            }
        }
    }

    /// p = 2: `A x = b` with `A = diag(R + T + m/2) - W_FF`, solved by PCG with
    /// FFT matrix-vector products over the bounding box of the active nodes.
    pub fn quadratic_conv(&self, mut x: Vec<f64>, opts: &SolveOptions) -> Outcome {
        let table = self.table;
        let conv = Convolver::for_nodes(table, &self.active);
        let loc: Vec<usize> = self.free.iter().map(|&i| conv.local(i).unwrap()).collect();
        let nr = conv.region_len();
        let d: Vec<f64> = self
            .free
            .iter()
            .map(|&i| table.row_sum(i) + table.tail(i) + self.half_mass)
            .collect();
        // b = Σ_{j FIXED} W_ij (g_j - c) + c (R_i - Σ_{j FREE} W_ij + T_i + m/2)
        let mut gv = vec![0.0; nr];
        let mut fv = vec![0.0; nr];
        for (a, &j) in self.active.iter().enumerate() {
            let l = conv.local(j).unwrap();
            if self.active_pos[a] == usize::MAX {
                gv[l] = self.active_data[a] - self.c;
            } else {
                fv[l] = 1.0;
            }
        }
        let wg = conv.apply(&gv);
        let wf = if self.c != 0.0 { conv.apply(&fv) } else { vec![0.0; nr] };
        let b: Vec<f64> = (0..self.n())
            .map(|k| {
                let i = self.free[k];
                wg[loc[k]] + self.c * (table.row_sum(i) - wf[loc[k]] + table.tail(i) + self.half_mass)
            })
            .collect();
        let apply = |v: &[f64], out: &mut [f64]| {
            let mut buf = vec![0.0; nr];
            for (k, &l) in loc.iter().enumerate() {
                buf[l] = v[k];
            }
            let wv = conv.apply(&buf);
            for k in 0..v.len() {
                out[k] = d[k] * v[k] - wv[loc[k]];
            }
        };
        let target = opts.tolerance * self.scale;
        let mut iterations = 0;
        let mut gn = f64::INFINITY;
        for _restart in 0..8 {
            let it = pcg(
                apply,
                &d,
                &b,
                &mut x,
                |r| 2.0 * norm_inf(r) <= 0.25 * target,
                opts.max_iterations.saturating_sub(iterations),
            );
            iterations += it;
            let mut ax = vec![0.0; self.n()];
            apply(&x, &mut ax);
            gn = 2.0 * ax.iter().zip(&b).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            if gn <= target || iterations >= opts.max_iterations {
                break;
            }
        }
        Outcome {
            x,
            iterations,
            gnorm_rel: gn / self.scale,
            converged: gn <= target,
        }
    }

    pub fn run(&self, x0: Vec<f64>, opts: &SolveOptions) -> Outcome {
        if self.use_conv {
            self.quadratic_conv(x0, opts)
        } else {
            self.newton(x0, opts)
        }
    }

    /// Dense `A`, `b` of the p = 2 stationarity system (for the direct solver).
    pub fn linear_system(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n();
        let mut a = vec![0.0; n * n];
        let mut b = vec![0.0; n];
        for k in 0..n {
            let mut diag = self.out[k];
            let mut rhs = self.out[k] * self.c;
            self.for_active(k, |ai, w| {
                diag += w;
                match self.active_pos[ai] {
                    usize::MAX => rhs += w * self.active_data[ai],
                    p => a[k * n + p] -= w,
                }
            });
            a[k * n + k] = diag;
            b[k] = rhs;
        }
        (a, b)
    }
}
