//! Sobolev solutions `Hg` and capacitary potentials by convex minimisation.

mod cg;
mod problem;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{DataSpec, DomainMask};
use crate::energy::energy_total;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::kernel::WeightTable;
use problem::Problem;

/// Largest FREE set handled by the dense direct solver.
pub const DIRECT_LIMIT: usize = 6000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearBackend {
    /// Convolution-backed PCG for p = 2 on large problems, Newton otherwise.
    #[default]
    Auto,
    /// Always the Newton path with explicit weights.
    Direct,
    /// Convolution-backed PCG whenever p = 2.
    Convolution,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Init {
    /// Every FREE node starts at the mean of the FIXED data.
    #[default]
    MeanOfFixed,
    /// Uniform in the data range.
    Random { seed: u64 },
    /// Start from these node values (FREE entries used).
    Given { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    /// Relative sup-norm gradient tolerance.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub backend: LinearBackend,
    pub init: Init,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 20_000,
            backend: LinearBackend::Auto,
            init: Init::MeanOfFixed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub solution: Field,
    pub iterations: usize,
    /// `‖∇J‖_∞ / (max_i 2 D_i · range^{p-1})`.
    pub final_gradient_norm: f64,
    pub energy: f64,
    pub converged: bool,
}

impl SolveReport {
    /// Turn a non-converged report into an error.
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                iterations: self.iterations,
                gradient: self.final_gradient_norm,
            })
        }
    }
}

fn check_table(table: &WeightTable, mask: &DomainMask) -> Result<()> {
    if table.lattice() != mask.lattice() {
        return Err(Error::Contract("weight table and mask live on different lattices".into()));
    }
    Ok(())
}

pub(crate) fn solve_free(table: &WeightTable, free: Vec<usize>, g: &Field, mass: f64, opts: &SolveOptions) -> Result<SolveReport> {
    let n = table.node_count();
    if g.len() != n {
        return Err(Error::Contract(format!("data has {} values, lattice has {n} nodes", g.len())));
    }
    if free.is_empty() {
        return Err(Error::Contract("no FREE nodes to solve for".into()));
    }
    let prob = Problem::new(table, free, g.values(), g.far_field(), mass, opts.backend);
    let x0: Vec<f64> = match &opts.init {
        Init::MeanOfFixed => {
            let mut is_free = vec![false; n];
            prob.free().iter().for_each(|&i| is_free[i] = true);
            let (s, c) = (0..n)
                .filter(|&i| !is_free[i])
                .fold((0.0, 0usize), |(s, c), i| (s + g.values()[i], c + 1));
            let mean = if prob.hi == prob.lo {
                prob.lo
            } else if c > 0 {
                (s / c as f64).clamp(prob.lo, prob.hi)
            } else {
                g.far_field()
            };
            vec![mean; prob.n()]
        }
        Init::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            (0..prob.n()).map(|_| prob.lo + (prob.hi - prob.lo) * rng.random::<f64>()).collect()
        }
        Init::Given { values } => {
            if values.len() != n {
                return Err(Error::Contract("initial field has the wrong length".into()));
            }
            prob.free().iter().map(|&i| values[i]).collect()
        }
    };
    let out = prob.run(x0, opts);
    let solution = Field::new(prob.full(&out.x), g.far_field())?;
    let energy = energy_total(table, &solution, mass > 0.0)?.total;
    Ok(SolveReport {
        solution,
        iterations: out.iterations,
        final_gradient_norm: out.gnorm_rel,
        energy,
        converged: out.converged,
    })
}

/// The Sobolev solution `Hg` for data generated by `g`.
pub fn dirichlet_solve(table: &WeightTable, mask: &DomainMask, g: &DataSpec, opts: &SolveOptions) -> Result<SolveReport> {
    let gf = g.generate(mask.lattice())?;
    dirichlet_solve_field(table, mask, &gf, opts)
}

/// The Sobolev solution for explicit node data `g` (values on FIXED nodes and far field).
pub fn dirichlet_solve_field(table: &WeightTable, mask: &DomainMask, g: &Field, opts: &SolveOptions) -> Result<SolveReport> {
    check_table(table, mask)?;
    solve_free(table, mask.free_nodes(), g, 0.0, opts)
}

/// p = 2 only: assemble the stationarity system densely and factor it (Cholesky).
pub fn dirichlet_solve_direct(table: &WeightTable, mask: &DomainMask, g: &Field) -> Result<Field> {
    check_table(table, mask)?;
    if table.kernel().p() != 2.0 {
        return Err(Error::Unsupported("the direct linear solve requires p = 2".into()));
    }
    let free = mask.free_nodes();
    if free.is_empty() || free.len() > DIRECT_LIMIT {
        return Err(Error::Unsupported(format!(
            "direct solve needs between 1 and {DIRECT_LIMIT} FREE nodes, got {}",
            free.len()
        )));
    }
    let prob = Problem::new(table, free, g.values(), g.far_field(), 0.0, LinearBackend::Direct);
    let (a, b) = prob.linear_system();
    let n = prob.n();
    let chol = DMatrix::from_row_slice(n, n, &a)
        .cholesky()
        .ok_or_else(|| Error::Domain("stationarity matrix is not positive definite".into()))?;
    let x = chol.solve(&DVector::from_vec(b));
    Field::new(prob.full(x.as_slice()), g.far_field())
}

/// Minimiser of the pair + tail energy with `u = 1` on `K`, `u = 0` off `Ω_c` and at infinity.
pub fn capacitary_potential(table: &WeightTable, k: &[usize], omega: &[usize], opts: &SolveOptions) -> Result<SolveReport> {
    constrained_potential(table, k, omega, 0.0, opts)
}

pub(crate) fn constrained_potential(
    table: &WeightTable,
    k: &[usize],
    omega: &[usize],
    mass: f64,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    let n = table.node_count();
    let mut in_omega = vec![false; n];
    for &i in omega {
        if i >= n {
            return Err(Error::Contract(format!("node {i} out of range")));
        }
        in_omega[i] = true;
    }
    let mut data = vec![0.0; n];
    for &i in k {
        if i >= n || !in_omega[i] {
            return Err(Error::Contract(format!("node {i} of K lies outside the open set")));
        }
        data[i] = 1.0;
    }
    let g = Field::new(data, 0.0)?;
    if k.is_empty() {
        return Ok(SolveReport {
            solution: g,
            iterations: 0,
            final_gradient_norm: 0.0,
            energy: 0.0,
            converged: true,
        });
    }
    let free: Vec<usize> = (0..n).filter(|&i| in_omega[i] && g.values()[i] == 0.0).collect();
    if free.is_empty() {
        let energy = energy_total(table, &g, mass > 0.0)?.total;
        return Ok(SolveReport {
            solution: g,
            iterations: 0,
            final_gradient_norm: 0.0,
            energy,
            converged: true,
        });
    }
    solve_free(table, free, &g, mass, opts)
}

/// Solves for `g1 <= g2` and reports whether `Hg1 <= Hg2 + 1e-8` everywhere.
pub fn comparison_check(table: &WeightTable, mask: &DomainMask, g1: &Field, g2: &Field, opts: &SolveOptions) -> Result<bool> {
    check_table(table, mask)?;
    if g1.far_field() > g2.far_field() || mask.fixed_nodes().iter().any(|&i| g1.values()[i] > g2.values()[i]) {
        return Err(Error::Contract("comparison data are not ordered".into()));
    }
    let u1 = dirichlet_solve_field(table, mask, g1, opts)?.require_converged()?;
    let u2 = dirichlet_solve_field(table, mask, g2, opts)?.require_converged()?;
    Ok(u1
        .solution
        .values()
        .iter()
        .zip(u2.solution.values())
        .all(|(a, b)| *a <= b + 1e-8))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{make_punctured_ball, Lattice};
    use crate::energy::{energy_gradient, pairing};
    use crate::kernel::{build_weight_table, KernelSpec};

    fn setup(s: f64, p: f64, m: usize) -> (WeightTable, DomainMask) {
        let l = Lattice::default_box(1, m).unwrap();
        let t = build_weight_table(&KernelSpec::new(s, p, 1).unwrap(), &l).unwrap();
        let mask = make_punctured_ball(&l, [0.0, 0.0], 1.0).unwrap();
        (t, mask)
    }

    #[test]
    fn constants_are_solutions() {
        let (t, mask) = setup(0.4, 3.0, 32);
        let r = dirichlet_solve(&t, &mask, &DataSpec::Constant { value: 0.3 }, &SolveOptions::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 0);
        assert!(r.solution.values().iter().all(|v| *v == 0.3));
    }

    #[test]
    fn ramp_matches_dense_oracle() {
        let (t, mask) = setup(0.4, 2.0, 16);
        let g = DataSpec::Ramp {
            x0: [0.0, 0.0],
            base: 0.2,
            slope: 0.5,
            radius: 1.5,
        }
        .generate(t.lattice())
        .unwrap();
        let r = dirichlet_solve_field(&t, &mask, &g, &SolveOptions::default()).unwrap();
        // independent oracle: Gaussian elimination on the brute-force stationarity system
        let free = mask.free_nodes();
        let n = free.len();
        let mut a = vec![vec![0.0; n + 1]; n];
        for (k, &i) in free.iter().enumerate() {
            let mut d = 2.0 * t.tail(i);
            let mut rhs = 2.0 * t.tail(i) * g.far_field();
            for j in 0..t.node_count() {
                let w = t.weight(i, j);
                d += 2.0 * w;
                match free.iter().position(|&f| f == j) {
                    Some(q) => a[k][q] -= 2.0 * w,
                    None => rhs += 2.0 * w * g.values()[j],
                }
            }
            a[k][k] += d;
            a[k][n] = rhs;
        }
        for c in 0..n {
            let piv = (c..n).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs())).unwrap();
            a.swap(c, piv);
            for r2 in 0..n {
                if r2 != c {
                    let f = a[r2][c] / a[c][c];
                    for q in c..=n {
                        a[r2][q] -= f * a[c][q];
                    }
                }
            }
        }
        for (k, &i) in free.iter().enumerate() {
            let x = a[k][n] / a[k][k];
            assert!((r.solution.values()[i] - x).abs() < 1e-8);
        }
        let direct = dirichlet_solve_direct(&t, &mask, &g).unwrap();
        assert!(direct.max_abs_diff(&r.solution) < 1e-8);
    }

    #[test]
    fn convolution_and_direct_paths_agree() {
        let (t, mask) = setup(0.3, 2.0, 256);
        let g = DataSpec::DistCap { x0: [0.0, 0.0] }.generate(t.lattice()).unwrap();
        let mut o = SolveOptions {
            tolerance: 1e-11,
            ..SolveOptions::default()
        };
        o.backend = LinearBackend::Convolution;
        let a = dirichlet_solve_field(&t, &mask, &g, &o).unwrap();
        o.backend = LinearBackend::Direct;
        let b = dirichlet_solve_field(&t, &mask, &g, &o).unwrap();
        assert!(a.converged && b.converged);
        assert!(a.solution.max_abs_diff(&b.solution) < 1e-10);
        assert!((a.energy - b.energy).abs() < 1e-10 * a.energy);
    }

    #[test]
    fn nonlinear_solves_converge_and_satisfy_euler_lagrange() {
        for p in [1.5, 2.5, 3.0] {
            let (t, mask) = setup(0.4, p, 128);
            let g = DataSpec::DistCap { x0: [-t.lattice().h() / 2.0, 0.0] };
            let r = dirichlet_solve(&t, &mask, &g, &SolveOptions::default()).unwrap();
            assert!(r.converged, "p={p}: {}", r.final_gradient_norm);
            assert!(r.final_gradient_norm <= 1e-8);
            let gr = energy_gradient(&t, &mask, &r.solution).unwrap();
            let phi: Vec<f64> = (0..128)
                .map(|i| if mask.is_free(i) { (i as f64 * 0.37).sin() } else { 0.0 })
                .collect();
            let norm = phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let pr = pairing(&t, &mask, &r.solution, &Field::new(phi, 0.0).unwrap()).unwrap();
            let gmax = gr.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(pr.abs() <= gmax * norm * mask.free_count() as f64);
            let e = energy_total(&t, &r.solution, false).unwrap().total;
            assert_eq!(e, r.energy);
            let lo = 0.0;
            assert!(r.solution.values().iter().all(|v| *v >= lo - 1e-12 && *v <= 1.0 + 1e-12));
        }
    }

    #[test]
    fn random_initialisations_agree() {
        let (t, mask) = setup(0.4, 3.0, 64);
        let g = DataSpec::DistCap { x0: [0.0, 0.0] };
        let a = dirichlet_solve(&t, &mask, &g, &SolveOptions { init: Init::Random { seed: 1 }, ..Default::default() }).unwrap();
        let b = dirichlet_solve(&t, &mask, &g, &SolveOptions { init: Init::Random { seed: 2 }, ..Default::default() }).unwrap();
        assert!(a.converged && b.converged);
        assert!(a.solution.max_abs_diff(&b.solution) <= 1e-6);
    }

    #[test]
    fn comparison_shift_by_one() {
        let (t, mask) = setup(0.4, 2.5, 64);
        let g1 = DataSpec::DistCap { x0: [0.0, 0.0] }.generate(t.lattice()).unwrap();
        let g2 = Field::new(g1.values().iter().map(|v| v + 1.0).collect(), 2.0).unwrap();
        assert!(comparison_check(&t, &mask, &g1, &g2, &SolveOptions::default()).unwrap());
        assert!(comparison_check(&t, &mask, &g1, &g1, &SolveOptions::default()).unwrap());
        assert!(comparison_check(&t, &mask, &g2, &g1, &SolveOptions::default()).is_err());
        let o = SolveOptions::default();
        let (u1, u2) = (
            dirichlet_solve_field(&t, &mask, &g1, &o).unwrap(),
            dirichlet_solve_field(&t, &mask, &g2, &o).unwrap(),
        );
        for (a, b) in u1.solution.values().iter().zip(u2.solution.values()) {
            assert!((b - a - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn capacitary_potential_in_unit_interval() {
        let (t, _) = setup(0.4, 2.5, 64);
        let l = *t.lattice();
        let omega: Vec<usize> = (0..64).filter(|&i| l.node_point(i)[0].abs() < 1.0).collect();
        let k = vec![l.nearest_node(&[0.0, 0.0])];
        let r = capacitary_potential(&t, &k, &omega, &SolveOptions::default()).unwrap();
        assert!(r.converged);
        assert!(r.solution.values().iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(r.solution.values()[k[0]], 1.0);
        let empty = capacitary_potential(&t, &[], &omega, &SolveOptions::default()).unwrap();
        assert_eq!(empty.energy, 0.0);
        assert!(capacitary_potential(&t, &[0], &omega, &SolveOptions::default()).is_err());
    }
}
