//! Property tests for the structural invariants of weights, energy, solver,
//! capacities, Wiener profile, shells and serialisation.

use fracreg::capacity::{condenser_capacity, open_ball_nodes, wiener_profile};
use fracreg::classify::{decide, shell_stats, Label, Thresholds};
use fracreg::config::ExperimentConfig;
use fracreg::domain::{make_punctured_ball, DomainMask, Lattice};
use fracreg::energy::energy_total;
use fracreg::kernel::{build_weight_table, KernelSpec, Multiplier, WeightTable};
use fracreg::solve::{comparison_check, dirichlet_solve_field, SolveOptions};
use fracreg::Field;
use proptest::prelude::*;

fn table(s: f64, p: f64, m: usize) -> WeightTable {
    let l = Lattice::default_box(1, m).unwrap();
    build_weight_table(&KernelSpec::new(s, p, 1).unwrap(), &l).unwrap()
}

fn table_2d(s: f64, p: f64, m: usize, mult: Multiplier) -> WeightTable {
    let l = Lattice::default_box(2, m).unwrap();
    let k = KernelSpec::new(s, p, 2).unwrap().with_multiplier(mult).unwrap();
    build_weight_table(&k, &l).unwrap()
}

/// Data equal to `c` on the outer layer, arbitrary inside.
fn field_from(vals: &[f64], c: f64, l: &Lattice) -> Field {
    let v = (0..l.node_count())
        .map(|i| if l.is_edge_node(i) { c } else { vals[i % vals.len()] })
        .collect();
    Field::new(v, c).unwrap()
}

fn brute_energy(t: &WeightTable, u: &Field) -> f64 {
    let p = t.kernel().p();
    let v = u.values();
    let n = v.len();
    let mut e = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                e += t.weight(i, j) * (v[i] - v[j]).abs().powf(p);
            }
        }
        e += 2.0 * t.tail(i) * (v[i] - u.far_field()).abs().powf(p);
    }
    e
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

fn mask(l: &Lattice) -> DomainMask {
    make_punctured_ball(l, [0.0, 0.0], 1.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn weights_are_symmetric_and_sandwiched(s in 0.1f64..0.9, base in 1.0f64..2.0, amp in 0.0f64..0.9) {
        let unit = table_2d(s, 2.0, 16, Multiplier::default());
        let split = table_2d(s, 2.0, 16, Multiplier::SignSplit { base, amp });
        let n = unit.node_count();
        for i in (0..n).step_by(7) {
            for j in 0..n {
                let w = split.weight(i, j);
                prop_assert_eq!(w, split.weight(j, i));
                let w0 = unit.weight(i, j);
                prop_assert!(w >= (base - amp) * w0 * (1.0 - 1e-12) && w <= (base + amp) * w0 * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn energy_matches_brute_force(s in 0.1f64..0.9, p in 1.2f64..3.5, c in -1.0f64..1.0,
                                  vals in prop::collection::vec(-2.0f64..2.0, 16)) {
        let t = table(s, p, 32);
        let u = field_from(&vals, c, t.lattice());
        let e = energy_total(&t, &u, false).unwrap();
        prop_assert!(rel_close(e.total, brute_energy(&t, &u), 1e-10), "{} vs {}", e.total, brute_energy(&t, &u));
    }

    #[test]
    fn energy_is_convex(s in 0.1f64..0.9, p in 1.2f64..3.5, th in 0.0f64..1.0,
                        a in prop::collection::vec(-1.0f64..1.0, 16), b in prop::collection::vec(-1.0f64..1.0, 16)) {
        let t = table(s, p, 32);
        let (u, v) = (field_from(&a, 0.2, t.lattice()), field_from(&b, 0.2, t.lattice()));
        let mix: Vec<f64> = u.values().iter().zip(v.values()).map(|(x, y)| th * x + (1.0 - th) * y).collect();
        let w = Field::new(mix, 0.2).unwrap();
        let e = |f: &Field| energy_total(&t, f, false).unwrap().total;
        prop_assert!(e(&w) <= th * e(&u) + (1.0 - th) * e(&v) + 1e-12);
    }

    #[test]
    fn truncation_does_not_raise_energy(s in 0.1f64..0.9, p in 1.2f64..3.5, lo in -1.0f64..0.0, hi in 0.0f64..1.0,
                                        a in prop::collection::vec(-2.0f64..2.0, 16)) {
        let t = table(s, p, 32);
        let u = field_from(&a, 0.0, t.lattice());
        let e = |f: &Field| energy_total(&t, f, false).unwrap().total;
        prop_assert!(e(&u.clamped(lo, hi)) <= e(&u) * (1.0 + 1e-12));
    }

    #[test]
    fn energy_is_p_homogeneous(s in 0.1f64..0.9, p in 1.2f64..3.5, k in -3.0f64..3.0, c in -1.0f64..1.0,
                               a in prop::collection::vec(-1.0f64..1.0, 16)) {
        let t = table(s, p, 32);
        let u = field_from(&a, c, t.lattice());
        let scaled = Field::new(u.values().iter().map(|v| c + k * (v - c)).collect(), c).unwrap();
        let e = |f: &Field| energy_total(&t, f, false).unwrap().total;
        prop_assert!(rel_close(e(&scaled), k.abs().powf(p) * e(&u), 1e-10));
    }

    #[test]
    fn solutions_obey_the_maximum_principle(s in 0.1f64..0.9, p in prop::sample::select(vec![1.5, 2.0, 3.0]),
                                            a in prop::collection::vec(-1.0f64..1.0, 16)) {
        let t = table(s, p, 64);
        let m = mask(t.lattice());
        let g = field_from(&a, 0.0, t.lattice());
        let fixed = m.fixed_nodes();
        let lo = fixed.iter().map(|&i| g.values()[i]).fold(0.0, f64::min);
        let hi = fixed.iter().map(|&i| g.values()[i]).fold(0.0, f64::max);
        let u = dirichlet_solve_field(&t, &m, &g, &SolveOptions::default()).unwrap().require_converged().unwrap();
        for &i in &m.free_nodes() {
            let v = u.solution.values()[i];
            prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
        }
    }

    #[test]
    fn ordered_data_give_ordered_solutions(s in 0.1f64..0.9, p in prop::sample::select(vec![1.5, 2.0, 3.0]),
                                           a in prop::collection::vec(-1.0f64..1.0, 16),
                                           d in prop::collection::vec(0.0f64..1.0, 16)) {
        let t = table(s, p, 64);
        let m = mask(t.lattice());
        let g1 = field_from(&a, 0.0, t.lattice());
        let g2 = Field::new(g1.values().iter().enumerate().map(|(i, v)| {
            if t.lattice().is_edge_node(i) { *v } else { v + d[i % d.len()] }
        }).collect(), 0.0).unwrap();
        prop_assert!(comparison_check(&t, &m, &g1, &g2, &SolveOptions::default()).unwrap());
    }

    #[test]
    fn condenser_capacity_is_monotone_in_the_set(s in 0.1f64..0.9, r1 in 0.05f64..0.3, dr in 0.0f64..0.2) {
        let t = table(s, 2.0, 64);
        let l = *t.lattice();
        let omega = open_ball_nodes(&l, &[0.0, 0.0], 1.5);
        let k1 = open_ball_nodes(&l, &[0.0, 0.0], r1);
        let k2 = open_ball_nodes(&l, &[0.0, 0.0], r1 + dr);
        let opts = SolveOptions::default();
        let c1 = condenser_capacity(&t, &k1, &omega, &opts).unwrap().value;
        let c2 = condenser_capacity(&t, &k2, &omega, &opts).unwrap().value;
        prop_assert!(c1 <= c2 * (1.0 + 1e-8), "{c1} > {c2}");
    }

    #[test]
    fn capacity_is_subadditive(s in 0.1f64..0.9, a in -0.8f64..0.0, b in 0.0f64..0.8, r in 0.05f64..0.3) {
        let t = table(s, 2.0, 64);
        let l = *t.lattice();
        let omega = open_ball_nodes(&l, &[0.0, 0.0], 1.5);
        let k1 = open_ball_nodes(&l, &[a, 0.0], r);
        let k2 = open_ball_nodes(&l, &[b, 0.0], r);
        let mut k = k1.clone();
        k.extend(&k2);
        k.sort_unstable();
        k.dedup();
        let opts = SolveOptions::default();
        let cap = |set: &[usize]| condenser_capacity(&t, set, &omega, &opts).unwrap().value;
        prop_assert!(cap(&k) <= (cap(&k1) + cap(&k2)) * (1.0 + 1e-8));
    }

    #[test]
    fn labels_follow_the_threshold_rule(l in 0.0f64..1.0, w in 0.0f64..1.0) {
        let u = l + w * (1.0 - l);
        let t = Thresholds::default();
        let lab = decide(l, u, &t);
        match lab {
            Label::Regular => prop_assert!(u <= t.delta_reg),
            Label::Semiregular => prop_assert!(l >= t.delta_reg && u - l <= t.delta_gap),
            Label::StronglyIrregular => prop_assert!(l <= t.delta_reg && u >= t.delta_reg + t.delta_gap),
            Label::Indeterminate => {}
        }
    }

    #[test]
    fn shell_extremes_are_sandwiched(a in prop::collection::vec(0.0f64..1.0, 64)) {
        let l = Lattice::default_box(1, 256).unwrap();
        let m = mask(&l);
        let x0 = [l.node_point(l.nearest_node(&[0.0, 0.0]))[0], 0.0];
        let u: Vec<f64> = (0..l.node_count()).map(|i| a[i % a.len()]).collect();
        let shells = shell_stats(&m, &x0, &u);
        prop_assert!(!shells.is_empty());
        for sh in &shells {
            prop_assert!(sh.nodes > 0);
            prop_assert!(sh.min <= sh.max);
            prop_assert_eq!(u[sh.argmin], sh.min);
        }
    }

    #[test]
    fn config_round_trips(s in 0.05f64..0.95, p in 1.1f64..4.0, seed in any::<u64>(), cells in prop::sample::select(vec![64usize, 128, 256])) {
        let text = format!("task = \"classify\"\nseed = {seed}\n[kernel]\ns = {s:?}\np = {p:?}\n[lattice]\ndim = 1\ncells = {cells}\n[domain]\nkind = \"comb\"\n");
        let c = ExperimentConfig::from_toml_str(&text).unwrap();
        let back = ExperimentConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
        prop_assert_eq!(back.hash(), c.hash());
        prop_assert_eq!(back, c);
    }

    #[test]
    fn masks_round_trip_through_json(cx in -0.5f64..0.5, r in 0.2f64..1.0, cells in prop::sample::select(vec![32usize, 64])) {
        let l = Lattice::default_box(2, cells).unwrap();
        let m = make_punctured_ball(&l, [cx, 0.0], r).unwrap();
        let back = DomainMask::from_json(&m.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, m);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    #[test]
    fn wiener_partial_sums_are_nondecreasing(s in 0.1f64..0.9, p in prop::sample::select(vec![1.5, 2.0, 3.0])) {
        let t = table(s, p, 256);
        let m = mask(t.lattice());
        let x0 = m.point_of_interest().unwrap();
        let w = wiener_profile(&t, &m, &x0, &SolveOptions::default()).unwrap();
        prop_assert!(!w.rows.is_empty());
        for pair in w.rows.windows(2) {
            prop_assert!(pair[1].partial_sum >= pair[0].partial_sum);
        }
        for row in &w.rows {
            prop_assert!(row.c_k >= 0.0 && row.integrand >= 0.0);
        }
    }
}
