use freight_routing::solver::{solve_lp, solve_milp, LpStatus, MilpModel, MilpStatus, Sense, SolveOptions};
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct Spec {
    costs: Vec<i32>,
    uppers: Vec<u8>,
    rows: Vec<(Vec<i32>, u8, i32)>,
}

fn spec() -> impl Strategy<Value = Spec> {
    (2usize..5).prop_flat_map(|n| {
        (
            prop::collection::vec(-9i32..10, n),
            prop::collection::vec(1u8..4, n),
            prop::collection::vec((prop::collection::vec(-5i32..6, n), 0u8..3, -6i32..15), 1..5),
        )
            .prop_map(|(costs, uppers, rows)| Spec { costs, uppers, rows })
    })
}

fn build(s: &Spec, integer: bool) -> MilpModel {
    let mut m = MilpModel::new("p");
    for (j, (&c, &u)) in s.costs.iter().zip(&s.uppers).enumerate() {
        m.add_column(format!("x{j}"), c as f64, 0.0, u as f64, integer);
    }
    for (i, (a, sense, rhs)) in s.rows.iter().enumerate() {
        let sense = [Sense::Le, Sense::Ge, Sense::Eq][*sense as usize];
        let coefs = a.iter().enumerate().map(|(j, &v)| (j, v as f64)).collect();
        m.add_row(format!("r{i}"), coefs, sense, *rhs as f64);
    }
    m
}

fn enumerate(s: &Spec) -> Option<f64> {
    let m = build(s, true);
    let n = s.costs.len();
    let mut x = vec![0.0; n];
    let mut best: Option<f64> = None;
    loop {
        if m.max_violation(&x).0 == 0.0 {
            let v = m.objective_value(&x);
            best = Some(best.map_or(v, |b: f64| b.min(v)));
        }
        let mut k = 0;
        loop {
            if k == n {
                return best;
            }
            x[k] += 1.0;
            if x[k] <= s.uppers[k] as f64 {
                break;
            }
            x[k] = 0.0;
            k += 1;
        }
    }
}

const TINY: f64 = 1e-9;

/// Lower bound implied by row multipliers and reduced costs.
fn dual_bound(m: &MilpModel, duals: &[f64]) -> f64 {
    let mut val = 0.0;
    let mut d: Vec<f64> = m.columns.iter().map(|c| c.cost).collect();
    for (r, &y) in m.rows.iter().zip(duals) {
        let (lo, hi) = r.bounds();
        for &(j, a) in &r.coefs {
            d[j] -= y * a;
        }
        val += if y > TINY { y * lo } else if y < -TINY { y * hi } else { 0.0 };
    }
    for (c, dj) in m.columns.iter().zip(d) {
        val += if dj > TINY { dj * c.lower } else if dj < -TINY { dj * c.upper } else { 0.0 };
    }
    val
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn milp_matches_enumeration(s in spec()) {
        let sol = solve_milp(&build(&s, true), &SolveOptions::default()).unwrap();
        match enumerate(&s) {
            Some(best) => {
                prop_assert_eq!(sol.status, MilpStatus::Optimal);
                prop_assert!((sol.objective - best).abs() < 1e-6, "{} vs {}", sol.objective, best);
            }
            None => prop_assert_eq!(sol.status, MilpStatus::Infeasible),
        }
    }

    #[test]
    fn lp_optimum_is_certified(s in spec()) {
        let m = build(&s, false);
        let sol = solve_lp(&m, &SolveOptions::default());
        if sol.status == LpStatus::Optimal {
            prop_assert!(m.max_violation(&sol.values).0 < 1e-6);
            let lb = dual_bound(&m, &sol.duals);
            prop_assert!((lb - sol.objective).abs() < 1e-6 * (1.0 + sol.objective.abs()), "{} vs {}", lb, sol.objective);
        } else {
            prop_assert_eq!(sol.status, LpStatus::Infeasible);
            // The integer version must then be infeasible too.
            prop_assert!(enumerate(&s).is_none());
        }
    }
}

#[test]
fn larger_random_lps_are_certified() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for case in 0..40 {
        let n = 60 + case;
        let mut m = MilpModel::new("big");
        for j in 0..n {
            let hi = if rng.random_bool(0.3) { f64::INFINITY } else { rng.random_range(1.0..20.0) };
            m.add_column(format!("x{j}"), rng.random_range(-10.0..10.0), 0.0, hi, false);
        }
        for i in 0..(n / 2 + 10) {
            let mut coefs: Vec<(usize, f64)> = Vec::new();
            for j in 0..n {
                if rng.random_bool(0.15) {
                    coefs.push((j, rng.random_range(-5.0..5.0)));
                }
            }
            let sense = [Sense::Le, Sense::Ge, Sense::Eq][rng.random_range(0..3)];
            m.add_row(format!("r{i}"), coefs, sense, rng.random_range(-10.0..30.0));
        }
        let opts = SolveOptions { refactor_interval: 7, ..SolveOptions::default() };
        let sol = solve_lp(&m, &opts);
        match sol.status {
            LpStatus::Optimal => {
                assert!(m.max_violation(&sol.values).0 < 1e-6, "case {case}");
                let lb = dual_bound(&m, &sol.duals);
                assert!((lb - sol.objective).abs() < 1e-6 * (1.0 + sol.objective.abs()), "case {case}: {lb} vs {}", sol.objective);
            }
            LpStatus::Infeasible | LpStatus::Unbounded => {}
            LpStatus::IterationLimit => panic!("case {case} hit the iteration limit"),
        }
    }
}
