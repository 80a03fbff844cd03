mod common;

use std::collections::HashSet;

use freight_routing::model::{audit_solution, build_smifr, ModelParams};
use freight_routing::network::{CapacityRange, PathSets};
use freight_routing::oracle::{oracle_cheapest_path, oracle_route, OracleConfig};
use freight_routing::scenario::{realize_baseline, RandomStreamConfig};
use freight_routing::solver::{solve_milp, MilpStatus, SolveOptions};
use proptest::prelude::*;

fn exact() -> SolveOptions {
    SolveOptions {
        relative_mip_gap: 0.0,
        ..SolveOptions::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn milp_matches_oracle_on_tiny_instances(seed in 1000u64..1_000_000) {
        let net = common::tiny_instance(seed);
        let sc = realize_baseline(&net, &mut RandomStreamConfig::new(seed).stream("prop", 0));
        let params = ModelParams::default();
        let oracle = oracle_route(&net, &sc, &params, &OracleConfig::default()).unwrap();
        let paths = PathSets::for_demands(&net, f64::INFINITY).unwrap();
        let (model, map) = build_smifr(&net, &paths, std::slice::from_ref(&sc), &params).unwrap();
        let sol = solve_milp(&model, &exact()).unwrap();
        prop_assert_eq!(sol.status, MilpStatus::Optimal);
        prop_assert!((sol.objective - oracle.best_cost).abs() <= 1e-6, "{} vs {}", sol.objective, oracle.best_cost);
        let violations = audit_solution(&net, &paths, &sc, &params, &map.scenario_values(&sol.values, 0)).unwrap();
        prop_assert!(violations.is_empty(), "{:?}", violations.first());
    }

    #[test]
    fn uncapacitated_cost_is_sum_of_cheapest_paths(seed in 1000u64..1_000_000) {
        let net = common::tiny_instance(seed).with_capacities(CapacityRange::unbounded());
        let sc = realize_baseline(&net, &mut RandomStreamConfig::new(seed).stream("prop", 0));
        let params = ModelParams::default();
        let mut expected = 0.0;
        for d in net.demands() {
            let per = oracle_cheapest_path(&net, &sc, (d.origin(), d.destination()), &d.commodity, d.deadline)
                .unwrap()
                .map_or(params.penalty, |(_, c)| c.min(params.penalty));
            expected += per * d.shipments as f64;
        }
        let paths = PathSets::for_demands(&net, f64::INFINITY).unwrap();
        let (model, _) = build_smifr(&net, &paths, std::slice::from_ref(&sc), &params).unwrap();
        let sol = solve_milp(&model, &exact()).unwrap();
        prop_assert!((sol.objective - expected).abs() <= 1e-6 * expected.max(1.0), "{} vs {}", sol.objective, expected);
    }
}

#[test]
fn build_is_deterministic_with_unique_names() {
    for seed in 0..10 {
        let net = common::tiny_instance(seed);
        let sc = realize_baseline(&net, &mut RandomStreamConfig::new(seed).stream("b", 0));
        let paths = PathSets::for_demands(&net, f64::INFINITY).unwrap();
        let params = ModelParams::default();
        let (a, _) = build_smifr(&net, &paths, std::slice::from_ref(&sc), &params).unwrap();
        let (b, _) = build_smifr(&net, &paths, std::slice::from_ref(&sc), &params).unwrap();
        assert_eq!(a, b);
        let rows: HashSet<_> = a.rows.iter().map(|r| &r.name).collect();
        let cols: HashSet<_> = a.columns.iter().map(|c| &c.name).collect();
        assert_eq!(rows.len(), a.rows.len());
        assert_eq!(cols.len(), a.columns.len());
    }
}

#[test]
fn solutions_respect_transfer_sandwich() {
    for seed in 0..20 {
        let net = common::tiny_instance(seed);
        let sc = realize_baseline(&net, &mut RandomStreamConfig::new(seed).stream("s", 0));
        let params = ModelParams::default();
        let paths = PathSets::for_demands(&net, f64::INFINITY).unwrap();
        let (model, map) = build_smifr(&net, &paths, std::slice::from_ref(&sc), &params).unwrap();
        let sol = solve_milp(&model, &exact()).unwrap();
        for b in map.scenario_values(&sol.values, 0) {
            for (&y, &f) in b.terminal_use.iter().zip(&b.transfer) {
                assert!(f <= y + 1e-6, "transfer {f} without indicator");
                assert!(params.epsilon * y <= f + 1e-6, "indicator set with transfer {f}");
            }
        }
    }
}
