use proptest::prelude::*;

use tspn::generate::{generate, GenKind, GenParams};
use tspn::oracle::{exact_oracle, held_karp_discretized, optimize_touch_points, VisitOrder, DEFAULT_TOL};
use tspn::structure::check_optimal_structure;
use tspn::{Instance, Segment};

fn small_instance() -> impl Strategy<Value = Instance> {
    (2usize..7, 1.0f64..3.0, any::<u64>()).prop_map(|(n, lambda, seed)| {
        let p = GenParams {
            lambda,
            ..Default::default()
        };
        generate(GenKind::Uniform, n, &p, seed).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn oracle_beats_every_grid(inst in small_instance()) {
        let opt = exact_oracle(&inst, 8, DEFAULT_TOL).unwrap().cost;
        for k in [1, 2, 5, 9] {
            prop_assert!(opt <= held_karp_discretized(&inst, k).unwrap() + 1e-9);
        }
    }

    #[test]
    fn relabelling_and_mirroring_do_not_change_the_optimum(inst in small_instance(), shift in 0usize..50) {
        let opt = exact_oracle(&inst, 8, DEFAULT_TOL).unwrap().cost;
        let n = inst.n();
        let relabelled: Vec<Segment> = inst
            .segments
            .iter()
            .map(|s| Segment::new((s.id * 7 + shift) % (7 * n + 50) + 1000, s.x, s.y_bot, s.y_top))
            .collect();
        let mirrored: Vec<Segment> = inst.segments.iter().map(|s| Segment::new(s.id, -s.x, s.y_bot, s.y_top)).collect();
        for segs in [relabelled, mirrored] {
            let other = Instance::new(segs, inst.lambda).unwrap();
            let c = exact_oracle(&other, 8, DEFAULT_TOL).unwrap().cost;
            prop_assert!((c - opt).abs() <= 1e-9 * opt.max(1.0), "{} vs {}", c, opt);
        }
    }

    #[test]
    fn touch_point_sweeps_never_go_uphill(inst in small_instance()) {
        let order = VisitOrder::new(inst.segments.iter().map(|s| s.id).collect());
        let mut last = f64::INFINITY;
        for sweeps in 1..12 {
            let c = optimize_touch_points(&order, &inst, 0.0, sweeps).unwrap().cost;
            prop_assert!(c <= last + 1e-12);
            last = c;
        }
    }

    #[test]
    fn optimal_points_fall_into_the_trichotomy(inst in small_instance()) {
        let opt = exact_oracle(&inst, 8, DEFAULT_TOL).unwrap();
        let rep = check_optimal_structure(&opt.tour, &inst).unwrap();
        prop_assert!(rep.passed("trichotomy"), "{}", rep);
    }
}

#[test]
fn oracle_refuses_large_instances() {
    let inst = generate(GenKind::Uniform, 9, &GenParams::default(), 0).unwrap();
    assert!(exact_oracle(&inst, 8, DEFAULT_TOL).is_err());
}
