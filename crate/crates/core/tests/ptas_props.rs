use proptest::prelude::*;

use tspn::baseline::{best_baseline, is_feasible};
use tspn::generate::{generate, GenKind, GenParams};
use tspn::geometry::{tour_cost, Binding, Point, Tour};
use tspn::instance::{perturb_snap, scale};
use tspn::oracle::Site;
use tspn::ptas::{
    build_quadtree, drop_and_require, lift_solution, patch, piece_crossings, seed_tours, solve_ptas, LinePiece,
    PtasConfig, SeedSite,
};
use tspn::Instance;

fn instance(max_n: usize) -> impl Strategy<Value = Instance> {
    let kind = prop_oneof![Just(GenKind::Uniform), Just(GenKind::CombZigzag), Just(GenKind::PackedBox)];
    (kind, 1usize..max_n, 1.0f64..2.5, any::<u64>()).prop_map(|(k, n, lambda, seed)| {
        let p = GenParams {
            lambda,
            width: 12.0,
            height: 6.0,
            ..Default::default()
        };
        generate(k, n, &p, seed).unwrap()
    })
}

/// True when `sub` occurs in `sup` in cyclic order.
fn cyclic_subsequence(sub: &[Point], sup: &[Point]) -> bool {
    if sub.is_empty() {
        return true;
    }
    (0..sup.len()).any(|start| {
        let mut k = 0;
        for i in 0..sup.len() {
            if k < sub.len() && sup[(start + i) % sup.len()] == sub[k] {
                k += 1;
            }
        }
        k == sub.len()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn solve_is_feasible_no_worse_than_baseline_and_deterministic(inst in instance(12), seed in 0u64..1000) {
        let cfg = PtasConfig { seed, shifts: 3, ..Default::default() };
        let rep = solve_ptas(&inst, &cfg).unwrap();
        prop_assert!(rep.feasible);
        prop_assert!(is_feasible(&rep.tour, &inst));
        let (_, _, base) = best_baseline(&inst, seed);
        prop_assert!(rep.cost <= base + 1e-9 * base.max(1.0));
        prop_assert!((rep.stage_sum() - rep.cost).abs() <= 1e-6 * rep.cost.max(1.0));
        prop_assert!((tour_cost(&rep.tour) - rep.cost).abs() <= 1e-9 * rep.cost.max(1.0));
        let again = solve_ptas(&inst, &cfg).unwrap();
        prop_assert_eq!(format!("{rep}"), format!("{again}"));
    }

    #[test]
    fn lifting_keeps_the_tour_as_a_subwalk(inst in instance(16), seed in 0u64..1000) {
        let Ok(snapped) = perturb_snap(&inst, 0.5) else { return Ok(()) };
        let Ok(scaled) = scale(&snapped) else { return Ok(()) };
        let qt = build_quadtree(&scaled, 0.5, seed, None).unwrap();
        let drop = drop_and_require(&scaled, &qt).unwrap();
        let mut sites: Vec<SeedSite> = drop
            .kept
            .segments
            .iter()
            .map(|s| SeedSite { site: Site::from(s), binding: Binding::Segment(s.id) })
            .collect();
        for (i, k) in drop.required().into_iter().enumerate() {
            let p = qt.point(k);
            sites.push(SeedSite { site: Site { x: p.x, lo: p.y, hi: p.y }, binding: Binding::Portal(i) });
        }
        for t in seed_tours(&sites, 2, seed) {
            let lifted = lift_solution(&t, &drop, 1e-9 * qt.root.side).unwrap();
            prop_assert!(cyclic_subsequence(&t.positions(), &lifted.positions()));
            prop_assert!(is_feasible(&lifted, &scaled));
        }
    }

    #[test]
    fn patching_leaves_at_most_two_crossings(
        ys in prop::collection::vec(0.05f64..4.0, 4..24),
        gaps in prop::collection::vec(0.1f64..2.0, 24),
        cut in (0.0f64..0.5, 0.5f64..1.0),
        vertical in any::<bool>(),
    ) {
        let mut x = 0.0;
        let pts: Vec<Point> = ys
            .iter()
            .enumerate()
            .map(|(i, &y)| {
                x += gaps[i];
                let y = if i % 2 == 0 { y } else { -y };
                if vertical { Point::new(y, x) } else { Point::new(x, y) }
            })
            .collect();
        let t = Tour::from_points(&pts, true);
        let (a, b) = (cut.0 * (x + 1.0), cut.1 * (x + 1.0));
        let piece = if vertical {
            LinePiece::new(Point::new(0.0, a), Point::new(0.0, b))
        } else {
            LinePiece::new(Point::new(a, 0.0), Point::new(b, 0.0))
        };
        let p = patch(&t, &piece);
        prop_assert!(piece_crossings(&p, &piece).len() <= 2);
        prop_assert!(tour_cost(&p) <= tour_cost(&t) + 6.0 * piece.length() + 1e-9);
        for q in &t.points {
            prop_assert!(p.points.iter().any(|r| r.pos == q.pos));
        }
    }
}

#[test]
fn single_segment_costs_nothing() {
    let inst = Instance::new(vec![tspn::Segment::new(0, 1.0, 0.0, 1.0)], 1.0).unwrap();
    let rep = solve_ptas(&inst, &PtasConfig::default()).unwrap();
    assert_eq!(rep.cost, 0.0);
    assert!(rep.feasible);
}

#[test]
fn far_apart_is_within_one_plus_epsilon() {
    let p = GenParams {
        epsilon: 0.5,
        ..Default::default()
    };
    for seed in 0..10 {
        let inst = generate(GenKind::FarApart, 5, &p, seed).unwrap();
        let rep = solve_ptas(&inst, &PtasConfig::default()).unwrap();
        let opt = tspn::oracle::exact_oracle(&inst, 8, 1e-10).unwrap().cost;
        assert!(rep.cost <= 1.5 * opt + 1e-9, "seed {seed}: {} vs {opt}", rep.cost);
    }
}

#[test]
fn crossing_count_is_reported() {
    let inst = generate(GenKind::Uniform, 12, &GenParams::default(), 4).unwrap();
    let rep = solve_ptas(&inst, &PtasConfig::default()).unwrap();
    if !rep.fallback {
        assert!(rep.diagnostic("T").is_some());
        assert!(rep.diagnostic("depth").is_some());
    }
}
