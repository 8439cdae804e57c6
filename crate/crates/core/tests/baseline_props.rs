use proptest::prelude::*;

use tspn::baseline::{coverline_stitch, is_feasible, nn_2opt, BaselineConfig};
use tspn::generate::{generate, GenKind, GenParams};
use tspn::geometry::{tour_cost, Binding, Point, Tour};
use tspn::Instance;

fn instance() -> impl Strategy<Value = Instance> {
    let kind = prop_oneof![
        Just(GenKind::Uniform),
        Just(GenKind::CombZigzag),
        Just(GenKind::FarApart),
        Just(GenKind::PackedBox)
    ];
    (kind, 1usize..40, 1.0f64..3.0, any::<u64>()).prop_map(|(k, n, lambda, seed)| {
        let p = GenParams {
            lambda,
            ..Default::default()
        };
        generate(k, n, &p, seed).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn both_baselines_are_feasible(inst in instance(), seed in any::<u64>()) {
        prop_assert!(is_feasible(&coverline_stitch(&inst), &inst));
        let cfg = BaselineConfig { seed, ..Default::default() };
        prop_assert!(is_feasible(&nn_2opt(&inst, &cfg), &inst));
    }

    #[test]
    fn nn_2opt_is_reproducible(inst in instance(), seed in any::<u64>()) {
        let cfg = BaselineConfig { seed, ..Default::default() };
        prop_assert_eq!(nn_2opt(&inst, &cfg), nn_2opt(&inst, &cfg));
    }

    #[test]
    fn touch_points_beat_midpoints(inst in instance(), seed in any::<u64>()) {
        let cfg = BaselineConfig { seed, ..Default::default() };
        let t = nn_2opt(&inst, &cfg);
        // The same order through the segment midpoints.
        let idx = inst.index_of();
        let mids: Vec<Point> = t
            .points
            .iter()
            .filter_map(|p| match p.binding {
                Binding::Segment(id) => Some(inst.segments[idx[&id]].mid()),
                _ => None,
            })
            .collect();
        if mids.len() == inst.n() {
            let before = tour_cost(&Tour::from_points(&mids, true));
            prop_assert!(tour_cost(&t) <= before + 1e-9);
        }
    }
}
