use proptest::prelude::*;

use tspn::generate::{generate, GenKind, GenParams};
use tspn::instance::{perturb_snap, scale};
use tspn::io::{format_instance, parse_instance};
use tspn::oracle::{exact_oracle, DEFAULT_TOL};
use tspn::Stage;

fn kind() -> impl Strategy<Value = GenKind> {
    prop_oneof![
        Just(GenKind::Uniform),
        Just(GenKind::CombZigzag),
        Just(GenKind::FarApart),
        Just(GenKind::PackedBox)
    ]
}

fn params() -> impl Strategy<Value = GenParams> {
    (1.0f64..3.0, 1.0f64..20.0, 0.0f64..10.0, 0.1f64..1.0).prop_map(|(lambda, width, extra, epsilon)| GenParams {
        lambda,
        width,
        height: lambda + extra,
        epsilon,
        gap: 0.5,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn generators_respect_the_length_window(k in kind(), n in 1usize..30, p in params(), seed in any::<u64>()) {
        let inst = generate(k, n, &p, seed).unwrap();
        prop_assert_eq!(inst.n(), n);
        prop_assert!(inst.validate().is_ok());
        for s in &inst.segments {
            prop_assert!(s.len() >= 1.0 - 1e-12 && s.len() <= p.lambda + 1e-12);
        }
        prop_assert_eq!(&generate(k, n, &p, seed).unwrap(), &inst);
    }

    #[test]
    fn far_apart_keeps_its_distance(n in 2usize..12, p in params(), seed in any::<u64>()) {
        let inst = generate(GenKind::FarApart, n, &p, seed).unwrap();
        for (i, a) in inst.segments.iter().enumerate() {
            for b in &inst.segments[i + 1..] {
                prop_assert!(a.dist_seg(b) >= 1.0 / p.epsilon - 1e-9);
            }
        }
    }

    #[test]
    fn text_round_trip(n in 1usize..20, p in params(), seed in any::<u64>()) {
        let inst = generate(GenKind::Uniform, n, &p, seed).unwrap();
        let back = parse_instance(&format_instance(&inst), "mem").unwrap();
        prop_assert_eq!(back.segments, inst.segments);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn snapping_costs_at_most_one_plus_epsilon(n in 2usize..7, eps in 0.1f64..1.0, seed in any::<u64>()) {
        let p = GenParams { lambda: 2.0, ..Default::default() };
        let inst = generate(GenKind::Uniform, n, &p, seed).unwrap();
        let snapped = perturb_snap(&inst, eps).unwrap();
        prop_assert_eq!(snapped.stage, Stage::Snapped);
        let raw = exact_oracle(&inst, 8, DEFAULT_TOL).unwrap().cost;
        let snap = exact_oracle(&snapped, 8, DEFAULT_TOL).unwrap().cost;
        prop_assert!(snap <= (1.0 + eps) * raw + 1e-7, "{} vs {}", snap, raw);
    }

    #[test]
    fn scaling_multiplies_the_optimum_by_rho(n in 2usize..7, seed in any::<u64>()) {
        let p = GenParams { lambda: 1.5, ..Default::default() };
        let inst = generate(GenKind::Uniform, n, &p, seed).unwrap();
        let snapped = perturb_snap(&inst, 0.5).unwrap();
        let scaled = scale(&snapped).unwrap();
        let rho = scaled.rho.unwrap();
        let a = exact_oracle(&snapped, 8, DEFAULT_TOL).unwrap().cost;
        let b = exact_oracle(&scaled, 8, DEFAULT_TOL).unwrap().cost;
        prop_assert!((b - rho * a).abs() <= 1e-6 * (rho * a).max(1.0), "{} vs {}", b, rho * a);
    }
}

#[test]
fn stages_are_enforced() {
    let inst = generate(GenKind::Uniform, 4, &GenParams::default(), 1).unwrap();
    assert!(scale(&inst).is_err());
    let s = perturb_snap(&inst, 0.5).unwrap();
    assert!(perturb_snap(&s, 0.5).is_err());
    let sc = scale(&s).unwrap();
    for seg in &sc.segments {
        assert_eq!(seg.x % 4.0, 0.0);
        assert_eq!(seg.y_bot % 4.0, 0.0);
    }
}
