//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any of them fails.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tspn::baseline::{best_baseline, coverline_stitch, is_feasible};
use tspn::generate::{generate, GenKind, GenParams};
use tspn::geometry::{shadow_max, shadow_profile, tour_cost, uncross, Point, Tour};
use tspn::inner_dp::{brute_force_square, inner_dp_solve, random_leaf_problem, InnerCaps};
use tspn::instance::{perturb_snap, scale};
use tspn::io::AxisSegment;
use tspn::oracle::{exact_oracle, held_karp_discretized, held_karp_groups, OracleResult};
use tspn::ptas::{
    axis_feasible, interval_count, mixed_oracle, patch, piece_crossings, solve_axis_parallel, solve_ptas, LinePiece,
    PtasConfig,
};
use tspn::structure::{build_cover_lines, check_optimal_structure};
use tspn::{Instance, Segment};

const ORACLE_MAX: usize = 8;
const TOL: f64 = 1e-10;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Oracle tours collected along the way for the structural checks.
type Optima = Vec<(Instance, OracleResult)>;

fn oracle(inst: &Instance) -> OracleResult {
    exact_oracle(inst, ORACLE_MAX, TOL).expect("oracle")
}

fn c1_oracle_consistency(optima: &mut Optima) -> Outcome {
    let start = Instant::now();
    let k = 33;
    let mut worst_gap = 0.0f64;
    let mut bad = Vec::new();
    for seed in 0..100u64 {
        let n = 3 + (seed as usize % 5);
        let params = GenParams {
            lambda: 2.0,
            ..Default::default()
        };
        let inst = generate(GenKind::Uniform, n, &params, seed).unwrap();
        let opt = oracle(&inst);
        let hk = held_karp_discretized(&inst, k).unwrap();
        let gap = hk - opt.cost;
        worst_gap = worst_gap.max(gap / (2.0 * n as f64 * inst.lambda / k as f64));
        if opt.cost > hk + 1e-9 || gap > 2.0 * n as f64 * inst.lambda / k as f64 {
            bad.push(seed);
        }
        optima.push((inst, opt));
    }
    let t = start.elapsed();
    outcome(
        bad.is_empty() && t < Duration::from_secs(120),
        format!("100 instances, violations {bad:?}, worst gap/bound {worst_gap:.3}, {:.1}s", t.as_secs_f64()),
    )
}

fn c2_height_three_shadow(optima: &mut Optima) -> Outcome {
    let mut bad = Vec::new();
    let mut worst = 0;
    for seed in 0..200u64 {
        let n = 3 + (seed as usize % 5);
        let params = GenParams {
            width: 8.0,
            height: 3.0,
            lambda: 1.5,
            ..Default::default()
        };
        let inst = generate(GenKind::PackedBox, n, &params, 1000 + seed).unwrap();
        assert!(inst.bounding_box().unwrap().height() <= 3.0 + 1e-12);
        let opt = oracle(&inst);
        let s = shadow_max(std::slice::from_ref(&opt.tour), (f64::NEG_INFINITY, f64::INFINITY));
        worst = worst.max(s);
        if s > 2 {
            bad.push(seed);
        }
        optima.push((inst, opt));
    }
    outcome(bad.is_empty(), format!("200 instances, max shadow {worst}, exceptions {bad:?}"))
}

fn c3_single_line(optima: &mut Optima) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut bad = Vec::new();
    for case in 0..50 {
        let n = rng.gen_range(1..=7);
        let segs: Vec<Segment> = (0..n)
            .map(|id| {
                let len = rng.gen_range(1.0..=2.0);
                let lo = rng.gen_range(-len..=0.0);
                Segment::new(id, rng.gen_range(0.0..20.0), lo, lo + len)
            })
            .collect();
        let inst = Instance::new(segs, 2.0).unwrap();
        let xs: Vec<f64> = inst.segments.iter().map(|s| s.x).collect();
        let want = 2.0 * (xs.iter().cloned().fold(f64::MIN, f64::max) - xs.iter().cloned().fold(f64::MAX, f64::min));
        let opt = oracle(&inst);
        let stitch = tour_cost(&coverline_stitch(&inst));
        if (opt.cost - want).abs() > 1e-9 || (stitch - want).abs() > 1e-9 {
            bad.push((case, opt.cost, stitch, want));
        }
        optima.push((inst, opt));
    }
    outcome(bad.is_empty(), format!("50 instances, mismatches {bad:?}"))
}

fn c4_far_apart(optima: &mut Optima) -> Outcome {
    let eps = 0.5;
    let mut bad = Vec::new();
    let mut worst = 0.0f64;
    for seed in 0..50u64 {
        let n = 2 + (seed as usize % 6);
        let params = GenParams {
            epsilon: eps,
            // Unit segments over the points, as in the reduction.
            lambda: 1.0,
            ..Default::default()
        };
        let inst = generate(GenKind::FarApart, n, &params, 4000 + seed).unwrap();
        let opt = oracle(&inst);
        let tips: Vec<Vec<Point>> = inst.segments.iter().map(|s| vec![s.bottom()]).collect();
        let (tsp, _) = held_karp_groups(&tips).unwrap();
        let ratio = if opt.cost > 0.0 { tsp / opt.cost } else { 1.0 };
        worst = worst.max(ratio);
        if tsp > (1.0 + eps) * opt.cost + 1e-9 {
            bad.push(seed);
        }
        optima.push((inst, opt));
    }
    outcome(bad.is_empty(), format!("50 instances, worst tip-tour ratio {worst:.4}, exceptions {bad:?}"))
}

fn c5_interval_bound() -> Outcome {
    let mut bad = Vec::new();
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let n = 2 + (seed as usize % 6);
        let params = GenParams {
            lambda: 2.0,
            ..Default::default()
        };
        let inst = generate(GenKind::Uniform, n, &params, 5000 + seed).unwrap();
        let scaled = scale(&perturb_snap(&inst, 0.5).unwrap()).unwrap();
        let rho = build_cover_lines(&scaled).spacing;
        let lhs = rho * interval_count(&scaled) as f64;
        let opt = oracle(&scaled).cost;
        if opt > 0.0 {
            worst = worst.max(lhs / opt);
        }
        if lhs > 6.0 * opt + 1e-9 {
            bad.push(seed);
        }
    }
    outcome(bad.is_empty(), format!("100 instances, worst ratio {worst:.3} (bound 6), exceptions {bad:?}"))
}

fn c6_inner_dp() -> Outcome {
    let mut bad = Vec::new();
    for seed in 0..50u64 {
        let p = random_leaf_problem(seed, 4, 2, 2);
        let caps = InnerCaps::for_epsilon(0.5);
        let dp = inner_dp_solve(&p, caps).map(|s| s.cost);
        let bf = brute_force_square(&p);
        match (dp, bf) {
            (Ok(a), Ok(b)) if (a - b).abs() <= 1e-6 * b.abs().max(1.0) => {}
            (a, b) => bad.push((seed, format!("{a:?} vs {b:?}"))),
        }
    }
    outcome(bad.is_empty(), format!("50 squares, mismatches {bad:?}"))
}

fn c7_ptas_ratio() -> Outcome {
    let start = Instant::now();
    let eps = 0.5;
    let total = 50;
    let mut within = 0;
    let mut worst = 0.0f64;
    let mut infeasible = Vec::new();
    let mut above_baseline = Vec::new();
    let mut fallbacks = 0;
    for seed in 0..total as u64 {
        let n = 2 + (seed as usize % 5);
        let params = GenParams {
            lambda: 2.0,
            ..Default::default()
        };
        let inst = generate(GenKind::Uniform, n, &params, 7000 + seed).unwrap();
        let cfg = PtasConfig {
            epsilon: eps,
            seed,
            shifts: 5,
            ..Default::default()
        };
        let rep = solve_ptas(&inst, &cfg).unwrap();
        if rep.fallback {
            fallbacks += 1;
        }
        let opt = oracle(&inst).cost;
        let (_, _, base) = best_baseline(&inst, seed);
        let ratio = rep.cost / opt;
        worst = worst.max(ratio);
        if rep.cost <= (1.0 + eps) * opt + 1e-9 {
            within += 1;
        }
        if !rep.feasible || !is_feasible(&rep.tour, &inst) {
            infeasible.push(seed);
        }
        if rep.cost > base + 1e-9 {
            above_baseline.push(seed);
        }
    }
    let t = start.elapsed();
    let pass = within * 100 >= 95 * total && infeasible.is_empty() && above_baseline.is_empty() && t < Duration::from_secs(600);
    outcome(
        pass,
        format!(
            "{within}/{total} within 1+eps, worst ratio {worst:.4}, infeasible {infeasible:?}, above baseline {above_baseline:?}, baseline fallbacks {fallbacks}, {:.1}s",
            t.as_secs_f64()
        ),
    )
}

/// A closed zig-zag through a horizontal line, with `teeth` excursions to
/// each side.
fn zigzag(rng: &mut ChaCha8Rng, teeth: usize) -> Tour {
    let mut pts = Vec::new();
    let mut x = 0.0;
    for _ in 0..teeth {
        x += rng.gen_range(0.2..2.0);
        pts.push(Point::new(x, rng.gen_range(0.1..3.0)));
        x += rng.gen_range(0.2..2.0);
        pts.push(Point::new(x, -rng.gen_range(0.1..3.0)));
    }
    Tour::from_points(&pts, true)
}

fn c8_patching() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut bad = Vec::new();
    let mut cases = 0;
    while cases < 100 {
        let teeth = rng.gen_range(2..10);
        let t = zigzag(&mut rng, teeth);
        let xmax = t.points.iter().map(|p| p.pos.x).fold(0.0, f64::max);
        let (a, b) = (rng.gen_range(-0.5..xmax / 2.0), rng.gen_range(xmax / 2.0..xmax + 0.5));
        let piece = if rng.gen_bool(0.5) {
            LinePiece::new(Point::new(a, 0.0), Point::new(b, 0.0))
        } else {
            // Same construction turned on its side.
            let pts: Vec<Point> = t.points.iter().map(|p| Point::new(p.pos.y, p.pos.x)).collect();
            let t2 = Tour::from_points(&pts, true);
            let piece = LinePiece::new(Point::new(0.0, a), Point::new(0.0, b));
            if piece_crossings(&t2, &piece).len() <= 2 {
                continue;
            }
            check_patch(&t2, &piece, cases, &mut bad);
            cases += 1;
            continue;
        };
        if piece_crossings(&t, &piece).len() <= 2 {
            continue;
        }
        check_patch(&t, &piece, cases, &mut bad);
        cases += 1;
    }
    outcome(bad.is_empty(), format!("100 tours, violations {bad:?}"))
}

fn check_patch(t: &Tour, piece: &LinePiece, case: usize, bad: &mut Vec<usize>) {
    let p = patch(t, piece);
    let ok = piece_crossings(&p, piece).len() <= 2 && tour_cost(&p) <= tour_cost(t) + 6.0 * piece.length() + 1e-9;
    if !ok {
        bad.push(case);
    }
}

fn c9_structure(optima: &Optima) -> Outcome {
    let mut bad = Vec::new();
    for (i, (inst, opt)) in optima.iter().enumerate() {
        let rep = check_optimal_structure(&opt.tour, inst).unwrap();
        for name in ["alternation", "exclusivity", "x_order"] {
            if !rep.passed(name) {
                bad.push((i, name));
            }
        }
    }
    outcome(bad.is_empty(), format!("{} optima, violations {bad:?}", optima.len()))
}

fn unit_axis(rng: &mut ChaCha8Rng, id: usize, vertical: bool) -> AxisSegment {
    let a = rng.gen_range(0..=12) as f64 * 0.5;
    let b = rng.gen_range(0..=10) as f64 * 0.5;
    if vertical {
        AxisSegment::Vertical { id, x: a, lo: b, hi: b + 1.0 }
    } else {
        AxisSegment::Horizontal { id, y: a, lo: b, hi: b + 1.0 }
    }
}

fn c10_axis() -> Outcome {
    let eps = 0.5;
    let mut bad = Vec::new();
    let mut worst = 0.0f64;
    for seed in 0..30u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(10_000 + seed);
        let nv = rng.gen_range(1..=3);
        let nh = rng.gen_range(1..=3);
        let segs: Vec<AxisSegment> = (0..nv + nh).map(|i| unit_axis(&mut rng, i, i < nv)).collect();
        let cfg = PtasConfig {
            epsilon: eps,
            seed,
            shifts: 2,
            ..Default::default()
        };
        let sol = solve_axis_parallel(&segs, &cfg).unwrap();
        let opt = mixed_oracle(&segs, 9).unwrap();
        if opt > 0.0 {
            worst = worst.max(sol.cost / opt);
        }
        if !axis_feasible(&sol.tour, &segs, 1e-7) || sol.cost > (2.0 + eps) * opt + 1e-9 {
            bad.push(seed);
        }
    }
    outcome(bad.is_empty(), format!("30 instances, worst ratio {worst:.4}, exceptions {bad:?}"))
}

/// Legs whose open x-span strictly contains `x`, counted directly.
fn dense_count(tour: &Tour, x: f64) -> usize {
    tour.legs().filter(|(a, b)| a.x.min(b.x) < x && x < a.x.max(b.x)).count()
}

fn c11_determinism() -> Outcome {
    let mut notes = Vec::new();
    // Identical seeds, identical reports.
    for seed in 0..5u64 {
        let inst = generate(GenKind::Uniform, 5, &GenParams::default(), 11_000 + seed).unwrap();
        let cfg = PtasConfig {
            seed,
            ..Default::default()
        };
        let a = format!("{}", solve_ptas(&inst, &cfg).unwrap());
        let b = format!("{}", solve_ptas(&inst, &cfg).unwrap());
        if a != b {
            notes.push(format!("report differs for seed {seed}"));
        }
        let opt = oracle(&inst);
        let s1 = format!("{}", check_optimal_structure(&opt.tour, &inst).unwrap());
        let s2 = format!("{}", check_optimal_structure(&opt.tour, &inst).unwrap());
        if s1 != s2 {
            notes.push(format!("structure report differs for seed {seed}"));
        }
    }
    // Uncrossing never costs more.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut increases = 0;
    for _ in 0..1000 {
        let n = rng.gen_range(3..12);
        let pts: Vec<Point> = (0..n).map(|_| Point::new(rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0))).collect();
        let t = Tour::from_points(&pts, true);
        let u = match uncross(&t) {
            Ok(u) => u,
            Err(s) => s.partial,
        };
        if tour_cost(&u) > tour_cost(&t) + 1e-9 {
            increases += 1;
        }
    }
    if increases > 0 {
        notes.push(format!("uncross increased cost {increases} times"));
    }
    // Shadow profile against dense sampling.
    let mut mismatches = 0;
    for case in 0..20 {
        let n = rng.gen_range(3..12);
        let pts: Vec<Point> = (0..n).map(|_| Point::new(rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0))).collect();
        let t = Tour::from_points(&pts, true);
        let prof = shadow_profile(std::slice::from_ref(&t), None);
        let xs: Vec<f64> = t.points.iter().map(|p| p.pos.x).collect();
        for k in 0..10_000 {
            let x = -1.0 + 12.0 * (k as f64 + 0.5) / 10_000.0;
            if xs.contains(&x) {
                continue;
            }
            if prof.at(x) != dense_count(&t, x) {
                mismatches += 1;
                notes.push(format!("shadow mismatch case {case} x {x}"));
                break;
            }
        }
    }
    outcome(
        notes.is_empty(),
        format!("5 repeated solves, 1000 uncross runs, 20 dense shadow cases; issues {notes:?} ({mismatches} shadow)"),
    )
}

fn main() {
    let mut optima = Optima::new();
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    results.push((1, "oracle consistency", c1_oracle_consistency(&mut optima)));
    results.push((2, "height-3 optima have shadow at most 2", c2_height_three_shadow(&mut optima)));
    results.push((3, "single stabbing line closed form", c3_single_line(&mut optima)));
    results.push((4, "far-apart tip tour", c4_far_apart(&mut optima)));
    results.push((5, "interval bound", c5_interval_bound()));
    results.push((6, "inner DP against brute force", c6_inner_dp()));
    results.push((7, "end-to-end ratio", c7_ptas_ratio()));
    results.push((8, "patching", c8_patching()));
    results.push((9, "structure of optima", c9_structure(&optima)));
    results.push((10, "axis-parallel ratio", c10_axis()));
    results.push((11, "determinism and numerics", c11_determinism()));
    let mut failed = 0;
    for (k, name, o) in &results {
        let v = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {k:>2} {v} {name}: {}", o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
