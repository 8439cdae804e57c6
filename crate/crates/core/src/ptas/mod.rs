//! The approximation scheme end to end: snap and scale, dissect with a
//! random shift, drop the segments on horizontal dissecting lines in favour
//! of required portals, run the outer DP over seed-induced configurations
//! with exact leaves, lift, and map the tour back to the input.

pub mod axis;
pub mod dissection;
pub mod dropping;
pub mod outer;
pub mod patch;
pub mod seeds;

use std::fmt;

use rayon::prelude::*;

use crate::baseline::{best_baseline, is_feasible};
use crate::error::{Result, TspnError};
use crate::geometry::{tour_cost, uncross, Binding, Point, Tour};
use crate::inner_dp::InnerCaps;
use crate::instance::{perturb_snap, scale, Instance};
use crate::io::format_tour;
use crate::oracle::{optimize_touch_points, Site, VisitOrder, DEFAULT_MAX_SWEEPS, DEFAULT_TOL};
use crate::structure::leg_meets_segment;
use crate::Stage;

pub use axis::{axis_candidates, axis_feasible, mixed_oracle, solve_axis_parallel, AxisSolution};
pub use dissection::{build_quadtree, dissection_depth, group_cover_lines, Cell, CoverGroups, Key, QuadTree};
pub use dropping::{build_intervals, drop_and_require, interval_count, lift_solution, Detour, DropResult, Interval};
pub use outer::{outer_dp, OuterInput, OuterResult, OuterStats, SquareConfig};
pub use patch::{patch, piece_crossings, LinePiece};
pub use seeds::{seed_tours, SeedSite};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PtasConfig {
    pub epsilon: f64,
    pub seed: u64,
    pub shifts: usize,
    /// Crossing budget per square side; `2⌈1/ε⌉` when unset.
    pub r: Option<usize>,
    pub m: Option<i64>,
    pub caps: Option<InnerCaps>,
    pub seed_tours: usize,
}

impl Default for PtasConfig {
    fn default() -> Self {
        PtasConfig {
            epsilon: 0.5,
            seed: 0,
            shifts: 5,
            r: None,
            m: None,
            caps: None,
            seed_tours: 6,
        }
    }
}

impl PtasConfig {
    pub fn r(&self) -> usize {
        self.r.unwrap_or(2 * (1.0 / self.epsilon).ceil() as usize)
    }

    pub fn caps(&self) -> InnerCaps {
        self.caps.unwrap_or(InnerCaps {
            max_states: 300_000,
            ..InnerCaps::for_epsilon(self.epsilon)
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub cost: f64,
    /// Per-stage cost changes; they add up to `cost`.
    pub stages: Vec<(String, f64)>,
    pub feasible: bool,
    pub fallback: bool,
    pub tour: Tour,
    pub diagnostics: Vec<(String, String)>,
}

impl SolveReport {
    pub fn stage_sum(&self) -> f64 {
        self.stages.iter().map(|s| s.1).sum()
    }

    pub fn diagnostic(&self, key: &str) -> Option<&str> {
        self.diagnostics.iter().find(|d| d.0 == key).map(|d| d.1.as_str())
    }
}

impl fmt::Display for SolveReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "COST {}", self.cost)?;
        for (name, d) in &self.stages {
            writeln!(f, "STAGE {name} {d}")?;
        }
        let yn = |b: bool| if b { "yes" } else { "no" };
        writeln!(f, "FEASIBLE {}", yn(self.feasible))?;
        writeln!(f, "FALLBACK {}", yn(self.fallback))?;
        write!(f, "{}", format_tour(&self.tour))
    }
}

/// One shifted run on the scaled instance.
#[derive(Clone, Debug)]
pub struct ShiftRun {
    pub seed: u64,
    pub tree: QuadTree,
    pub dropped: usize,
    pub required: usize,
    pub detour_cost: f64,
    pub stats: OuterStats,
    pub dp_cost: f64,
    pub lifted_cost: f64,
    pub tour: Tour,
}

pub fn run_shift(scaled: &Instance, cfg: &PtasConfig, seed: u64) -> Result<ShiftRun> {
    let qt = build_quadtree(scaled, cfg.epsilon, seed, cfg.m)?;
    let dropped = drop_and_require(scaled, &qt)?;
    let required = dropped.required();
    let mut sites: Vec<SeedSite> = dropped
        .kept
        .segments
        .iter()
        .map(|s| SeedSite {
            site: Site::from(s),
            binding: Binding::Segment(s.id),
        })
        .collect();
    for (i, &k) in required.iter().enumerate() {
        let p = qt.point(k);
        sites.push(SeedSite {
            site: Site { x: p.x, lo: p.y, hi: p.y },
            binding: Binding::Portal(i),
        });
    }
    let seeds = seed_tours(&sites, cfg.seed_tours, seed);
    let out = outer_dp(&OuterInput {
        qt: &qt,
        kept: &dropped.kept,
        required: &required,
        seeds: &seeds,
        caps: cfg.caps(),
        r: cfg.r(),
    })?;
    let lifted = lift_solution(&out.tour, &dropped, 1e-9 * qt.root.side)?;
    let lifted_cost = tour_cost(&lifted);
    Ok(ShiftRun {
        seed,
        dropped: dropped.dropped.len(),
        required: required.len(),
        detour_cost: dropped.detour_cost(),
        stats: out.stats,
        dp_cost: out.cost,
        lifted_cost,
        tour: lifted,
        tree: qt,
    })
}

/// Visiting order of `inst`'s segments along `tour`: each segment at the
/// first point where the tour meets it.
pub fn visit_order(tour: &Tour, inst: &Instance) -> Result<Vec<usize>> {
    let tol = 1e-9 * crate::geometry::scale_of(tour.points.iter().map(|p| p.pos));
    let mut first: Vec<(usize, f64, usize)> = Vec::new();
    for s in &inst.segments {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..tour.points.len() {
            if tour.points[i].binding == Binding::Segment(s.id) {
                best = Some((i, 0.0));
                break;
            }
            if i < tour.leg_count() {
                let (a, b) = tour.leg(i);
                if leg_meets_segment(a, b, s, tol) {
                    let t = if (b.x - a.x).abs() > tol { ((s.x - a.x) / (b.x - a.x)).clamp(0.0, 1.0) } else { 0.0 };
                    best = Some((i, t));
                    break;
                }
            }
        }
        let (i, t) = best.ok_or_else(|| TspnError::Internal(format!("tour never meets segment {}", s.id)))?;
        first.push((i, t, s.id));
    }
    first.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
    Ok(first.into_iter().map(|f| f.2).collect())
}

/// Tour of `raw` visiting its segments in the order `tour` meets them on
/// `scaled` (same ids), with optimal touch points.
pub fn descale(raw: &Instance, scaled: &Instance, tour: &Tour) -> Result<Tour> {
    let order = visit_order(tour, scaled)?;
    let order = VisitOrder::new(order);
    let tp = optimize_touch_points(&order, raw, DEFAULT_TOL, DEFAULT_MAX_SWEEPS)?;
    let pts = order
        .sequence
        .iter()
        .zip(&tp.points)
        .map(|(&id, p)| crate::geometry::TourPoint::on_segment(p.x, p.y, id))
        .collect();
    Ok(Tour::closed(pts).dedup())
}

fn uncrossed(t: &Tour) -> Tour {
    match uncross(t) {
        Ok(u) => u,
        Err(stalled) => stalled.partial,
    }
}

/// Checks the stage, the length window and epsilon, then solves.
pub fn solve_ptas(inst: &Instance, cfg: &PtasConfig) -> Result<SolveReport> {
    inst.validate()?;
    solve_ptas_sites(inst, cfg)
}

/// As `solve_ptas`, but zero-length segments (fixed points) are allowed.
pub fn solve_ptas_sites(inst: &Instance, cfg: &PtasConfig) -> Result<SolveReport> {
    if inst.stage != Stage::Raw {
        return Err(TspnError::Stage {
            expected: Stage::Raw,
            found: inst.stage,
        });
    }
    if !(cfg.epsilon > 0.0 && cfg.epsilon <= 1.0) {
        return Err(TspnError::Argument(format!("epsilon = {} not in (0, 1]", cfg.epsilon)));
    }
    if inst.n() == 0 {
        return Err(TspnError::Empty);
    }
    let (base_name, base_tour, base_cost) = best_baseline(inst, cfg.seed);
    let mut diagnostics = vec![
        ("baseline".to_string(), format!("{base_name} {base_cost}")),
        ("r".to_string(), cfg.r().to_string()),
    ];
    let fall_back = |mut diagnostics: Vec<(String, String)>, why: String| {
        diagnostics.push(("fallback_reason".into(), why));
        SolveReport {
            cost: base_cost,
            stages: vec![("fallback".into(), base_cost)],
            feasible: is_feasible(&base_tour, inst),
            fallback: true,
            tour: base_tour.clone(),
            diagnostics,
        }
    };
    if inst.n() == 1 {
        let s = inst.segments[0];
        let tour = Tour::closed(vec![crate::geometry::TourPoint::on_segment(s.x, s.y_bot, s.id)]);
        return Ok(SolveReport {
            cost: 0.0,
            stages: vec![("outer_dp".into(), 0.0)],
            feasible: true,
            fallback: false,
            tour,
            diagnostics,
        });
    }
    let scaled = match perturb_snap(inst, cfg.epsilon).and_then(|s| scale(&s)) {
        Ok(s) => s,
        Err(e) => return Ok(fall_back(diagnostics, e.to_string())),
    };
    let rho = scaled.rho.unwrap();
    diagnostics.push(("rho".into(), rho.to_string()));

    let seeds: Vec<u64> = (0..cfg.shifts.max(1) as u64)
        .map(|k| cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k))
        .collect();
    let runs: Vec<(u64, Result<(ShiftRun, Tour, f64, f64)>)> = seeds
        .par_iter()
        .map(|&s| {
            let r = run_shift(&scaled, cfg, s).and_then(|run| {
                let unc = uncrossed(&run.tour);
                let unc_cost = tour_cost(&unc);
                let raw = uncrossed(&descale(inst, &scaled, &unc)?);
                let raw_cost = tour_cost(&raw);
                Ok((run, raw, unc_cost, raw_cost))
            });
            (s, r)
        })
        .collect();
    let mut errors = Vec::new();
    let mut best: Option<(ShiftRun, Tour, f64, f64)> = None;
    for (s, r) in runs {
        match r {
            Ok(x) => {
                if best.as_ref().map_or(true, |b| x.3 < b.3) {
                    best = Some(x);
                }
            }
            Err(e) => errors.push(format!("shift {s}: {e}")),
        }
    }
    diagnostics.push(("shifts_failed".into(), errors.len().to_string()));
    for e in &errors {
        diagnostics.push(("shift_error".into(), e.clone()));
    }
    let Some((run, raw, unc_cost, raw_cost)) = best else {
        return Ok(fall_back(diagnostics, "no shift produced a tour".into()));
    };
    let qt = &run.tree;
    diagnostics.extend([
        ("shift".into(), format!("{} {}", qt.shift.0, qt.shift.1)),
        ("depth".into(), qt.depth.to_string()),
        ("m".into(), qt.m.to_string()),
        ("j_star".into(), qt.j_star().to_string()),
        ("dropped".into(), run.dropped.to_string()),
        ("required_portals".into(), run.required.to_string()),
        ("seeds".into(), run.stats.seeds.to_string()),
        ("heavy_seeds".into(), run.stats.heavy_seeds.to_string()),
        ("leaf_problems".into(), run.stats.leaf_problems.to_string()),
        ("leaf_fallbacks".into(), run.stats.leaf_fallbacks.to_string()),
        ("T".into(), run.stats.line_crossings.to_string()),
    ]);
    let stages = vec![
        ("outer_dp".to_string(), run.dp_cost / rho),
        ("lift".to_string(), (run.lifted_cost - run.dp_cost) / rho),
        ("uncross".to_string(), (unc_cost - run.lifted_cost) / rho),
        ("descale".to_string(), raw_cost - unc_cost / rho),
    ];
    let feasible = is_feasible(&raw, inst);
    if !feasible || base_cost < raw_cost - 1e-9 * base_cost.max(1.0) {
        let mut rep = fall_back(
            diagnostics,
            if feasible { format!("baseline {base_cost} beats {raw_cost}") } else { "scheme tour infeasible".into() },
        );
        let mut st = stages;
        st.push(("fallback".into(), base_cost - raw_cost));
        rep.stages = st;
        return Ok(rep);
    }
    Ok(SolveReport {
        cost: raw_cost,
        stages,
        feasible,
        fallback: false,
        tour: raw,
        diagnostics,
    })
}

/// Points stand-in: a zero-length segment at `p` with id `id`.
pub(crate) fn point_site(id: usize, p: Point) -> crate::instance::Segment {
    crate::instance::Segment::new(id, p.x, p.y, p.y)
}
