//! Feasible heuristics used as upper bounds. No approximation ratio is
//! claimed for either.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{tour_cost, Point, Tour, TourPoint};
use crate::instance::Instance;
use crate::oracle::{touch_points_of, Site, DEFAULT_MAX_SWEEPS, DEFAULT_TOL};
use crate::structure::build_cover_lines;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaselineKind {
    CoverlineStitch,
    Nn2Opt,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BaselineConfig {
    pub kind: BaselineKind,
    pub seed: u64,
    /// Maximum number of improving 2-opt moves.
    pub two_opt_rounds: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            kind: BaselineKind::Nn2Opt,
            seed: 0,
            two_opt_rounds: 100_000,
        }
    }
}

pub fn run_baseline(inst: &Instance, cfg: &BaselineConfig) -> Tour {
    match cfg.kind {
        BaselineKind::CoverlineStitch => coverline_stitch(inst),
        BaselineKind::Nn2Opt => nn_2opt(inst, cfg),
    }
}

/// Sweeps each cover-line through the crossings of its segments, alternating
/// direction line by line, and joins consecutive lines directly.
pub fn coverline_stitch(inst: &Instance) -> Tour {
    if inst.segments.is_empty() {
        return Tour::closed(vec![]);
    }
    let lines = build_cover_lines(inst);
    let idx = inst.index_of();
    let mut rows: Vec<Vec<TourPoint>> = Vec::new();
    for k in 0..lines.count {
        let mut members: Vec<_> = lines.members(k).into_iter().map(|id| inst.segments[idx[&id]]).collect();
        if members.is_empty() {
            continue;
        }
        members.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.id.cmp(&b.id)));
        let y = lines.y(k as i64);
        let mut row: Vec<TourPoint> = members
            .iter()
            .map(|s| TourPoint::on_segment(s.x, s.clamp_y(y), s.id))
            .collect();
        if rows.len() % 2 == 1 {
            row.reverse();
        }
        rows.push(row);
    }
    if rows.len() == 1 {
        // Out along the line and straight back: keep just the two ends.
        let row = &rows[0];
        let pts = if row.len() == 1 || row[0].pos == row[row.len() - 1].pos {
            vec![row[0]]
        } else {
            vec![row[0], row[row.len() - 1]]
        };
        if pts.iter().all(|p| p.pos.y == pts[0].pos.y) {
            return Tour::closed(pts);
        }
        return Tour::closed(row.clone()).dedup();
    }
    Tour::closed(rows.into_iter().flatten().collect()).dedup()
}

/// Nearest neighbour on segment midpoints, 2-opt on the same distances,
/// then optimal touch points for the resulting order.
pub fn nn_2opt(inst: &Instance, cfg: &BaselineConfig) -> Tour {
    let n = inst.n();
    if n == 0 {
        return Tour::closed(vec![]);
    }
    let mids: Vec<Point> = inst.segments.iter().map(|s| s.mid()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let start = rng.gen_range(0..n);
    let mut order = vec![start];
    let mut used = vec![false; n];
    used[start] = true;
    for _ in 1..n {
        let last = mids[*order.last().unwrap()];
        let next = (0..n)
            .filter(|&j| !used[j])
            .min_by(|&a, &b| last.dist(mids[a]).total_cmp(&last.dist(mids[b])).then(a.cmp(&b)))
            .unwrap();
        used[next] = true;
        order.push(next);
    }
    two_opt(&mut order, &mids, cfg.two_opt_rounds);
    let sites: Vec<Site> = order.iter().map(|&i| Site::from(&inst.segments[i])).collect();
    let tp = touch_points_of(&sites, None, DEFAULT_TOL, DEFAULT_MAX_SWEEPS);
    let tour = Tour::closed(
        order
            .iter()
            .zip(&tp.points)
            .map(|(&i, p)| TourPoint::on_segment(p.x, p.y, inst.segments[i].id))
            .collect(),
    );
    tour.dedup()
}

/// Best-improvement 2-opt on a cyclic order; returns the number of moves.
pub fn two_opt(order: &mut [usize], pts: &[Point], max_moves: usize) -> usize {
    let n = order.len();
    if n < 4 {
        return 0;
    }
    let d = |a: usize, b: usize| pts[a].dist(pts[b]);
    let mut moves = 0;
    while moves < max_moves {
        let mut best = (-1e-12, 0, 0);
        for i in 0..n - 1 {
            for j in i + 2..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                let (a, b) = (order[i], order[i + 1]);
                let (c, e) = (order[j], order[(j + 1) % n]);
                let delta = d(a, c) + d(b, e) - d(a, b) - d(c, e);
                if delta < best.0 {
                    best = (delta, i, j);
                }
            }
        }
        if best.0 >= -1e-12 {
            break;
        }
        order[best.1 + 1..=best.2].reverse();
        moves += 1;
    }
    moves
}

/// Both baselines, best first, as `(name, tour, cost)`.
pub fn best_baseline(inst: &Instance, seed: u64) -> (&'static str, Tour, f64) {
    let a = coverline_stitch(inst);
    let b = nn_2opt(
        inst,
        &BaselineConfig {
            seed,
            ..Default::default()
        },
    );
    let (ca, cb) = (tour_cost(&a), tour_cost(&b));
    if cb < ca {
        ("nn2opt", b, cb)
    } else {
        ("coverline", a, ca)
    }
}

/// True when every segment of `inst` meets some leg (or point) of the tour.
pub fn is_feasible(tour: &Tour, inst: &Instance) -> bool {
    missed_segments(tour, inst).is_empty()
}

pub fn missed_segments(tour: &Tour, inst: &Instance) -> Vec<usize> {
    let tol = inst.tol().max(crate::geometry::EPS_GEOM * crate::geometry::scale_of(tour.points.iter().map(|p| p.pos)));
    let tol = tol * 10.0;
    inst.segments
        .iter()
        .filter(|s| {
            let touched_by_point = tour.points.iter().any(|p| (p.pos.x - s.x).abs() <= tol && s.contains_y(p.pos.y, tol));
            let touched_by_leg = tour
                .legs()
                .any(|(a, b)| crate::structure::leg_meets_segment(a, b, s, tol));
            !(touched_by_point || touched_by_leg)
        })
        .map(|s| s.id)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Segment;

    #[test]
    fn single_line_doubles_span() {
        let i = Instance::new(
            vec![
                Segment::new(0, 0.0, 0.0, 1.0),
                Segment::new(1, 2.0, 0.5, 1.5),
                Segment::new(2, 5.0, 0.2, 1.2),
            ],
            1.0,
        )
        .unwrap();
        let t = coverline_stitch(&i);
        assert_eq!(tour_cost(&t), 10.0);
        assert!(is_feasible(&t, &i));
    }

    #[test]
    fn one_segment_is_a_point() {
        let i = Instance::new(vec![Segment::new(4, 1.0, 0.0, 1.0)], 1.0).unwrap();
        let t = coverline_stitch(&i);
        assert_eq!(t.len(), 1);
        assert_eq!(tour_cost(&t), 0.0);
        assert_eq!(tour_cost(&nn_2opt(&i, &BaselineConfig::default())), 0.0);
    }

    #[test]
    fn two_segments_back_and_forth() {
        let i = Instance::new(vec![Segment::new(0, 0.0, 0.0, 1.0), Segment::new(1, 3.0, 2.0, 3.0)], 1.0).unwrap();
        let t = nn_2opt(&i, &BaselineConfig::default());
        let want = 2.0 * 3.0f64.hypot(1.0);
        assert!((tour_cost(&t) - want).abs() < 1e-9);
    }

    #[test]
    fn two_opt_reaches_fixed_point() {
        let pts: Vec<Point> = (0..12).map(|i| Point::new((i * 7 % 12) as f64, (i * 5 % 11) as f64)).collect();
        let mut order: Vec<usize> = (0..12).collect();
        two_opt(&mut order, &pts, usize::MAX);
        let mut again = order.clone();
        assert_eq!(two_opt(&mut again, &pts, usize::MAX), 0);
    }
}
