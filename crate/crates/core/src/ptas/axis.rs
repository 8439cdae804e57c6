//! Mixed horizontal and vertical unit segments. Each orientation class is
//! solved on its own together with one shared point, horizontals after a
//! transposition, and the two tours are joined at that point. The shared
//! point ranges over the left ends of `⌈8/ε⌉` equal parts of one horizontal
//! segment inside the box the optimum must lie in, plus any forced point on
//! a vertical side of that box.

use rayon::prelude::*;

use crate::error::{Result, TspnError};
use crate::geometry::{point_segment_dist, tour_cost, Binding, Point, Tour, TourPoint};
use crate::instance::{Instance, Segment};
use crate::io::AxisSegment;
use crate::oracle::held_karp_groups;

use super::{point_site, solve_ptas_sites, PtasConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct AxisSolution {
    pub tour: Tour,
    pub cost: f64,
    /// The shared point of the cheapest combination.
    pub point: Point,
    pub candidates: usize,
}

fn transpose(p: Point) -> Point {
    Point::new(p.y, p.x)
}

/// Shrinks `[lo, hi]` by `d` at both ends, collapsing to the middle.
fn shrink(lo: f64, hi: f64, d: f64) -> (f64, f64) {
    if hi - lo >= 2.0 * d {
        (lo + d, hi - d)
    } else {
        let m = 0.5 * (lo + hi);
        (m, m)
    }
}

fn span(v: impl Iterator<Item = (f64, f64)>) -> (f64, f64) {
    v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (lo, hi)| (a.min(lo), b.max(hi)))
}

/// Candidate shared points.
pub fn axis_candidates(segs: &[AxisSegment], epsilon: f64) -> Vec<Point> {
    let vs: Vec<(f64, f64, f64)> = segs
        .iter()
        .filter_map(|s| match *s {
            AxisSegment::Vertical { x, lo, hi, .. } => Some((x, lo, hi)),
            _ => None,
        })
        .collect();
    let hs: Vec<(f64, f64, f64)> = segs
        .iter()
        .filter_map(|s| match *s {
            AxisSegment::Horizontal { y, lo, hi, .. } => Some((y, lo, hi)),
            _ => None,
        })
        .collect();
    if vs.is_empty() || hs.is_empty() {
        return vec![];
    }
    let vx = span(vs.iter().map(|v| (v.0, v.0)));
    let vy = span(vs.iter().map(|v| (v.1, v.2)));
    let hx = span(hs.iter().map(|h| (h.1, h.2)));
    let hy = span(hs.iter().map(|h| (h.0, h.0)));
    let vy = shrink(vy.0, vy.1, 1.0);
    let hx = shrink(hx.0, hx.1, 1.0);
    let bx = (vx.0.min(hx.0), vx.1.max(hx.1));
    let by = (vy.0.min(hy.0), vy.1.max(hy.1));

    let mut out = Vec::new();
    // The horizontal segment with the longest part inside the box.
    let inside = hs
        .iter()
        .filter(|h| h.0 >= by.0 && h.0 <= by.1)
        .map(|h| (h.0, h.1.max(bx.0), h.2.min(bx.1)))
        .filter(|h| h.2 > h.1)
        .max_by(|a, b| (a.2 - a.1).total_cmp(&(b.2 - b.1)));
    if let Some((y, lo, hi)) = inside {
        let k = (8.0 / epsilon).ceil() as usize;
        let step = (hi - lo) / k as f64;
        out.extend((0..k).map(|i| Point::new(lo + i as f64 * step, y)));
    }
    // Horizontal segments reaching a vertical side of the box.
    for h in &hs {
        for x in [bx.0, bx.1] {
            if h.1 <= x && x <= h.2 && h.0 >= by.0 && h.0 <= by.1 {
                out.push(Point::new(x, h.0));
            }
        }
    }
    out.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    out.dedup();
    out
}

fn class_instance(segs: &[Segment], extra: Option<(usize, Point)>) -> Instance {
    let mut all = segs.to_vec();
    if let Some((id, p)) = extra {
        all.push(point_site(id, p));
    }
    Instance::unchecked(all, 1.0)
}

/// Rotates a closed tour so it starts at the point bound to `id`, or failing
/// that (duplicates merged away) at the point sitting on `at`.
fn start_at(tour: &Tour, id: usize, at: Point) -> Option<Vec<TourPoint>> {
    let i = tour
        .points
        .iter()
        .position(|p| p.binding == Binding::Segment(id))
        .or_else(|| tour.points.iter().position(|p| p.pos.dist(at) <= 1e-9 * (1.0 + at.x.abs() + at.y.abs())))?;
    let n = tour.points.len();
    Some((0..n).map(|k| tour.points[(i + k) % n]).collect())
}

pub fn axis_feasible(tour: &Tour, segs: &[AxisSegment], tol: f64) -> bool {
    segs.iter().all(|s| {
        let (a, b) = s.endpoints();
        let near = |p: Point| point_segment_dist(p, a, b) <= tol;
        tour.points.iter().any(|p| near(p.pos))
            || tour
                .legs()
                .any(|(p, q)| crate::geometry::segment_segment_dist(p, q, a, b) <= tol)
    })
}

/// Splits by orientation, solves each class plus a candidate point, and
/// keeps the cheapest joined tour.
pub fn solve_axis_parallel(segs: &[AxisSegment], cfg: &PtasConfig) -> Result<AxisSolution> {
    if segs.is_empty() {
        return Err(TspnError::Empty);
    }
    for s in segs {
        let (a, b) = s.endpoints();
        if (a.dist(b) - 1.0).abs() > 1e-9 {
            return Err(TspnError::Invalid(format!("segment {} is not unit length", s.id())));
        }
    }
    let mut vert = Vec::new();
    let mut horiz = Vec::new();
    for s in segs {
        match *s {
            AxisSegment::Vertical { id, x, lo, hi } => vert.push(Segment::new(id, x, lo, hi)),
            AxisSegment::Horizontal { id, y, lo, hi } => horiz.push(Segment::new(id, y, lo, hi)),
        }
    }
    let sub = PtasConfig {
        epsilon: cfg.epsilon / 4.0,
        ..*cfg
    };
    let back = |t: &Tour| Tour::closed(t.points.iter().map(|p| TourPoint::new(transpose(p.pos), p.binding)).collect());
    if horiz.is_empty() || vert.is_empty() {
        let transposed = vert.is_empty();
        let class = if transposed { &horiz } else { &vert };
        let rep = solve_ptas_sites(&class_instance(class, None), &sub)?;
        let tour = if transposed { back(&rep.tour) } else { rep.tour };
        return Ok(AxisSolution {
            cost: tour_cost(&tour),
            point: tour.points[0].pos,
            tour,
            candidates: 0,
        });
    }

    let cands = axis_candidates(segs, cfg.epsilon);
    let fresh = segs.iter().map(|s| s.id()).max().unwrap() + 1;
    let solved: Vec<Result<(f64, Tour, Point)>> = cands
        .par_iter()
        .map(|&p| {
            let v = solve_ptas_sites(&class_instance(&vert, Some((fresh, p))), &sub)?;
            let h = solve_ptas_sites(&class_instance(&horiz, Some((fresh, transpose(p)))), &sub)?;
            let hv = back(&h.tour);
            let (Some(a), Some(b)) = (start_at(&v.tour, fresh, p), start_at(&hv, fresh, p)) else {
                return Err(TspnError::Internal("class tour lost the shared point".into()));
            };
            let mut pts: Vec<TourPoint> = a;
            pts.push(TourPoint::dummy(p));
            pts.extend(b);
            for q in &mut pts {
                if q.binding == Binding::Segment(fresh) {
                    *q = TourPoint::dummy(p);
                }
            }
            let t = Tour::closed(pts).dedup();
            Ok((tour_cost(&t), t, p))
        })
        .collect();
    let mut best: Option<(f64, Tour, Point)> = None;
    let mut last_err = None;
    for r in solved {
        match r {
            Ok(x) => {
                if best.as_ref().map_or(true, |b| x.0 < b.0) {
                    best = Some(x);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let (cost, tour, point) = match (best, last_err) {
        (Some(b), _) => b,
        (None, Some(e)) => return Err(e),
        (None, None) => return Err(TspnError::Internal("no candidate point".into())),
    };
    Ok(AxisSolution {
        tour,
        cost,
        point,
        candidates: cands.len(),
    })
}

/// Optimum over `k` evenly spaced points per segment of either orientation.
pub fn mixed_oracle(segs: &[AxisSegment], k: usize) -> Result<f64> {
    let groups: Vec<Vec<Point>> = segs
        .iter()
        .map(|s| {
            let (a, b) = s.endpoints();
            (0..k)
                .map(|i| {
                    let t = if k == 1 { 0.5 } else { i as f64 / (k - 1) as f64 };
                    Point::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y))
                })
                .collect()
        })
        .collect();
    Ok(held_karp_groups(&groups)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mixed() -> Vec<AxisSegment> {
        vec![
            AxisSegment::Vertical { id: 0, x: 0.0, lo: 0.0, hi: 1.0 },
            AxisSegment::Vertical { id: 1, x: 3.0, lo: 0.5, hi: 1.5 },
            AxisSegment::Horizontal { id: 2, y: 2.5, lo: 1.0, hi: 2.0 },
            AxisSegment::Horizontal { id: 3, y: -1.0, lo: 0.5, hi: 1.5 },
        ]
    }

    #[test]
    fn candidates_lie_on_horizontals() {
        let segs = mixed();
        let c = axis_candidates(&segs, 0.5);
        assert!(!c.is_empty());
        for p in c {
            assert!(segs.iter().any(|s| matches!(*s, AxisSegment::Horizontal { y, lo, hi, .. }
                if (p.y - y).abs() < 1e-12 && p.x >= lo - 1e-12 && p.x <= hi + 1e-12)));
        }
    }

    #[test]
    fn joined_tour_is_feasible() {
        let segs = mixed();
        let cfg = PtasConfig {
            shifts: 2,
            ..Default::default()
        };
        let sol = solve_axis_parallel(&segs, &cfg).unwrap();
        assert!(axis_feasible(&sol.tour, &segs, 1e-7));
        let opt = mixed_oracle(&segs, 21).unwrap();
        assert!(sol.cost <= 2.5 * opt + 1e-9);
    }
}
