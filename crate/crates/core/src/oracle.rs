//! Reference solvers for small instances: touch-point optimisation for a
//! fixed visiting order, full order enumeration, and a discretised
//! Held–Karp cross-check.

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;

use crate::error::{Result, TspnError};
use crate::geometry::{tour_cost, uncross, Point, Tour, TourPoint};
use crate::instance::{Instance, Segment};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_SWEEPS: usize = 10_000;

/// A vertical interval the chain must touch; `lo == hi` for a fixed point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Site {
    pub x: f64,
    pub lo: f64,
    pub hi: f64,
}

impl From<&Segment> for Site {
    fn from(s: &Segment) -> Self {
        Site {
            x: s.x,
            lo: s.y_bot,
            hi: s.y_top,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ChainResult {
    pub ys: Vec<f64>,
    pub cost: f64,
    pub sweeps: usize,
    pub converged: bool,
}

/// Best y on the line `x` between neighbours `a` and `b`: unfold `b`
/// across the line (a no-op when the neighbours straddle it) and intersect.
fn best_y(x: f64, a: Point, b: Point, cur: f64) -> f64 {
    let da = (a.x - x).abs();
    let db = (b.x - x).abs();
    let tiny = 1e-15 * (1.0 + x.abs());
    match (da <= tiny, db <= tiny) {
        (true, true) => cur.clamp(a.y.min(b.y), a.y.max(b.y)),
        (true, false) => a.y,
        (false, true) => b.y,
        (false, false) => a.y + (b.y - a.y) * da / (da + db),
    }
}

/// Minimises the length of a polyline through `sites` (in order) by exact
/// coordinate descent. A closed chain wraps around; an open chain may be
/// pinned at `start` and `end`.
pub fn optimize_chain(
    sites: &[Site],
    init: Option<&[f64]>,
    closed: bool,
    start: Option<Point>,
    end: Option<Point>,
    tol: f64,
    max_sweeps: usize,
) -> ChainResult {
    let n = sites.len();
    let mut ys: Vec<f64> = match init {
        Some(v) => v.iter().zip(sites).map(|(&y, s)| y.clamp(s.lo, s.hi)).collect(),
        None => sites.iter().map(|s| 0.5 * (s.lo + s.hi)).collect(),
    };
    let cost_of = |ys: &[f64]| chain_cost(sites, ys, closed, start, end);
    let mut cost = cost_of(&ys);
    let scale = sites
        .iter()
        .fold(1.0f64, |m, s| m.max(s.x.abs()).max(s.lo.abs()).max(s.hi.abs()));
    let step_tol = 1e-13 * scale;
    let neighbour = |ys: &[f64], j: isize| -> Option<Point> {
        if j < 0 {
            if closed {
                let k = n - 1;
                Some(Point::new(sites[k].x, ys[k]))
            } else {
                start
            }
        } else if j as usize >= n {
            if closed {
                Some(Point::new(sites[0].x, ys[0]))
            } else {
                end
            }
        } else {
            let k = j as usize;
            Some(Point::new(sites[k].x, ys[k]))
        }
    };
    if n == 0 || (closed && n == 1) {
        return ChainResult {
            ys,
            cost,
            sweeps: 0,
            converged: true,
        };
    }
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < max_sweeps {
        sweeps += 1;
        let mut max_step: f64 = 0.0;
        let forward = sweeps % 2 == 1;
        for t in 0..n {
            let i = if forward { t } else { n - 1 - t };
            let s = sites[i];
            if s.lo == s.hi {
                continue;
            }
            let a = neighbour(&ys, i as isize - 1);
            let b = neighbour(&ys, i as isize + 1);
            let target = match (a, b) {
                (Some(a), Some(b)) => best_y(s.x, a, b, ys[i]),
                (Some(p), None) | (None, Some(p)) => p.y,
                (None, None) => ys[i],
            };
            let y = target.clamp(s.lo, s.hi);
            max_step = max_step.max((y - ys[i]).abs());
            ys[i] = y;
        }
        let c = cost_of(&ys);
        let improvement = cost - c;
        cost = c;
        if max_step <= step_tol || (improvement.abs() < tol && max_step <= 1e-9 * scale) {
            converged = true;
            break;
        }
    }
    ChainResult {
        ys,
        cost,
        sweeps,
        converged,
    }
}

fn chain_cost(sites: &[Site], ys: &[f64], closed: bool, start: Option<Point>, end: Option<Point>) -> f64 {
    let pts: Vec<Point> = sites.iter().zip(ys).map(|(s, &y)| Point::new(s.x, y)).collect();
    let mut c: f64 = pts.windows(2).map(|w| w[0].dist(w[1])).sum();
    if let (Some(f), Some(l)) = (pts.first(), pts.last()) {
        if closed {
            c += l.dist(*f);
        } else {
            c += start.map_or(0.0, |s| s.dist(*f));
            c += end.map_or(0.0, |e| l.dist(e));
        }
    } else if let (false, Some(s), Some(e)) = (closed, start, end) {
        c += s.dist(e);
    }
    c
}

/// A cyclic visiting order of segment ids, smallest id first and the
/// lexicographically smaller of the two directions.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VisitOrder {
    pub sequence: Vec<usize>,
}

impl VisitOrder {
    pub fn new(seq: Vec<usize>) -> Self {
        let mut v = VisitOrder { sequence: seq };
        v.canonicalize();
        v
    }

    pub fn canonicalize(&mut self) {
        let s = &mut self.sequence;
        if s.len() < 2 {
            return;
        }
        let m = (0..s.len()).min_by_key(|&i| s[i]).unwrap();
        s.rotate_left(m);
        if s.len() > 2 && s[s.len() - 1] < s[1] {
            s[1..].reverse();
        }
    }
}

#[derive(Clone, Debug)]
pub struct TouchPoints {
    pub points: Vec<Point>,
    pub cost: f64,
    pub sweeps: usize,
    pub converged: bool,
}

/// Optimal touch points for a fixed cyclic order of segment ids.
pub fn optimize_touch_points(
    order: &VisitOrder,
    inst: &Instance,
    tol: f64,
    max_sweeps: usize,
) -> Result<TouchPoints> {
    let idx = inst.index_of();
    let sites = order
        .sequence
        .iter()
        .map(|id| {
            idx.get(id)
                .map(|&i| Site::from(&inst.segments[i]))
                .ok_or_else(|| TspnError::Argument(format!("order names unknown segment {id}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(touch_points_of(&sites, None, tol, max_sweeps))
}

pub(crate) fn touch_points_of(sites: &[Site], init: Option<&[f64]>, tol: f64, max_sweeps: usize) -> TouchPoints {
    let r = optimize_chain(sites, init, true, None, None, tol, max_sweeps);
    TouchPoints {
        points: sites.iter().zip(&r.ys).map(|(s, &y)| Point::new(s.x, y)).collect(),
        cost: r.cost,
        sweeps: r.sweeps,
        converged: r.converged,
    }
}

#[derive(Clone, Debug)]
pub struct OracleResult {
    pub tour: Tour,
    pub cost: f64,
    pub order: VisitOrder,
    pub iterations: usize,
}

fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// All canonical cyclic orders of `ids`, in lexicographic order.
pub fn canonical_orders(ids: &[usize]) -> Vec<Vec<usize>> {
    let mut sorted = ids.to_vec();
    sorted.sort_unstable();
    if sorted.len() <= 2 {
        return vec![sorted];
    }
    let first = sorted[0];
    let mut rest = sorted[1..].to_vec();
    let mut out = Vec::new();
    loop {
        if rest[0] < rest[rest.len() - 1] {
            let mut o = Vec::with_capacity(ids.len());
            o.push(first);
            o.extend_from_slice(&rest);
            out.push(o);
        }
        if !next_permutation(&mut rest) {
            break;
        }
    }
    out
}

fn tour_from(order: &[usize], pts: &[Point]) -> Tour {
    Tour::closed(
        order
            .iter()
            .zip(pts)
            .map(|(&id, &p)| TourPoint::on_segment(p.x, p.y, id))
            .collect(),
    )
}

/// Exact optimum for `n ≤ max_n` by enumerating every canonical cyclic
/// order and optimising its touch points.
pub fn exact_oracle(inst: &Instance, max_n: usize, tol: f64) -> Result<OracleResult> {
    let n = inst.n();
    if n == 0 {
        return Err(TspnError::Empty);
    }
    if n > max_n {
        return Err(TspnError::TooLarge(format!("exact oracle limited to n <= {max_n}, got {n}")));
    }
    if n == 1 {
        let s = inst.segments[0];
        let m = s.mid();
        return Ok(OracleResult {
            tour: Tour::closed(vec![TourPoint::on_segment(m.x, m.y, s.id)]),
            cost: 0.0,
            order: VisitOrder::new(vec![s.id]),
            iterations: 0,
        });
    }
    if let Some((lo, hi)) = inst.common_y() {
        return Ok(single_line(inst, 0.5 * (lo + hi)));
    }

    let by_id: std::collections::HashMap<usize, Segment> =
        inst.segments.iter().map(|s| (s.id, *s)).collect();
    let ids: Vec<usize> = inst.segments.iter().map(|s| s.id).collect();
    let orders = canonical_orders(&ids);
    let best_bits = AtomicU64::new(f64::INFINITY.to_bits());
    let results: Vec<Option<(f64, usize, TouchPoints)>> = orders
        .par_iter()
        .enumerate()
        .map(|(k, o)| {
            let segs: Vec<Segment> = o.iter().map(|id| by_id[id]).collect();
            let lb: f64 = (0..n).map(|i| segs[i].dist_seg(&segs[(i + 1) % n])).sum();
            if lb > f64::from_bits(best_bits.load(Ordering::Relaxed)) {
                return None;
            }
            let sites: Vec<Site> = segs.iter().map(Site::from).collect();
            let tp = touch_points_of(&sites, None, tol, DEFAULT_MAX_SWEEPS);
            best_bits.fetch_min(tp.cost.to_bits(), Ordering::Relaxed);
            Some((tp.cost, k, tp))
        })
        .collect();
    let (cost, k, tp) = results
        .into_iter()
        .flatten()
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .expect("at least one order survives pruning");
    let order = VisitOrder::new(orders[k].clone());
    let tour = tour_from(&orders[k], &tp.points);
    let tour = uncross(&tour).unwrap_or_else(|e| e.partial);
    let final_cost = tour_cost(&tour);
    debug_assert!(final_cost <= cost + 1e-9 * (1.0 + cost));
    Ok(OracleResult {
        tour,
        cost: final_cost,
        order,
        iterations: tp.sweeps,
    })
}

/// Closed form when one horizontal line meets every segment: run from the
/// left-most to the right-most segment and back.
fn single_line(inst: &Instance, y: f64) -> OracleResult {
    let l = inst
        .segments
        .iter()
        .min_by(|a, b| a.x.total_cmp(&b.x).then(a.id.cmp(&b.id)))
        .unwrap();
    let r = inst
        .segments
        .iter()
        .max_by(|a, b| a.x.total_cmp(&b.x).then(b.id.cmp(&a.id)))
        .unwrap();
    let mut by_x: Vec<&Segment> = inst.segments.iter().collect();
    by_x.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.id.cmp(&b.id)));
    let tour = if l.x == r.x {
        Tour::closed(vec![TourPoint::on_segment(l.x, y, l.id)])
    } else {
        Tour::closed(vec![
            TourPoint::on_segment(l.x, y, l.id),
            TourPoint::on_segment(r.x, y, r.id),
        ])
    };
    OracleResult {
        cost: tour_cost(&tour),
        tour,
        order: VisitOrder::new(by_x.iter().map(|s| s.id).collect()),
        iterations: 0,
    }
}

/// Candidate points on a segment: the lower tip for `k = 1`, otherwise `k`
/// equally spaced points including both tips.
pub fn sample_segment(s: &Segment, k: usize) -> Vec<Point> {
    if k <= 1 || s.len() == 0.0 {
        return vec![s.bottom()];
    }
    (0..k)
        .map(|j| Point::new(s.x, s.y_bot + s.len() * j as f64 / (k - 1) as f64))
        .collect()
}

/// Generalised TSP over groups of candidate points: visit one point of
/// every group on a closed tour of minimum length. Returns the cost and
/// the chosen `(group, point)` sequence.
pub fn held_karp_groups(groups: &[Vec<Point>]) -> Result<(f64, Vec<(usize, usize)>)> {
    let n = groups.len();
    if n == 0 {
        return Err(TspnError::Empty);
    }
    if n > 16 {
        return Err(TspnError::TooLarge(format!("held-karp limited to 16 groups, got {n}")));
    }
    if groups.iter().any(|g| g.is_empty() || g.len() > 64) {
        return Err(TspnError::Argument("every group needs 1..=64 candidate points".into()));
    }
    if n == 1 {
        return Ok((0.0, vec![(0, 0)]));
    }
    // Flatten candidates for a dense distance table.
    let mut offs = vec![0usize; n + 1];
    for g in 0..n {
        offs[g + 1] = offs[g] + groups[g].len();
    }
    let all: Vec<Point> = groups.iter().flatten().copied().collect();
    let tot = all.len();
    let dist: Vec<f64> = (0..tot * tot).map(|k| all[k / tot].dist(all[k % tot])).collect();

    let m = n - 1;
    let full = (1usize << m) - 1;
    let starts: Vec<usize> = (0..groups[0].len()).collect();
    let best = starts
        .par_iter()
        .map(|&s0| {
            let s = offs[0] + s0;
            // dp over masks of groups 1..n; slot per candidate of groups 1..n.
            let width = tot - offs[1];
            let mut dp = vec![f64::INFINITY; (full + 1) * width];
            let mut par = vec![u32::MAX; (full + 1) * width];
            for g in 1..n {
                for c in offs[g]..offs[g + 1] {
                    dp[(1 << (g - 1)) * width + c - offs[1]] = dist[s * tot + c];
                }
            }
            for mask in 1..=full {
                for g in 1..n {
                    if mask & (1 << (g - 1)) == 0 {
                        continue;
                    }
                    for c in offs[g]..offs[g + 1] {
                        let cur = dp[mask * width + c - offs[1]];
                        if !cur.is_finite() {
                            continue;
                        }
                        for h in 1..n {
                            if mask & (1 << (h - 1)) != 0 {
                                continue;
                            }
                            let nm = mask | (1 << (h - 1));
                            for d in offs[h]..offs[h + 1] {
                                let v = cur + dist[c * tot + d];
                                let slot = nm * width + d - offs[1];
                                if v < dp[slot] {
                                    dp[slot] = v;
                                    par[slot] = c as u32;
                                }
                            }
                        }
                    }
                }
            }
            let mut best = (f64::INFINITY, usize::MAX);
            for c in offs[1]..tot {
                let v = dp[full * width + c - offs[1]] + dist[c * tot + s];
                if v < best.0 {
                    best = (v, c);
                }
            }
            // Walk the parents back to the start.
            let mut seq = vec![best.1];
            let mut mask = full;
            let mut c = best.1;
            loop {
                let p = par[mask * width + c - offs[1]];
                let g = offs.partition_point(|&o| o <= c) - 1;
                mask &= !(1 << (g - 1));
                if p == u32::MAX {
                    break;
                }
                c = p as usize;
                seq.push(c);
            }
            seq.push(s);
            seq.reverse();
            (best.0, s0, seq)
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .unwrap();
    let seq = best
        .2
        .into_iter()
        .map(|c| {
            let g = offs.partition_point(|&o| o <= c) - 1;
            (g, c - offs[g])
        })
        .collect();
    Ok((best.0, seq))
}

/// Discretised TSPN: `k` candidate points per segment, solved exactly.
pub fn held_karp_discretized(inst: &Instance, k: usize) -> Result<f64> {
    if inst.n() > 12 || k > 33 || k == 0 {
        return Err(TspnError::TooLarge(format!(
            "held-karp needs n <= 12 and 1 <= k <= 33 (n = {}, k = {k})",
            inst.n()
        )));
    }
    let groups: Vec<Vec<Point>> = inst.segments.iter().map(|s| sample_segment(s, k)).collect();
    Ok(held_karp_groups(&groups)?.0)
}
