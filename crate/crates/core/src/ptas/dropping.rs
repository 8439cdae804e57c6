//! Segments meeting a horizontal dissecting line are removed from the
//! instance. Each is later served by an excursion along that line from a
//! required portal.

use std::collections::BTreeMap;

use crate::baseline::missed_segments;
use crate::error::{Result, TspnError};
use crate::geometry::{Binding, Point, Tour, TourPoint};
use crate::instance::{Instance, Segment};
use crate::structure::build_cover_lines;

use super::dissection::{Key, QuadTree};

/// A horizontal interval `[lo, lo + ρ]` on a cover-line with the segments it
/// covers, sorted by x.
#[derive(Clone, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub members: Vec<(usize, f64)>,
}

impl Interval {
    pub fn hi_member(&self) -> f64 {
        self.members.last().map_or(self.lo, |m| m.1)
    }
}

/// Greedy left-to-right cover of the crossings `(id, x)` by intervals of
/// length `rho`, each starting at the first crossing not yet covered.
pub fn build_intervals(crossings: &[(usize, f64)], rho: f64) -> Vec<Interval> {
    let mut pts = crossings.to_vec();
    pts.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let mut out: Vec<Interval> = Vec::new();
    for (id, x) in pts {
        match out.last_mut() {
            Some(b) if x <= b.lo + rho => b.members.push((id, x)),
            _ => out.push(Interval {
                lo: x,
                members: vec![(id, x)],
            }),
        }
    }
    out
}

/// `|𝔅|`: intervals over all cover-lines of the instance.
pub fn interval_count(inst: &Instance) -> usize {
    let lines = build_cover_lines(inst);
    let idx = inst.index_of();
    (0..lines.count)
        .map(|k| {
            let xs: Vec<(usize, f64)> = lines
                .members(k)
                .into_iter()
                .map(|id| (id, inst.segments[idx[&id]].x))
                .collect();
            build_intervals(&xs, lines.spacing).len()
        })
        .sum()
}

/// One required portal with the span its excursion sweeps.
#[derive(Clone, Debug, PartialEq)]
pub struct Detour {
    pub key: Key,
    pub pos: Point,
    /// Left end of the excursion and the segment found there.
    pub left: (f64, Option<usize>),
    pub right: (f64, Option<usize>),
    pub served: Vec<usize>,
}

impl Detour {
    pub fn cost(&self) -> f64 {
        2.0 * (self.right.0 - self.left.0)
    }
}

#[derive(Clone, Debug)]
pub struct DropResult {
    pub kept: Instance,
    pub dropped: Vec<Segment>,
    pub ledger: Vec<Detour>,
    /// Interval count per horizontal dissecting line index.
    pub intervals: BTreeMap<i64, usize>,
}

impl DropResult {
    pub fn required(&self) -> Vec<Key> {
        self.ledger.iter().map(|d| d.key).collect()
    }

    pub fn detour_cost(&self) -> f64 {
        self.ledger.iter().map(Detour::cost).sum()
    }
}

/// Nearest portal to `[lo, hi]` on horizontal line `k`, away from the root
/// boundary; ties go left.
fn nearest_portal(qt: &QuadTree, k: i64, lo: f64, hi: f64) -> i64 {
    let step = qt.portal_step(qt.line_level(k));
    let u = qt.unit();
    let (a, b) = ((lo - qt.root.x0) / u, (hi - qt.root.x0) / u);
    let first = step;
    let last = qt.extent() - step;
    let clamp = |i: i64| i.clamp(first, last);
    let mid = 0.5 * (a + b);
    let i_lo = (a / step as f64).ceil() as i64 * step;
    let i_hi = (b / step as f64).floor() as i64 * step;
    let dist = |i: i64| {
        let x = i as f64;
        if x < a {
            a - x
        } else if x > b {
            x - b
        } else {
            0.0
        }
    };
    let mut cands = vec![clamp(i_lo - step), clamp(i_lo), clamp(i_hi), clamp(i_hi + step)];
    if i_lo <= i_hi {
        let c = (mid / step as f64).floor() as i64 * step;
        cands.extend([clamp(c), clamp(c + step)]);
    }
    cands.sort();
    cands.dedup();
    cands
        .into_iter()
        .min_by(|&p, &q| {
            dist(p)
                .total_cmp(&dist(q))
                .then((p as f64 - mid).abs().total_cmp(&(q as f64 - mid).abs()))
                .then(p.cmp(&q))
        })
        .unwrap()
}

/// Removes the segments meeting horizontal dissecting lines (a segment
/// meeting several belongs to the top-most) and records, per required
/// portal, the left-most and right-most extent of the intervals sent to it.
pub fn drop_and_require(inst: &Instance, qt: &QuadTree) -> Result<DropResult> {
    let rho = inst.rho.ok_or(TspnError::DegenerateScale)?;
    let tol = 1e-9 * qt.root.side;
    let mut remaining: Vec<Segment> = inst.segments.clone();
    let mut dropped = Vec::new();
    let mut ledger: BTreeMap<Key, Detour> = BTreeMap::new();
    let mut intervals = BTreeMap::new();
    for k in (1..qt.cells()).rev() {
        let y = qt.hline_y(k);
        let (hit, rest): (Vec<Segment>, Vec<Segment>) = remaining
            .into_iter()
            .partition(|s| s.y_bot <= y + tol && s.y_top >= y - tol);
        remaining = rest;
        if hit.is_empty() {
            continue;
        }
        let xs: Vec<(usize, f64)> = hit.iter().map(|s| (s.id, s.x)).collect();
        let ivs = build_intervals(&xs, rho);
        intervals.insert(k, ivs.len());
        for b in &ivs {
            let ix = nearest_portal(qt, k, b.lo, b.hi_member());
            let key = (ix, k * qt.m);
            let pos = qt.point(key);
            let d = ledger.entry(key).or_insert_with(|| Detour {
                key,
                pos,
                left: (pos.x, None),
                right: (pos.x, None),
                served: Vec::new(),
            });
            let (lid, lx) = b.members[0];
            let (rid, rx) = *b.members.last().unwrap();
            if lx < d.left.0 {
                d.left = (lx, Some(lid));
            }
            if rx > d.right.0 {
                d.right = (rx, Some(rid));
            }
            d.served.extend(b.members.iter().map(|m| m.0));
        }
        dropped.extend(hit);
    }
    let mut kept = inst.clone();
    kept.segments = remaining;
    Ok(DropResult {
        kept,
        dropped,
        ledger: ledger.into_values().collect(),
        intervals,
    })
}

/// Adds the excursion `p → left → right → p` at the first visit of each
/// required portal, then checks that every dropped segment is met.
pub fn lift_solution(tour: &Tour, drop: &DropResult, tol: f64) -> Result<Tour> {
    let mut pts = tour.points.clone();
    for d in &drop.ledger {
        let at = pts
            .iter()
            .position(|p| p.pos.dist(d.pos) <= tol)
            .ok_or_else(|| TspnError::Internal(format!("tour misses required portal {}", d.pos)))?;
        let mut ins = Vec::new();
        let y = d.pos.y;
        let bind = |id: Option<usize>| id.map_or(Binding::Dummy, Binding::Segment);
        if d.left.0 < d.pos.x {
            ins.push(TourPoint::new(Point::new(d.left.0, y), bind(d.left.1)));
        }
        if d.right.0 > d.pos.x {
            ins.push(TourPoint::new(Point::new(d.right.0, y), bind(d.right.1)));
        }
        if ins.is_empty() {
            continue;
        }
        ins.push(TourPoint::dummy(d.pos));
        pts.splice(at + 1..at + 1, ins);
    }
    let out = Tour::closed(pts);
    let check = Instance::unchecked(drop.dropped.clone(), drop.kept.lambda);
    let missed = missed_segments(&out, &check);
    if !missed.is_empty() {
        return Err(TspnError::Internal(format!("lifted tour misses dropped segments {missed:?}")));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn greedy_intervals() {
        let b = build_intervals(&[(0, 0.0), (1, 2.0)], 1.0);
        assert_eq!(b.len(), 2);
        let b = build_intervals(&[(0, 0.0), (1, 1.0), (2, 1.5)], 1.0);
        assert_eq!(b.len(), 2);
        assert_eq!(b[0].members.len(), 2);
        assert_eq!(b[1].lo, 1.5);
    }
}
