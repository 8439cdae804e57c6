//! Base-case solver for a leaf square. Paths are assembled from large legs:
//! straight or mirror-unfolded polylines whose ends are tips, pair ends or
//! required portals. A vertical line sweeps the event points left to right;
//! a state records the legs crossing the line, how their loose ends are
//! already joined on the left, and which portal pairs are finished.
//!
//! The table is filled best-first, so only states cheaper than the optimum
//! are ever expanded.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use rayon::prelude::*;

use crate::error::{Result, TspnError};
use crate::geometry::{scale_of, Binding, Point, Square, TourPoint, EPS_GEOM};
use crate::instance::Segment;
use crate::oracle::{canonical_orders, optimize_chain, Site, DEFAULT_MAX_SWEEPS, DEFAULT_TOL};

/// A leaf subproblem `(S, P, Q)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LeafProblem {
    pub square: Square,
    pub segments: Vec<Segment>,
    /// Each pair must be joined by one path inside the square.
    pub pairs: Vec<(Point, Point)>,
    /// Portals the paths must visit.
    pub required: Vec<Point>,
}

impl LeafProblem {
    fn scale(&self) -> f64 {
        let pts = self
            .segments
            .iter()
            .flat_map(|s| [s.bottom(), s.top()])
            .chain(self.pairs.iter().flat_map(|&(a, b)| [a, b]))
            .chain(self.required.iter().copied())
            .chain([Point::new(self.square.x0, self.square.y0), Point::new(self.square.x1(), self.square.y1())]);
        scale_of(pts)
    }

    fn tol(&self) -> f64 {
        EPS_GEOM * self.scale()
    }

    /// Required portals that are not already pair ends, without repeats.
    fn effective_required(&self) -> Vec<Point> {
        let tol = self.tol();
        let mut out: Vec<Point> = Vec::new();
        for &q in &self.required {
            let dup = self.pairs.iter().any(|&(a, b)| a.dist(q) <= tol || b.dist(q) <= tol)
                || out.iter().any(|o| o.dist(q) <= tol);
            if !dup {
                out.push(q);
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InnerCaps {
    /// Most tour legs any sweep line may cross.
    pub shadow_cap: usize,
    /// Most reflections inside one large leg.
    pub reflect_cap: usize,
    pub max_legs: usize,
    pub max_states: usize,
}

impl InnerCaps {
    pub fn for_epsilon(epsilon: f64) -> Self {
        let h = (1.0 / epsilon).ceil() as usize;
        let h2 = (1.0 / (epsilon * epsilon)).ceil() as usize;
        InnerCaps {
            shadow_cap: 4 * h2,
            reflect_cap: 2 * h,
            max_legs: 200_000,
            max_states: 4_000_000,
        }
    }
}

impl Default for InnerCaps {
    fn default() -> Self {
        InnerCaps::for_epsilon(0.5)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    /// Index into the problem's segments.
    Segment(usize),
    /// Index into the anchor list.
    Portal(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EventPoint {
    pub kind: EventKind,
    pub x: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnchorKind {
    Tip { seg: usize, top: bool },
    PairEnd { pair: usize, second: bool },
    Required(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Anchor {
    pub pos: Point,
    pub kind: AnchorKind,
    pub event: usize,
}

impl Anchor {
    fn max_degree(&self) -> usize {
        match self.kind {
            AnchorKind::PairEnd { .. } => 1,
            _ => 2,
        }
    }

    fn degree_ok(&self, d: usize) -> bool {
        match self.kind {
            AnchorKind::Tip { .. } => d == 0 || d == 2,
            AnchorKind::PairEnd { .. } => d == 1,
            AnchorKind::Required(_) => d == 2,
        }
    }
}

/// A maximal run of legs whose interior points are straight or pure
/// reflections. `start` and `end` index the anchor list, `reflect` the
/// problem's segments.
#[derive(Clone, Debug, PartialEq)]
pub struct LargeLeg {
    pub start: usize,
    pub end: usize,
    pub reflect: Vec<usize>,
    pub realized: Vec<Point>,
    pub length: f64,
}

#[derive(Clone, Debug)]
struct LegInfo {
    leg: LargeLeg,
    first_ev: usize,
    last_ev: usize,
    covers: u64,
    /// Event-index span of each straight piece.
    pieces: Vec<(usize, usize)>,
}

impl LegInfo {
    fn crossings(&self, gap: usize) -> usize {
        self.pieces.iter().filter(|&&(lo, hi)| lo <= gap && gap < hi).count()
    }
}

/// Sorted event points: every segment plus every pair end and required
/// portal. Portals on the vertical sides are included as well since paths
/// may start there.
pub fn event_points(problem: &LeafProblem) -> Result<Vec<EventPoint>> {
    Ok(anchors_and_events(problem)?.1)
}

fn anchors_and_events(problem: &LeafProblem) -> Result<(Vec<Anchor>, Vec<EventPoint>)> {
    let mut anchors = Vec::new();
    for (i, s) in problem.segments.iter().enumerate() {
        anchors.push(Anchor {
            pos: s.bottom(),
            kind: AnchorKind::Tip { seg: i, top: false },
            event: 0,
        });
        anchors.push(Anchor {
            pos: s.top(),
            kind: AnchorKind::Tip { seg: i, top: true },
            event: 0,
        });
    }
    for (k, &(a, b)) in problem.pairs.iter().enumerate() {
        anchors.push(Anchor {
            pos: a,
            kind: AnchorKind::PairEnd { pair: k, second: false },
            event: 0,
        });
        anchors.push(Anchor {
            pos: b,
            kind: AnchorKind::PairEnd { pair: k, second: true },
            event: 0,
        });
    }
    for (k, q) in problem.effective_required().into_iter().enumerate() {
        anchors.push(Anchor {
            pos: q,
            kind: AnchorKind::Required(k),
            event: 0,
        });
    }
    // (x, portals before segments, y, index)
    let mut items: Vec<(f64, u8, f64, EventKind)> = problem
        .segments
        .iter()
        .enumerate()
        .map(|(i, s)| (s.x, 1u8, s.y_bot, EventKind::Segment(i)))
        .collect();
    for (i, a) in anchors.iter().enumerate() {
        if !matches!(a.kind, AnchorKind::Tip { .. }) {
            items.push((a.pos.x, 0, a.pos.y, EventKind::Portal(i)));
        }
    }
    items.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.total_cmp(&b.2)));
    for w in items.windows(2) {
        if w[0].1 == 1 && w[1].1 == 1 && w[0].0 == w[1].0 {
            return Err(TspnError::Invalid(format!(
                "two segments share x = {}; perturb the instance first",
                w[0].0
            )));
        }
    }
    let events: Vec<EventPoint> = items.iter().map(|&(x, _, _, kind)| EventPoint { kind, x }).collect();
    for (e, ev) in events.iter().enumerate() {
        match ev.kind {
            EventKind::Segment(i) => {
                anchors[2 * i].event = e;
                anchors[2 * i + 1].event = e;
            }
            EventKind::Portal(a) => anchors[a].event = e,
        }
    }
    Ok((anchors, events))
}

/// Unfolds `end` across the mirror lines, draws the straight line from
/// `start` and folds it back. `None` when a reflection would fall outside
/// the open segment or the path would not reach the next mirror.
pub fn realize_large_leg(start: Point, end: Point, mirrors: &[Segment]) -> Option<Vec<Point>> {
    let scale = scale_of([start, end].into_iter().chain(mirrors.iter().flat_map(|s| [s.bottom(), s.top()])));
    let tol = EPS_GEOM * scale;
    if mirrors.windows(2).any(|w| w[0].x == w[1].x) {
        return None;
    }
    let k = mirrors.len();
    let mut pts = vec![start];
    let mut cur = start;
    for i in 0..k {
        let mut img = end;
        for m in mirrors[i..].iter().rev() {
            img.x = 2.0 * m.x - img.x;
        }
        let dx = img.x - cur.x;
        if dx.abs() <= tol {
            return None;
        }
        let t = (mirrors[i].x - cur.x) / dx;
        if !(t > 1e-12 && t < 1.0 - 1e-12) {
            return None;
        }
        let y = cur.y + t * (img.y - cur.y);
        let s = &mirrors[i];
        if !(y > s.y_bot + tol && y < s.y_top - tol) {
            return None;
        }
        cur = Point::new(s.x, y);
        pts.push(cur);
    }
    pts.push(end);
    Some(pts)
}

fn path_len(pts: &[Point]) -> f64 {
    pts.windows(2).map(|w| w[0].dist(w[1])).sum()
}

/// Everything the sweep needs about one leaf.
pub struct InnerModel {
    pub problem: LeafProblem,
    pub caps: InnerCaps,
    pub anchors: Vec<Anchor>,
    pub events: Vec<EventPoint>,
    legs: Vec<LegInfo>,
    /// Per event, per chooser, the legs whose left-most vertex is there.
    choosers: Vec<Vec<(Option<usize>, Vec<u32>)>>,
    /// Shortest leg at each anchor and shortest leg covering each segment,
    /// for the admissible remaining-cost bound.
    nearest: Vec<f64>,
    cover_min: Vec<f64>,
    tol: f64,
}

/// A sweep state: legs crossing `Γ_event`, the pairing of loose ends and
/// the finished pairs.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Configuration {
    pub event: usize,
    pub legs: Vec<u32>,
    pub pairing: Vec<(u16, u16)>,
    pub done: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct Key {
    ev: u16,
    chooser: u8,
    next: u32,
    active: Vec<u32>,
    pairing: Vec<(u16, u16)>,
    done: u64,
}

#[derive(Clone, Debug)]
pub struct InnerSolution {
    pub cost: f64,
    /// One polyline per pair, first end to second end; in closed mode a
    /// single cycle without the repeated first point.
    pub paths: Vec<Vec<TourPoint>>,
    pub legs: Vec<LargeLeg>,
    pub states: usize,
}

impl InnerModel {
    pub fn build(problem: &LeafProblem, caps: InnerCaps) -> Result<Self> {
        if problem.segments.len() > 64 || problem.pairs.len() > 64 {
            return Err(TspnError::TooLarge(format!(
                "leaf with {} segments and {} pairs",
                problem.segments.len(),
                problem.pairs.len()
            )));
        }
        let (anchors, events) = anchors_and_events(problem)?;
        let tol = problem.tol();
        let mut model = InnerModel {
            problem: problem.clone(),
            caps,
            anchors,
            events,
            legs: Vec::new(),
            choosers: Vec::new(),
            nearest: Vec::new(),
            cover_min: Vec::new(),
            tol,
        };
        let all = model.enumerate()?;
        model.legs = model.prune_dominated(all);
        model.nearest = (0..model.anchors.len())
            .map(|a| {
                model
                    .legs
                    .iter()
                    .filter(|l| l.leg.start == a || l.leg.end == a)
                    .map(|l| l.leg.length)
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        model.cover_min = (0..problem.segments.len())
            .map(|s| {
                model
                    .legs
                    .iter()
                    .filter(|l| l.covers & (1 << s) != 0)
                    .map(|l| l.leg.length)
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        model.build_choosers();
        Ok(model)
    }

    pub fn large_legs(&self) -> impl Iterator<Item = &LargeLeg> {
        self.legs.iter().map(|l| &l.leg)
    }

    fn seg_event(&self, seg: usize) -> usize {
        self.anchors[2 * seg].event
    }

    fn enumerate(&self) -> Result<Vec<LegInfo>> {
        let segs = &self.problem.segments;
        let na = self.anchors.len();
        // Mirror sequences that alternate direction, grown from each start.
        let mut out = Vec::new();
        let mut attempts = 0usize;
        for a in 0..na {
            let start = self.anchors[a].pos;
            let mut stack: Vec<Vec<usize>> = vec![vec![]];
            while let Some(seq) = stack.pop() {
                for b in a + 1..na {
                    if (seq.is_empty() && self.useless_direct(a, b)) || self.joins_two_pairs(a, b) {
                        continue;
                    }
                    attempts += 1;
                    if attempts > self.caps.max_legs.saturating_mul(50) {
                        return Err(TspnError::TooLarge("large-leg enumeration budget".into()));
                    }
                    let mirrors: Vec<Segment> = seq.iter().map(|&i| segs[i]).collect();
                    if let Some(pts) = realize_large_leg(start, self.anchors[b].pos, &mirrors) {
                        out.push(self.info(a, b, seq.clone(), pts));
                        if out.len() > self.caps.max_legs {
                            return Err(TspnError::TooLarge("more large legs than max_legs".into()));
                        }
                    }
                }
                if seq.len() < self.caps.reflect_cap {
                    let (from_x, dir) = match seq.last() {
                        None => (start.x, 0.0),
                        Some(&l) => {
                            let prev_x = if seq.len() >= 2 { segs[seq[seq.len() - 2]].x } else { start.x };
                            (segs[l].x, (segs[l].x - prev_x).signum())
                        }
                    };
                    for (i, s) in segs.iter().enumerate() {
                        let d = (s.x - from_x).signum();
                        if d == 0.0 || (dir != 0.0 && d == dir) {
                            continue;
                        }
                        let mut next = seq.clone();
                        next.push(i);
                        stack.push(next);
                    }
                }
            }
        }
        Ok(out)
    }

    /// A leg from one pair's end to another pair's end can never be part of
    /// a valid collection.
    fn joins_two_pairs(&self, a: usize, b: usize) -> bool {
        matches!(
            (self.anchors[a].kind, self.anchors[b].kind),
            (AnchorKind::PairEnd { pair: p, .. }, AnchorKind::PairEnd { pair: q, .. }) if p != q
        )
    }

    /// Drops legs beaten by another leg between the same anchors that is no
    /// longer, covers at least as much and crosses no sweep line more often.
    fn prune_dominated(&self, legs: Vec<LegInfo>) -> Vec<LegInfo> {
        let n_ev = self.events.len();
        let mut by_ends: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (i, l) in legs.iter().enumerate() {
            by_ends.entry((l.leg.start, l.leg.end)).or_default().push(i);
        }
        let beats = |x: &LegInfo, y: &LegInfo| {
            x.covers & y.covers == y.covers
                && x.leg.length <= y.leg.length
                && (0..n_ev).all(|g| x.crossings(g) <= y.crossings(g))
        };
        let mut keep = vec![true; legs.len()];
        for group in by_ends.values() {
            for &i in group {
                keep[i] = !group.iter().any(|&j| {
                    j != i && beats(&legs[j], &legs[i]) && (!beats(&legs[i], &legs[j]) || j < i)
                });
            }
        }
        legs.into_iter().zip(keep).filter(|(_, k)| *k).map(|(l, _)| l).collect()
    }

    /// Straight legs between the two tips of one segment never help.
    fn useless_direct(&self, a: usize, b: usize) -> bool {
        matches!(
            (self.anchors[a].kind, self.anchors[b].kind),
            (AnchorKind::Tip { seg: s, .. }, AnchorKind::Tip { seg: t, .. }) if s == t
        )
    }

    fn info(&self, a: usize, b: usize, reflect: Vec<usize>, pts: Vec<Point>) -> LegInfo {
        let segs = &self.problem.segments;
        let mut vertex_ev = vec![self.anchors[a].event];
        vertex_ev.extend(reflect.iter().map(|&i| self.seg_event(i)));
        vertex_ev.push(self.anchors[b].event);
        let pieces: Vec<(usize, usize)> = vertex_ev
            .windows(2)
            .map(|w| (w[0].min(w[1]), w[0].max(w[1])))
            .collect();
        let tol = self.tol;
        let mut covers = 0u64;
        for (j, s) in segs.iter().enumerate() {
            let touched = [a, b]
                .iter()
                .any(|&x| matches!(self.anchors[x].kind, AnchorKind::Tip { seg, .. } if seg == j))
                || reflect.contains(&j)
                || pts.windows(2).any(|w| crate::structure::leg_meets_segment(w[0], w[1], s, tol));
            if touched {
                covers |= 1 << j;
            }
        }
        LegInfo {
            first_ev: *vertex_ev.iter().min().unwrap(),
            last_ev: *vertex_ev.iter().max().unwrap(),
            covers,
            pieces,
            leg: LargeLeg {
                start: a,
                end: b,
                reflect,
                length: path_len(&pts),
                realized: pts,
            },
        }
    }

    fn build_choosers(&mut self) {
        let mut choosers: Vec<Vec<(Option<usize>, Vec<u32>)>> = self
            .events
            .iter()
            .map(|ev| match ev.kind {
                EventKind::Segment(i) => vec![(Some(2 * i), vec![]), (Some(2 * i + 1), vec![]), (None, vec![])],
                EventKind::Portal(a) => vec![(Some(a), vec![])],
            })
            .collect();
        let mut order: Vec<u32> = (0..self.legs.len() as u32).collect();
        order.sort_by(|&x, &y| self.legs[x as usize].leg.length.total_cmp(&self.legs[y as usize].leg.length).then(x.cmp(&y)));
        for id in order {
            let l = &self.legs[id as usize];
            let slot = choosers[l.first_ev]
                .iter()
                .position(|(anchor, _)| match anchor {
                    Some(a) => *a == l.leg.start || *a == l.leg.end,
                    None => true,
                })
                .unwrap();
            choosers[l.first_ev][slot].1.push(id);
        }
        self.choosers = choosers;
    }

    fn degree(&self, active: &[u32], a: usize) -> usize {
        active
            .iter()
            .map(|&l| {
                let g = &self.legs[l as usize].leg;
                (g.start == a) as usize + (g.end == a) as usize
            })
            .sum()
    }

    fn partner(pairing: &[(u16, u16)], a: usize) -> Option<usize> {
        pairing.iter().find_map(|&(u, v)| {
            if u as usize == a {
                Some(v as usize)
            } else if v as usize == a {
                Some(u as usize)
            } else {
                None
            }
        })
    }

    fn shadow_after(&self, active: &[u32], gap: usize) -> usize {
        active
            .iter()
            .map(|&l| self.legs[l as usize].crossings(gap))
            .sum()
    }

    /// Adds one leg to a state: degree caps, no cycles, shadow cap.
    fn add_leg(&self, key: &Key, leg: u32) -> Option<Key> {
        let g = &self.legs[leg as usize].leg;
        let (a, b) = (g.start, g.end);
        let da = self.degree(&key.active, a);
        let db = self.degree(&key.active, b);
        if da + 1 > self.anchors[a].max_degree() || db + 1 > self.anchors[b].max_degree() {
            return None;
        }
        let pa = if da == 0 { a } else { Self::partner(&key.pairing, a)? };
        let pb = if db == 0 { b } else { Self::partner(&key.pairing, b)? };
        if da == 1 && pa == b {
            return None;
        }
        let mut pairing: Vec<(u16, u16)> = key
            .pairing
            .iter()
            .copied()
            .filter(|&(u, v)| !(da == 1 && (u as usize == a || v as usize == a)) && !(db == 1 && (u as usize == b || v as usize == b)))
            .collect();
        pairing.push((pa.min(pb) as u16, pa.max(pb) as u16));
        pairing.sort_unstable();
        let mut active = key.active.clone();
        let pos = active.binary_search(&leg).unwrap_or_else(|p| p);
        active.insert(pos, leg);
        if self.shadow_after(&active, key.ev as usize) > self.caps.shadow_cap {
            return None;
        }
        Some(Key {
            ev: key.ev,
            chooser: key.chooser,
            next: key.next,
            active,
            pairing,
            done: key.done,
        })
    }

    /// Closes event `ev`: degrees, coverage, finished pairs, legs that end.
    fn finalize(&self, key: &Key) -> Option<Key> {
        let e = key.ev as usize;
        let anchors_here: Vec<usize> = match self.events[e].kind {
            EventKind::Segment(i) => vec![2 * i, 2 * i + 1],
            EventKind::Portal(a) => vec![a],
        };
        for &u in &anchors_here {
            if !self.anchors[u].degree_ok(self.degree(&key.active, u)) {
                return None;
            }
        }
        if let EventKind::Segment(i) = self.events[e].kind {
            if !key.active.iter().any(|&l| self.legs[l as usize].covers & (1 << i) != 0) {
                return None;
            }
        }
        let mut cfg = Configuration {
            event: e,
            legs: key.active.clone(),
            pairing: Vec::new(),
            done: key.done,
        };
        for &(u, v) in &key.pairing {
            let (pu, pv) = (self.anchors[u as usize].event <= e, self.anchors[v as usize].event <= e);
            if pu && pv {
                match (self.anchors[u as usize].kind, self.anchors[v as usize].kind) {
                    (AnchorKind::PairEnd { pair: p, second: s }, AnchorKind::PairEnd { pair: q, second: t })
                        if p == q && s != t && cfg.done & (1 << p) == 0 =>
                    {
                        cfg.done |= 1 << p;
                    }
                    _ => return None,
                }
            } else {
                cfg.pairing.push((u, v));
            }
        }
        if !self.check_promising(&cfg) {
            return None;
        }
        let active: Vec<u32> = key
            .active
            .iter()
            .copied()
            .filter(|&l| self.legs[l as usize].last_ev > e)
            .collect();
        if self.shadow_after(&active, e) > self.caps.shadow_cap {
            return None;
        }
        Some(Key {
            ev: key.ev + 1,
            chooser: 0,
            next: 0,
            active,
            pairing: cfg.pairing,
            done: cfg.done,
        })
    }

    /// Whether a configuration can still be completed: no anchor is over
    /// its degree, every loose end is a genuine end, and no component
    /// already joins ends that can never be a pair.
    pub fn check_promising(&self, cfg: &Configuration) -> bool {
        for (a, anc) in self.anchors.iter().enumerate() {
            if self.degree(&cfg.legs, a) > anc.max_degree() {
                return false;
            }
        }
        let e = cfg.event;
        let mut seen = std::collections::HashSet::new();
        for &(u, v) in &cfg.pairing {
            for w in [u, v] {
                // Anchors swept earlier may hang off legs that already ended.
                let swept = self.anchors[w as usize].event < e;
                if !seen.insert(w) || (!swept && self.degree(&cfg.legs, w as usize) != 1) {
                    return false;
                }
                if let AnchorKind::PairEnd { pair, .. } = self.anchors[w as usize].kind {
                    if cfg.done & (1 << pair) != 0 {
                        return false;
                    }
                }
            }
            let processed = |w: u16| self.anchors[w as usize].event <= e;
            if processed(u) && processed(v) {
                match (self.anchors[u as usize].kind, self.anchors[v as usize].kind) {
                    (AnchorKind::PairEnd { pair: p, second: s }, AnchorKind::PairEnd { pair: q, second: t })
                        if p == q && s != t => {}
                    _ => return false,
                }
            }
        }
        true
    }

    /// Lower bound on the legs still to be chosen: every missing degree at a
    /// pair end or required portal costs half its shortest leg, and every
    /// uncovered segment ahead needs some leg that covers it.
    fn remaining_bound(&self, key: &Key) -> f64 {
        let ev = key.ev as usize;
        let mut half = 0.0;
        for (a, anc) in self.anchors.iter().enumerate() {
            if anc.event < ev {
                continue;
            }
            let need = match anc.kind {
                AnchorKind::PairEnd { .. } => 1,
                AnchorKind::Required(_) => 2,
                AnchorKind::Tip { .. } => 0,
            };
            let d = self.degree(&key.active, a);
            if need > d {
                half += (need - d) as f64 * self.nearest[a] / 2.0;
            }
        }
        let mut cover: f64 = 0.0;
        for (s, &c) in self.cover_min.iter().enumerate() {
            if self.seg_event(s) >= ev && !key.active.iter().any(|&l| self.legs[l as usize].covers & (1 << s) != 0) {
                cover = cover.max(c);
            }
        }
        half.max(cover)
    }

    pub fn solve(&self) -> Result<InnerSolution> {
        let n_ev = self.events.len();
        let full: u64 = if self.problem.pairs.len() == 64 { u64::MAX } else { (1u64 << self.problem.pairs.len()) - 1 };
        struct Node {
            key: Key,
            g: f64,
            parent: usize,
            picked: Option<u32>,
        }
        #[derive(PartialEq)]
        struct Item(f64, usize);
        impl Eq for Item {}
        impl PartialOrd for Item {
            fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
                Some(self.cmp(o))
            }
        }
        impl Ord for Item {
            fn cmp(&self, o: &Self) -> Ordering {
                o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
            }
        }
        let mut nodes: Vec<Node> = vec![Node {
            key: Key {
                ev: 0,
                chooser: 0,
                next: 0,
                active: vec![],
                pairing: vec![],
                done: 0,
            },
            g: 0.0,
            parent: usize::MAX,
            picked: None,
        }];
        let mut best: HashMap<Key, f64> = HashMap::new();
        best.insert(nodes[0].key.clone(), 0.0);
        let mut heap = BinaryHeap::new();
        heap.push(Item(0.0, 0));
        let mut found = None;
        while let Some(Item(_, id)) = heap.pop() {
            let g = nodes[id].g;
            if best.get(&nodes[id].key).is_some_and(|&b| g > b) {
                continue;
            }
            let key = nodes[id].key.clone();
            if key.ev as usize == n_ev {
                if key.active.is_empty() && key.pairing.is_empty() && key.done == full {
                    found = Some(id);
                    break;
                }
                continue;
            }
            if nodes.len() > self.caps.max_states {
                return Err(TspnError::TooLarge(format!("inner DP exceeded {} states", self.caps.max_states)));
            }
            let mut push = |k: Key, cost: f64, picked: Option<u32>, nodes: &mut Vec<Node>| {
                if best.get(&k).is_some_and(|&b| b <= cost) {
                    return;
                }
                let f = cost + self.remaining_bound(&k);
                if !f.is_finite() {
                    return;
                }
                best.insert(k.clone(), cost);
                nodes.push(Node {
                    key: k,
                    g: cost,
                    parent: id,
                    picked,
                });
                heap.push(Item(f, nodes.len() - 1));
            };
            let ev = key.ev as usize;
            let ch = key.chooser as usize;
            if ch < self.choosers[ev].len() {
                let list = &self.choosers[ev][ch].1;
                for (idx, &leg) in list.iter().enumerate().skip(key.next as usize) {
                    if let Some(mut k) = self.add_leg(&key, leg) {
                        k.next = idx as u32 + 1;
                        push(k, g + self.legs[leg as usize].leg.length, Some(leg), &mut nodes);
                    }
                }
                let mut k = key.clone();
                k.chooser += 1;
                k.next = 0;
                push(k, g, None, &mut nodes);
            } else if let Some(k) = self.finalize(&key) {
                push(k, g, None, &mut nodes);
            }
        }
        let Some(end) = found else {
            return Err(TspnError::Infeasible("no path collection within the caps".into()));
        };
        let mut picked = Vec::new();
        let mut cur = end;
        while cur != usize::MAX {
            if let Some(l) = nodes[cur].picked {
                picked.push(l);
            }
            cur = nodes[cur].parent;
        }
        let cost = nodes[end].g;
        let paths = self.assemble(&picked)?;
        Ok(InnerSolution {
            cost,
            paths,
            legs: picked.iter().map(|&l| self.legs[l as usize].leg.clone()).collect(),
            states: nodes.len(),
        })
    }

    fn point_of(&self, a: usize) -> TourPoint {
        let anc = &self.anchors[a];
        match anc.kind {
            AnchorKind::Tip { seg, .. } => TourPoint::new(anc.pos, Binding::Segment(self.problem.segments[seg].id)),
            AnchorKind::Required(k) => TourPoint::new(anc.pos, Binding::Portal(k)),
            AnchorKind::PairEnd { .. } => TourPoint::dummy(anc.pos),
        }
    }

    fn assemble(&self, picked: &[u32]) -> Result<Vec<Vec<TourPoint>>> {
        let mut used = vec![false; picked.len()];
        let mut paths = Vec::new();
        for k in 0..self.problem.pairs.len() {
            let from = self
                .anchors
                .iter()
                .position(|x| x.kind == AnchorKind::PairEnd { pair: k, second: false })
                .unwrap();
            let to = self
                .anchors
                .iter()
                .position(|x| x.kind == AnchorKind::PairEnd { pair: k, second: true })
                .unwrap();
            let mut path = vec![self.point_of(from)];
            let mut at = from;
            while at != to {
                let j = (0..picked.len())
                    .find(|&j| {
                        let g = &self.legs[picked[j] as usize].leg;
                        !used[j] && (g.start == at || g.end == at)
                    })
                    .ok_or_else(|| TspnError::Internal("inner DP path does not reach its pair".into()))?;
                used[j] = true;
                let g = &self.legs[picked[j] as usize].leg;
                let forward = g.start == at;
                let mut inner: Vec<Point> = g.realized[1..g.realized.len() - 1].to_vec();
                if !forward {
                    inner.reverse();
                }
                let mirrors: Vec<usize> = if forward {
                    g.reflect.clone()
                } else {
                    g.reflect.iter().rev().copied().collect()
                };
                for (p, m) in inner.into_iter().zip(mirrors) {
                    path.push(TourPoint::new(p, Binding::Segment(self.problem.segments[m].id)));
                }
                at = if forward { g.end } else { g.start };
                path.push(self.point_of(at));
            }
            paths.push(path);
        }
        if used.iter().any(|u| !u) {
            return Err(TspnError::Internal("inner DP picked a leg outside every path".into()));
        }
        Ok(paths)
    }
}

/// Solves `(S, P, Q)`. With no pairs the whole tour lives in this square and
/// is found by exact order enumeration instead of the sweep.
pub fn inner_dp_solve(problem: &LeafProblem, caps: InnerCaps) -> Result<InnerSolution> {
    if problem.pairs.is_empty() {
        return solve_closed_leaf(problem);
    }
    InnerModel::build(problem, caps)?.solve()
}

fn leaf_sites(problem: &LeafProblem) -> (Vec<Site>, Vec<Binding>) {
    let mut sites: Vec<Site> = problem.segments.iter().map(Site::from).collect();
    let mut binds: Vec<Binding> = problem.segments.iter().map(|s| Binding::Segment(s.id)).collect();
    for (k, q) in problem.effective_required().into_iter().enumerate() {
        sites.push(Site { x: q.x, lo: q.y, hi: q.y });
        binds.push(Binding::Portal(k));
    }
    (sites, binds)
}

const CLOSED_LEAF_MAX: usize = 9;

fn solve_closed_leaf(problem: &LeafProblem) -> Result<InnerSolution> {
    let (sites, binds) = leaf_sites(problem);
    let k = sites.len();
    if k > CLOSED_LEAF_MAX {
        return Err(TspnError::TooLarge(format!("closed leaf with {k} sites")));
    }
    if k == 0 {
        return Ok(InnerSolution {
            cost: 0.0,
            paths: vec![vec![]],
            legs: vec![],
            states: 0,
        });
    }
    let orders = canonical_orders(&(0..k).collect::<Vec<_>>());
    let best = orders
        .par_iter()
        .map(|o| {
            let s: Vec<Site> = o.iter().map(|&i| sites[i]).collect();
            let r = optimize_chain(&s, None, true, None, None, DEFAULT_TOL, DEFAULT_MAX_SWEEPS);
            (r.cost, o.clone(), r.ys)
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .unwrap();
    let cycle = best
        .1
        .iter()
        .zip(&best.2)
        .map(|(&i, &y)| TourPoint::new(Point::new(sites[i].x, y), binds[i]))
        .collect();
    Ok(InnerSolution {
        cost: best.0,
        paths: vec![cycle],
        legs: vec![],
        states: orders.len(),
    })
}

/// Independent reference: tries every assignment of segments and required
/// portals to pairs and every order inside each path.
pub fn brute_force_square(problem: &LeafProblem) -> Result<f64> {
    if problem.segments.len() > 5 || problem.pairs.len() > 3 || problem.required.len() > 3 {
        return Err(TspnError::TooLarge("brute force is limited to 5 segments and 3 pairs".into()));
    }
    if problem.pairs.is_empty() {
        return Ok(solve_closed_leaf(problem)?.cost);
    }
    let (sites, _) = leaf_sites(problem);
    let k = sites.len();
    let np = problem.pairs.len();
    let perms = permutations(k);
    let best = perms
        .par_iter()
        .map(|perm| {
            let mut best = f64::INFINITY;
            // Cut the permutation into `np` consecutive blocks.
            let mut cuts = vec![0usize; np - 1];
            loop {
                let mut bounds = vec![0];
                bounds.extend(cuts.iter().copied());
                bounds.push(k);
                let mut total = 0.0;
                for (p, &(a, b)) in problem.pairs.iter().enumerate() {
                    let block: Vec<Site> = perm[bounds[p]..bounds[p + 1]].iter().map(|&i| sites[i]).collect();
                    total += optimize_chain(&block, None, false, Some(a), Some(b), DEFAULT_TOL, DEFAULT_MAX_SWEEPS).cost;
                }
                best = best.min(total);
                // Next non-decreasing cut vector.
                let mut i = cuts.len();
                loop {
                    if i == 0 {
                        return best;
                    }
                    i -= 1;
                    if cuts[i] < k {
                        cuts[i] += 1;
                        for j in i + 1..cuts.len() {
                            cuts[j] = cuts[i];
                        }
                        break;
                    }
                }
            }
        })
        .reduce(|| f64::INFINITY, f64::min);
    Ok(best)
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    fn rec(i: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        for j in i..cur.len() {
            cur.swap(i, j);
            rec(i + 1, cur, out);
            cur.swap(i, j);
        }
    }
    rec(0, &mut cur, &mut out);
    out
}

/// Random leaf square with portals on an `m = 8` grid, for cross-checks.
pub fn random_leaf_problem(seed: u64, max_segments: usize, max_pairs: usize, max_required: usize) -> LeafProblem {
    use rand::{seq::SliceRandom, Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let side = 8.0;
    let m = 8;
    let sq = Square::new(0.0, 0.0, side);
    let ns = rng.gen_range(0..=max_segments);
    let mut xs: Vec<f64> = Vec::new();
    while xs.len() < ns {
        let x = rng.gen_range(0.5..side - 0.5);
        if xs.iter().all(|&o: &f64| (o - x).abs() > 0.2) {
            xs.push(x);
        }
    }
    let segments = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let len = rng.gen_range(1.0..3.0);
            let y = rng.gen_range(0.2..side - 0.2 - len);
            Segment::new(i, x, y, y + len)
        })
        .collect();
    let step = side / m as f64;
    let mut portals: Vec<Point> = Vec::new();
    for j in 0..m {
        let t = j as f64 * step;
        portals.push(Point::new(t, 0.0));
        portals.push(Point::new(side, t));
        portals.push(Point::new(side - t, side));
        portals.push(Point::new(0.0, side - t));
    }
    portals.shuffle(&mut rng);
    let np = rng.gen_range(1..=max_pairs.max(1));
    let pairs = (0..np).map(|k| (portals[2 * k], portals[2 * k + 1])).collect();
    let horizontal: Vec<Point> = portals[2 * np..]
        .iter()
        .copied()
        .filter(|p| p.y == 0.0 || p.y == side)
        .collect();
    let nq = rng.gen_range(0..=max_required.min(horizontal.len()));
    LeafProblem {
        square: sq,
        segments,
        pairs,
        required: horizontal[..nq].to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sq() -> Square {
        Square::new(0.0, 0.0, 10.0)
    }

    #[test]
    fn empty_square_is_straight() {
        let p = LeafProblem {
            square: sq(),
            segments: vec![],
            pairs: vec![(Point::new(0.0, 10.0), Point::new(6.0, 10.0))],
            required: vec![],
        };
        let s = inner_dp_solve(&p, InnerCaps::default()).unwrap();
        assert!((s.cost - 6.0).abs() < 1e-12);
        assert!(event_points(&LeafProblem { pairs: vec![], ..p }).unwrap().is_empty());
    }

    #[test]
    fn through_the_tip() {
        let p = LeafProblem {
            square: sq(),
            segments: vec![Segment::new(0, 5.0, 1.0, 4.0)],
            pairs: vec![(Point::new(0.0, 6.0), Point::new(10.0, 6.0))],
            required: vec![],
        };
        let s = inner_dp_solve(&p, InnerCaps::default()).unwrap();
        let want = 2.0 * 5.0f64.hypot(2.0);
        assert!((s.cost - want).abs() < 1e-9, "{}", s.cost);
        assert!((brute_force_square(&p).unwrap() - want).abs() < 1e-6);
    }

    #[test]
    fn mirror_at_mid_height() {
        let s = Segment::new(0, 4.0, 0.0, 10.0);
        let pts = realize_large_leg(Point::new(0.0, 2.0), Point::new(0.0, 6.0), &[s]).unwrap();
        assert_eq!(pts.len(), 3);
        assert!((pts[1].y - 4.0).abs() < 1e-12);
        assert!((path_len(&pts) - 2.0 * 4.0f64.hypot(2.0)).abs() < 1e-12);
        let short = Segment::new(0, 4.0, 5.0, 6.0);
        assert!(realize_large_leg(Point::new(0.0, 2.0), Point::new(0.0, 6.0), &[short]).is_none());
        assert_eq!(
            realize_large_leg(Point::new(0.0, 2.0), Point::new(1.0, 6.0), &[]).unwrap().len(),
            2
        );
    }

    #[test]
    fn events_sorted() {
        let p = LeafProblem {
            square: sq(),
            segments: vec![
                Segment::new(0, 7.0, 1.0, 2.0),
                Segment::new(1, 2.0, 1.0, 2.0),
                Segment::new(2, 5.0, 1.0, 2.0),
            ],
            pairs: vec![(Point::new(3.0, 0.0), Point::new(0.0, 5.0))],
            required: vec![],
        };
        let ev = event_points(&p).unwrap();
        assert_eq!(ev.len(), 5);
        assert!(ev.windows(2).all(|w| w[0].x <= w[1].x));
    }

    #[test]
    fn detour_matches_brute_force() {
        let p = LeafProblem {
            square: sq(),
            segments: vec![Segment::new(0, 3.0, 6.0, 8.0), Segment::new(1, 6.0, 1.0, 2.5)],
            pairs: vec![(Point::new(0.0, 4.0), Point::new(10.0, 5.0))],
            required: vec![Point::new(8.0, 0.0)],
        };
        let dp = inner_dp_solve(&p, InnerCaps::default()).unwrap();
        let bf = brute_force_square(&p).unwrap();
        assert!((dp.cost - bf).abs() <= 1e-6 * bf, "{} vs {}", dp.cost, bf);
    }

    #[test]
    fn random_squares_match_brute_force() {
        for seed in 0..25 {
            let p = random_leaf_problem(seed, 4, 2, 2);
            let dp = inner_dp_solve(&p, InnerCaps::default()).unwrap();
            let bf = brute_force_square(&p).unwrap();
            assert!((dp.cost - bf).abs() <= 1e-6 * bf.max(1.0), "seed {seed}: {} vs {}", dp.cost, bf);
        }
    }
}
