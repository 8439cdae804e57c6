//! Anatomy of a tour: point classes, cover-lines and strips, loops and
//! ladders, zig-zag/sink partitions, pure reflection sequences, and the
//! invariant checks that optimal tours satisfy.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Result, Stage, TspnError};
use crate::geometry::{shadow_profile, Binding, Point, Tour, TourPoint};
use crate::instance::{Instance, Segment};

/// Tolerance for straightness and equal-angle tests, in radians.
pub const EPS_ANGLE: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PointKind {
    Straight,
    Break,
    ReflectionLeft,
    ReflectionRight,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sense {
    Ascending,
    Descending,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointClass {
    pub kind: PointKind,
    pub vertical_sense: Option<Sense>,
    pub pure: bool,
    pub at_tip: bool,
}

impl PointClass {
    pub fn is_reflection(&self) -> bool {
        matches!(self.kind, PointKind::ReflectionLeft | PointKind::ReflectionRight)
    }
}

fn tour_tol(tour: &Tour) -> f64 {
    crate::geometry::EPS_GEOM * crate::geometry::scale_of(tour.points.iter().map(|p| p.pos))
}

fn neighbours(tour: &Tour, i: usize) -> Option<(Point, Point)> {
    let n = tour.len();
    if tour.closed {
        if n < 2 {
            return None;
        }
        Some((tour.points[(i + n - 1) % n].pos, tour.points[(i + 1) % n].pos))
    } else if i == 0 || i + 1 >= n {
        None
    } else {
        Some((tour.points[i - 1].pos, tour.points[i + 1].pos))
    }
}

/// Classifies every point bound to a segment; other points get `None`.
pub fn classify_points(tour: &Tour, inst: &Instance) -> Result<Vec<Option<PointClass>>> {
    let tol = tour_tol(tour).max(inst.tol());
    for k in 0..tour.leg_count() {
        let (a, b) = tour.leg(k);
        if (a.x - b.x).abs() <= tol && a.dist(b) > tol {
            return Err(TspnError::VerticalLeg(k, (k + 1) % tour.len()));
        }
    }
    let idx = inst.index_of();
    let mut out = Vec::with_capacity(tour.len());
    for (i, tp) in tour.points.iter().enumerate() {
        let seg = match tp.binding {
            Binding::Segment(id) => idx.get(&id).map(|&k| inst.segments[k]),
            _ => None,
        };
        let (Some(seg), Some((a, b))) = (seg, neighbours(tour, i)) else {
            out.push(None);
            continue;
        };
        out.push(Some(classify_one(a, tp.pos, b, &seg, tol)));
    }
    Ok(out)
}

fn classify_one(a: Point, p: Point, b: Point, seg: &Segment, tol: f64) -> PointClass {
    let at_tip = (p.y - seg.y_bot).abs() <= tol || (p.y - seg.y_top).abs() <= tol;
    // Elevation of each leg seen from p, folding both onto the same side.
    let ta = (a.y - p.y).atan2((a.x - p.x).abs());
    let tb = (b.y - p.y).atan2((b.x - p.x).abs());
    let equal_angles = (ta + tb).abs() <= EPS_ANGLE;
    let a_left = a.x < p.x;
    let b_left = b.x < p.x;
    if a_left != b_left {
        let kind = if equal_angles {
            PointKind::Straight
        } else {
            PointKind::Break
        };
        return PointClass {
            kind,
            vertical_sense: None,
            pure: false,
            at_tip,
        };
    }
    let kind = if a_left {
        PointKind::ReflectionLeft
    } else {
        PointKind::ReflectionRight
    };
    let vertical_sense = if tb > ta + EPS_ANGLE {
        Some(Sense::Ascending)
    } else if tb < ta - EPS_ANGLE {
        Some(Sense::Descending)
    } else {
        None
    };
    PointClass {
        kind,
        vertical_sense,
        pure: equal_angles,
        at_tip,
    }
}

/// Horizontal cover-lines `C_k` at `y0 - k·spacing`, `k = 0, 1, ...`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoverLineSet {
    pub y0: f64,
    pub spacing: f64,
    pub count: usize,
    /// Segment id to the index of the top-most line meeting it.
    pub assignment: BTreeMap<usize, usize>,
}

impl CoverLineSet {
    pub fn y(&self, k: i64) -> f64 {
        self.y0 - k as f64 * self.spacing
    }

    /// Segments assigned to line `k`.
    pub fn members(&self, k: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .filter(|&(_, &v)| v == k)
            .map(|(&id, _)| id)
            .collect()
    }

    /// Index of the top-most line meeting `[lo, hi]`, or the nearest line.
    pub fn line_for(&self, lo: f64, hi: f64) -> usize {
        if hi >= self.y0 {
            return 0;
        }
        let k = ((self.y0 - hi) / self.spacing - 1e-12).ceil().max(0.0);
        let k = k as usize;
        if self.y(k as i64) >= lo - 1e-9 * self.spacing || k == 0 {
            k
        } else {
            // Nothing meets a short site; snap to whichever line is closer.
            let above = self.y(k as i64 - 1) - hi;
            let below = lo - self.y(k as i64);
            if above <= below {
                k - 1
            } else {
                k
            }
        }
    }
}

/// Cover-lines starting at the highest lower tip and stepping down by 1
/// (raw or snapped instances) or by ρ (scaled instances).
pub fn build_cover_lines(inst: &Instance) -> CoverLineSet {
    let spacing = match (inst.stage, inst.rho) {
        (Stage::Scaled, Some(r)) => r,
        _ => 1.0,
    };
    build_cover_lines_with(inst, spacing)
}

pub fn build_cover_lines_with(inst: &Instance, spacing: f64) -> CoverLineSet {
    let y0 = inst
        .segments
        .iter()
        .map(|s| s.y_bot)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut set = CoverLineSet {
        y0,
        spacing,
        count: 0,
        assignment: BTreeMap::new(),
    };
    for s in &inst.segments {
        let k = set.line_for(s.y_bot, s.y_top);
        set.assignment.insert(s.id, k);
        set.count = set.count.max(k + 1);
    }
    set
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StripPathKind {
    Loop,
    Ladder,
    CoverLineLoop,
    /// The whole tour lies inside the strip.
    Closed,
}

/// A maximal piece of a tour inside one strip.
#[derive(Clone, Debug, PartialEq)]
pub struct StripPath {
    pub kind: StripPathKind,
    pub entry: Point,
    pub exit: Point,
    pub points: Tour,
    /// Index of each point in the source tour; `None` for clip points.
    pub source: Vec<Option<usize>>,
}

/// Clips a tour to the strip between `C_k` (top) and `C_{k+1}` (bottom).
/// `k` may be -1 for the band above the first line.
pub fn restrict_to_strip(tour: &Tour, k: i64, lines: &CoverLineSet) -> Vec<StripPath> {
    let hi = lines.y(k);
    let lo = lines.y(k + 1);
    let tol = tour_tol(tour);
    let n = tour.len();
    if n == 0 {
        return vec![];
    }
    let inside = |p: Point| p.y >= lo - tol && p.y <= hi + tol;
    let outside_start = (0..n).find(|&i| !inside(tour.points[i].pos));
    let Some(s0) = outside_start else {
        let pts = tour.clone();
        let src = (0..n).map(Some).collect();
        let (e, o) = (pts.points[0].pos, pts.points[n - 1].pos);
        let kind = if tour.closed {
            StripPathKind::Closed
        } else {
            classify_strip_path(e, o, &pts, lo, hi, tol)
        };
        return vec![StripPath {
            kind,
            entry: e,
            exit: o,
            points: pts,
            source: src,
        }];
    };
    let order: Vec<usize> = if tour.closed {
        (0..n).map(|t| (s0 + t) % n).collect()
    } else {
        (0..n).collect()
    };
    let legs = if tour.closed { n } else { n - 1 };
    let mut out = Vec::new();
    let mut cur: Vec<TourPoint> = Vec::new();
    let mut src: Vec<Option<usize>> = Vec::new();
    if !tour.closed && inside(tour.points[0].pos) {
        cur.push(tour.points[0]);
        src.push(Some(0));
    }
    for t in 0..legs {
        let (i, j) = (order[t], order[(t + 1) % n]);
        let (p, q) = (tour.points[i].pos, tour.points[j].pos);
        let Some((t0, t1)) = clip_y(p, q, lo, hi, tol) else {
            flush(&mut out, &mut cur, &mut src, lo, hi, tol);
            continue;
        };
        let at = |t: f64| Point::new(p.x + t * (q.x - p.x), p.y + t * (q.y - p.y));
        if t0 > 0.0 || cur.is_empty() {
            flush(&mut out, &mut cur, &mut src, lo, hi, tol);
            if t0 > 0.0 {
                cur.push(TourPoint::dummy(snap_y(at(t0), lo, hi, tol)));
                src.push(None);
            } else {
                cur.push(tour.points[i]);
                src.push(Some(i));
            }
        }
        if t1 < 1.0 {
            cur.push(TourPoint::dummy(snap_y(at(t1), lo, hi, tol)));
            src.push(None);
            flush(&mut out, &mut cur, &mut src, lo, hi, tol);
        } else {
            cur.push(tour.points[j]);
            src.push(Some(j));
        }
    }
    flush(&mut out, &mut cur, &mut src, lo, hi, tol);
    out
}

fn snap_y(p: Point, lo: f64, hi: f64, tol: f64) -> Point {
    if (p.y - lo).abs() <= 4.0 * tol {
        Point::new(p.x, lo)
    } else if (p.y - hi).abs() <= 4.0 * tol {
        Point::new(p.x, hi)
    } else {
        p
    }
}

fn clip_y(p: Point, q: Point, lo: f64, hi: f64, tol: f64) -> Option<(f64, f64)> {
    let dy = q.y - p.y;
    if dy.abs() <= f64::EPSILON * (p.y.abs() + 1.0) {
        return (p.y >= lo - tol && p.y <= hi + tol).then_some((0.0, 1.0));
    }
    let ta = (lo - p.y) / dy;
    let tb = (hi - p.y) / dy;
    let (t0, t1) = (ta.min(tb).max(0.0), ta.max(tb).min(1.0));
    let len = p.dist(q);
    if t1 - t0 < -tol / len.max(tol) {
        return None;
    }
    let snap = |t: f64| {
        if t * len <= tol {
            0.0
        } else if (1.0 - t) * len <= tol {
            1.0
        } else {
            t
        }
    };
    Some((snap(t0), snap(t1.max(t0))))
}

fn flush(
    out: &mut Vec<StripPath>,
    cur: &mut Vec<TourPoint>,
    src: &mut Vec<Option<usize>>,
    lo: f64,
    hi: f64,
    tol: f64,
) {
    if cur.is_empty() {
        return;
    }
    let pts = Tour::open(std::mem::take(cur));
    let source = std::mem::take(src);
    let length = crate::geometry::tour_cost(&pts);
    if length <= tol || pts.len() < 2 {
        return;
    }
    let (e, o) = (pts.points[0].pos, pts.points[pts.len() - 1].pos);
    out.push(StripPath {
        kind: classify_strip_path(e, o, &pts, lo, hi, tol),
        entry: e,
        exit: o,
        points: pts,
        source,
    });
}

fn classify_strip_path(e: Point, o: Point, pts: &Tour, lo: f64, hi: f64, tol: f64) -> StripPathKind {
    let on = |p: Point, y: f64| (p.y - y).abs() <= 4.0 * tol;
    for y in [lo, hi] {
        if on(e, y) && on(o, y) {
            if pts.points.iter().all(|p| on(p.pos, y)) {
                return StripPathKind::CoverLineLoop;
            }
            return StripPathKind::Loop;
        }
    }
    StripPathKind::Ladder
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SectionKind {
    Sink,
    ZigZag,
}

/// A run of reflections `first..=last` (indices into `reflections`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Section {
    pub kind: SectionKind,
    pub first: usize,
    pub last: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Part {
    /// Sink, zig-zag, sink; neighbouring sections share a boundary reflection.
    pub sections: Vec<Section>,
    pub first: usize,
    pub last: usize,
    pub x_range: (f64, f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReflectionInfo {
    /// Index of the point in the strip path.
    pub at: usize,
    pub pos: Point,
    pub class: PointClass,
    pub top: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ZigZagSinkPartition {
    pub reflections: Vec<ReflectionInfo>,
    pub parts: Vec<Part>,
    /// Some part needed more than the three sections an optimum allows.
    pub overlong: bool,
    /// Some vertical line meets two parts.
    pub overlapping: bool,
}

/// Splits the reflections of a strip path into maximal monotone parts and
/// parses each part into sink, zig-zag, sink sections.
pub fn partition_zigzag_sink(
    path: &StripPath,
    classes: &[Option<PointClass>],
    tour: &Tour,
    inst: &Instance,
    strip_top: f64,
) -> ZigZagSinkPartition {
    let idx = inst.index_of();
    let mut refl = Vec::new();
    let m = path.points.len();
    for (at, s) in path.source.iter().enumerate() {
        let Some(i) = *s else { continue };
        // Path end points are entry points, not contained reflections.
        if !path.points.closed && (at == 0 || at + 1 == m) {
            continue;
        }
        let Some(c) = classes.get(i).copied().flatten() else { continue };
        if !c.is_reflection() {
            continue;
        }
        let top = match tour.points[i].binding {
            Binding::Segment(id) => idx
                .get(&id)
                .map(|&k| inst.segments[k].contains_y(strip_top, inst.tol()))
                .unwrap_or(false),
            _ => false,
        };
        refl.push(ReflectionInfo {
            at,
            pos: path.points.points[at].pos,
            class: c,
            top,
        });
    }
    let mut parts = Vec::new();
    let mut overlong = false;
    let mut i = 0;
    while i < refl.len() {
        let sense = refl[i].class.vertical_sense;
        let mut j = i;
        while j + 1 < refl.len() && sense.is_some() && refl[j + 1].class.vertical_sense == sense {
            j += 1;
        }
        let sections = parse_sections(&refl[i..=j], i);
        overlong |= sections.len() > 3;
        let xs = refl[i..=j].iter().map(|r| r.pos.x);
        let x_range = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
        parts.push(Part {
            sections,
            first: i,
            last: j,
            x_range,
        });
        i = j + 1;
    }
    let tol = 1e-9 * inst.tol().max(1.0);
    let mut overlapping = false;
    for a in 0..parts.len() {
        for b in a + 1..parts.len() {
            let (p, q) = (parts[a].x_range, parts[b].x_range);
            if p.0.max(q.0) < p.1.min(q.1) - tol {
                overlapping = true;
            }
        }
    }
    ZigZagSinkPartition {
        reflections: refl,
        parts,
        overlong,
        overlapping,
    }
}

fn parse_sections(r: &[ReflectionInfo], base: usize) -> Vec<Section> {
    let k = r.len();
    let mut out = Vec::new();
    if k == 1 {
        out.push(Section {
            kind: SectionKind::Sink,
            first: base,
            last: base,
        });
        return out;
    }
    let mut i = 0;
    while i + 1 < k {
        let mut s = i;
        while s + 1 < k && r[s + 1].top == r[i].top {
            s += 1;
        }
        if s > i {
            out.push(Section {
                kind: SectionKind::Sink,
                first: base + i,
                last: base + s,
            });
            i = s;
            if i + 1 >= k {
                break;
            }
        }
        let mut z = i;
        while z + 1 < k && r[z + 1].top != r[z].top {
            z += 1;
        }
        out.push(Section {
            kind: SectionKind::ZigZag,
            first: base + i,
            last: base + z,
        });
        i = z;
    }
    out
}

/// A maximal stretch of consecutive tour points, from a reflection to a
/// reflection, with no tip point strictly inside.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReflectionSequence {
    pub start: usize,
    pub end: usize,
    pub reflections: usize,
}

pub fn pure_reflection_sequences(tour: &Tour, classes: &[Option<PointClass>]) -> Vec<ReflectionSequence> {
    let n = tour.len();
    let is_tip = |i: usize| classes[i].map_or(false, |c| c.at_tip);
    let is_refl = |i: usize| classes[i].map_or(false, |c| c.is_reflection());
    // Runs of non-tip points; a closed tour is cut at its first tip.
    let start = if tour.closed {
        (0..n).find(|&i| is_tip(i)).map_or(0, |t| t + 1)
    } else {
        0
    };
    let mut out = Vec::new();
    let mut run: Vec<usize> = Vec::new();
    let close_run = |run: &mut Vec<usize>, out: &mut Vec<ReflectionSequence>| {
        let refl: Vec<usize> = run.iter().copied().filter(|&i| is_refl(i)).collect();
        if let (Some(&a), Some(&b)) = (refl.first(), refl.last()) {
            out.push(ReflectionSequence {
                start: a,
                end: b,
                reflections: refl.len(),
            });
        }
        run.clear();
    };
    for t in 0..n {
        let i = (start + t) % n;
        if is_tip(i) {
            close_run(&mut run, &mut out);
        } else {
            run.push(i);
        }
    }
    close_run(&mut run, &mut out);
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct StructureReport {
    pub checks: Vec<Check>,
}

impl StructureReport {
    pub fn passed(&self, name: &str) -> bool {
        self.checks.iter().filter(|c| c.name == name).all(|c| c.pass)
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

impl fmt::Display for StructureReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let v = if c.pass { "PASS" } else { "FAIL" };
            writeln!(f, "CHECK {} {} {}", c.name, v, c.detail)?;
        }
        Ok(())
    }
}

/// Structural checks that hold for optimal tours. On other tours the
/// report is advisory: failures are entries, never errors.
pub fn check_optimal_structure(tour: &Tour, inst: &Instance) -> Result<StructureReport> {
    let classes = classify_points(tour, inst)?;
    let mut rep = StructureReport::default();
    let idx = inst.index_of();
    let tol = tour_tol(tour).max(inst.tol());

    // Straight, break at a tip, or reflection; interior reflections pure.
    let mut bad = Vec::new();
    for (i, c) in classes.iter().enumerate() {
        let Some(c) = c else { continue };
        let ok = match c.kind {
            PointKind::Straight => true,
            PointKind::Break => c.at_tip,
            _ => c.at_tip || c.pure,
        };
        if !ok {
            bad.push(i);
        }
    }
    rep.checks.push(Check {
        name: "trichotomy",
        pass: bad.is_empty(),
        detail: detail_list("points", &bad),
    });

    // Consecutive reflections alternate, and the left one of a pair of
    // consecutive reflections is the right reflection.
    let refl: Vec<usize> = (0..tour.len())
        .filter(|&i| classes[i].map_or(false, |c| c.is_reflection()))
        .collect();
    let mut bad = Vec::new();
    let pairs = if tour.closed { refl.len() } else { refl.len().saturating_sub(1) };
    if refl.len() >= 2 {
        for t in 0..pairs {
            let (a, b) = (refl[t], refl[(t + 1) % refl.len()]);
            let (ka, kb) = (classes[a].unwrap().kind, classes[b].unwrap().kind);
            let (xa, xb) = (tour.points[a].pos.x, tour.points[b].pos.x);
            let ok = ka != kb
                && match ka {
                    PointKind::ReflectionRight => xb > xa - tol,
                    _ => xb < xa + tol,
                };
            if !ok {
                bad.push(a);
            }
        }
    }
    rep.checks.push(Check {
        name: "alternation",
        pass: bad.is_empty(),
        detail: format!("{} reflections; {}", refl.len(), detail_list("bad pairs at", &bad)),
    });

    // A segment carrying a reflection meets the tour nowhere else.
    let mut bad = Vec::new();
    let n = tour.len();
    for &i in &refl {
        let Binding::Segment(id) = tour.points[i].binding else { continue };
        let Some(&k) = idx.get(&id) else { continue };
        let s = inst.segments[k];
        for leg in 0..tour.leg_count() {
            let incident = leg == i || (leg + 1) % n == i;
            if incident {
                continue;
            }
            let (a, b) = tour.leg(leg);
            if leg_meets_segment(a, b, &s, tol) {
                bad.push(id);
                break;
            }
        }
    }
    rep.checks.push(Check {
        name: "exclusivity",
        pass: bad.is_empty(),
        detail: detail_list("segments", &bad),
    });

    // Zig-zags and sinks of three or more reflections order their two
    // interleaved chains monotonically in x.
    let lines = build_cover_lines(inst);
    let mut bad = Vec::new();
    let mut sections = 0;
    let mut overlong = 0;
    let mut loops_max = 0;
    let mut ladders_max = 0;
    for k in -1..=lines.count as i64 {
        let paths = restrict_to_strip(tour, k, &lines);
        for p in &paths {
            if !matches!(p.kind, StripPathKind::Loop | StripPathKind::Ladder | StripPathKind::Closed) {
                continue;
            }
            let part = partition_zigzag_sink(p, &classes, tour, inst, lines.y(k));
            if part.overlong {
                overlong += 1;
            }
            for pt in &part.parts {
                for sec in &pt.sections {
                    if sec.last - sec.first + 1 < 3 {
                        continue;
                    }
                    sections += 1;
                    if !chains_ordered(&part.reflections[sec.first..=sec.last], sec.kind, tol) {
                        bad.push(format!("strip{k}:{}..{}", sec.first, sec.last));
                    }
                }
            }
        }
        loops_max = loops_max.max(max_overlap(&paths, StripPathKind::Loop));
        ladders_max = ladders_max.max(max_overlap(&paths, StripPathKind::Ladder));
    }
    rep.checks.push(Check {
        name: "x_order",
        pass: bad.is_empty(),
        detail: format!("{sections} sections of length >= 3; bad: [{}]", bad.join(",")),
    });
    rep.checks.push(Check {
        name: "partition_shape",
        pass: overlong == 0,
        detail: format!("{overlong} parts with more than three sections"),
    });
    rep.checks.push(Check {
        name: "overlap_caps",
        pass: loops_max <= 12 && ladders_max <= 7,
        detail: format!("max overlapping loops {loops_max} (cap 12), ladders {ladders_max} (cap 7)"),
    });

    let bb = inst.bounding_box()?;
    let shadow = shadow_profile(std::slice::from_ref(tour), None).max();
    let applies = bb.height() <= 3.0 + tol;
    rep.checks.push(Check {
        name: "shadow_H3",
        pass: !applies || shadow <= 2,
        detail: if applies {
            format!("H = {:.6}, max shadow {shadow}", bb.height())
        } else {
            format!("H = {:.6} > 3, not applicable (max shadow {shadow})", bb.height())
        },
    });
    Ok(rep)
}

fn detail_list<T: fmt::Display>(what: &str, v: &[T]) -> String {
    let shown: Vec<String> = v.iter().take(8).map(|x| x.to_string()).collect();
    let more = if v.len() > 8 { ",..." } else { "" };
    format!("{} {what} [{}{more}]", v.len(), shown.join(","))
}

/// True when leg `ab` touches the closed vertical segment `s`.
pub fn leg_meets_segment(a: Point, b: Point, s: &Segment, tol: f64) -> bool {
    let (x0, x1) = (a.x.min(b.x), a.x.max(b.x));
    if s.x < x0 - tol || s.x > x1 + tol {
        return false;
    }
    if (b.x - a.x).abs() <= tol {
        let (y0, y1) = (a.y.min(b.y), a.y.max(b.y));
        return y1 >= s.y_bot - tol && y0 <= s.y_top + tol;
    }
    let t = ((s.x - a.x) / (b.x - a.x)).clamp(0.0, 1.0);
    let y = a.y + t * (b.y - a.y);
    s.contains_y(y, tol)
}

fn chains_ordered(r: &[ReflectionInfo], kind: SectionKind, tol: f64) -> bool {
    let dir = if r[0].class.kind == PointKind::ReflectionLeft { 1.0 } else { -1.0 };
    let odd: Vec<f64> = r.iter().step_by(2).map(|x| x.pos.x * dir).collect();
    let even: Vec<f64> = r.iter().skip(1).step_by(2).map(|x| x.pos.x * dir).collect();
    let inc = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0] - tol);
    let dec = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0] + tol);
    inc(&odd)
        && match kind {
            SectionKind::ZigZag => inc(&even),
            SectionKind::Sink => dec(&even),
        }
}

fn max_overlap(paths: &[StripPath], kind: StripPathKind) -> usize {
    let mut ev: Vec<(f64, i32)> = Vec::new();
    for p in paths.iter().filter(|p| p.kind == kind) {
        let xs = p.points.points.iter().map(|q| q.pos.x);
        let (a, b) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
        ev.push((a, 1));
        ev.push((b, -1));
    }
    ev.sort_by(|p, q| p.0.total_cmp(&q.0).then(q.1.cmp(&p.1)));
    let (mut cur, mut best) = (0i32, 0i32);
    for (_, d) in ev {
        cur += d;
        best = best.max(cur);
    }
    best as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::TourPoint;

    fn inst(v: &[(f64, f64, f64)]) -> Instance {
        Instance::new(
            v.iter()
                .enumerate()
                .map(|(i, &(x, a, b))| Segment::new(i, x, a, b))
                .collect(),
            3.0,
        )
        .unwrap()
    }

    #[test]
    fn straight_and_reflection() {
        let i = inst(&[(0.0, 0.0, 1.0), (1.0, 0.0, 2.0), (2.0, 1.0, 2.0)]);
        let t = Tour::closed(vec![
            TourPoint::on_segment(0.0, 0.5, 0),
            TourPoint::on_segment(1.0, 1.0, 1),
            TourPoint::on_segment(2.0, 1.5, 2),
        ]);
        let c = classify_points(&t, &i).unwrap();
        assert_eq!(c[1].unwrap().kind, PointKind::Straight);
        assert_eq!(c[0].unwrap().kind, PointKind::ReflectionRight);
        assert_eq!(c[2].unwrap().kind, PointKind::ReflectionLeft);
    }

    #[test]
    fn mirror_reflection_is_pure() {
        // Unfold b across x = 1 and aim at the image.
        let a = Point::new(3.0, 0.0);
        let b = Point::new(3.0, 2.0);
        let mb = Point::new(2.0 * 1.0 - b.x, b.y);
        let y = a.y + (mb.y - a.y) * (1.0 - a.x) / (mb.x - a.x);
        let s = Segment::new(0, 1.0, 0.0, 2.0);
        let c = classify_one(a, Point::new(1.0, y), b, &s, 1e-12);
        assert_eq!(c.kind, PointKind::ReflectionRight);
        assert!(c.pure);
        assert!(!c.at_tip);
        assert_eq!(c.vertical_sense, Some(Sense::Ascending));
    }

    #[test]
    fn vertical_leg_is_an_error() {
        let i = inst(&[(0.0, 0.0, 1.0), (0.0, 2.0, 3.0)]);
        let t = Tour::closed(vec![TourPoint::on_segment(0.0, 1.0, 0), TourPoint::on_segment(0.0, 2.0, 1)]);
        assert!(matches!(classify_points(&t, &i), Err(TspnError::VerticalLeg(..))));
    }

    #[test]
    fn cover_lines_single_and_h3() {
        let one = inst(&[(0.0, 0.0, 1.0), (1.0, 0.5, 1.5), (2.0, 0.2, 1.2)]);
        assert_eq!(build_cover_lines(&one).count, 1);
        let h3 = inst(&[(0.0, 0.0, 1.0), (1.0, 2.0, 3.0), (2.0, 1.0, 2.0)]);
        let c = build_cover_lines(&h3);
        assert!(c.count <= 2);
        for s in &h3.segments {
            assert!(s.contains_y(c.y(c.assignment[&s.id] as i64), 1e-12));
        }
    }

    #[test]
    fn strip_above_tour_is_empty() {
        let i = inst(&[(0.0, 0.0, 1.0), (1.0, 3.0, 4.0)]);
        let lines = build_cover_lines(&i);
        let t = Tour::from_points(&[Point::new(0.0, 3.5), Point::new(1.0, 3.6), Point::new(0.5, 3.8)], true);
        // Strip between C_1 and C_2 is [1, 2].
        assert!(restrict_to_strip(&t, 1, &lines).is_empty());
    }

    #[test]
    fn down_and_back_gives_two_ladders() {
        let i = inst(&[(0.0, 0.0, 1.0), (1.0, 3.0, 4.0)]);
        let lines = build_cover_lines(&i);
        let t = Tour::from_points(&[Point::new(0.0, 3.5), Point::new(0.5, 0.0), Point::new(1.0, 3.5)], true);
        let p = restrict_to_strip(&t, 1, &lines);
        assert_eq!(p.len(), 2);
        assert!(p.iter().all(|s| s.kind == StripPathKind::Ladder));
    }

    #[test]
    fn dip_gives_one_loop() {
        let i = inst(&[(0.0, 0.0, 1.0), (1.0, 3.0, 4.0)]);
        let lines = build_cover_lines(&i);
        let t = Tour::from_points(&[Point::new(0.0, 3.5), Point::new(0.5, 2.5), Point::new(1.0, 3.5)], true);
        let p = restrict_to_strip(&t, 0, &lines);
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].kind, StripPathKind::Loop);
    }

    #[test]
    fn no_reflections_no_sequences() {
        let t = Tour::closed(vec![]);
        assert!(pure_reflection_sequences(&t, &[]).is_empty());
    }
}
