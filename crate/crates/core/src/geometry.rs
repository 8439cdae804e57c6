//! Planar primitives: points, tours, cost, crossings, uncrossing and shadow.

use std::fmt;

/// Relative tolerance for incidence and collinearity tests.
pub const EPS_GEOM: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(self, o: Point) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// What a tour point is attached to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Binding {
    Segment(usize),
    Portal(usize),
    Dummy,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TourPoint {
    pub pos: Point,
    pub binding: Binding,
}

impl TourPoint {
    pub fn new(pos: Point, binding: Binding) -> Self {
        TourPoint { pos, binding }
    }

    pub fn on_segment(x: f64, y: f64, id: usize) -> Self {
        TourPoint::new(Point::new(x, y), Binding::Segment(id))
    }

    pub fn dummy(pos: Point) -> Self {
        TourPoint::new(pos, Binding::Dummy)
    }
}

/// A closed tour or an open path, as an ordered list of visited points.
#[derive(Clone, Debug, PartialEq)]
pub struct Tour {
    pub points: Vec<TourPoint>,
    pub closed: bool,
}

impl Tour {
    pub fn closed(points: Vec<TourPoint>) -> Self {
        Tour { points, closed: true }
    }

    pub fn open(points: Vec<TourPoint>) -> Self {
        Tour { points, closed: false }
    }

    pub fn from_points(pts: &[Point], closed: bool) -> Self {
        let points = pts.iter().map(|&p| TourPoint::dummy(p)).collect();
        Tour { points, closed }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn positions(&self) -> Vec<Point> {
        self.points.iter().map(|p| p.pos).collect()
    }

    pub fn leg_count(&self) -> usize {
        let n = self.points.len();
        match (n, self.closed) {
            (0 | 1, _) => 0,
            (_, true) => n,
            (_, false) => n - 1,
        }
    }

    /// Leg `i` runs from point `i` to point `i + 1` (wrapping when closed).
    pub fn leg(&self, i: usize) -> (Point, Point) {
        let n = self.points.len();
        (self.points[i].pos, self.points[(i + 1) % n].pos)
    }

    pub fn legs(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        (0..self.leg_count()).map(move |i| self.leg(i))
    }

    /// Drops consecutive duplicate positions (and a duplicated closing point).
    pub fn dedup(mut self) -> Self {
        let tol = EPS_GEOM * scale_of(self.points.iter().map(|p| p.pos));
        self.points
            .dedup_by(|b, a| a.pos.dist(b.pos) <= tol && merge_binding(a, b));
        if self.closed {
            while self.points.len() > 1 {
                let (f, l) = (self.points[0], *self.points.last().unwrap());
                if f.pos.dist(l.pos) > tol {
                    break;
                }
                if f.binding == Binding::Dummy {
                    self.points[0].binding = l.binding;
                }
                self.points.pop();
            }
        }
        self
    }

    /// Rotates a closed tour so its first point is the lexicographically
    /// smallest position; used to compare tours up to rotation.
    pub fn rotated_canonical(&self) -> Tour {
        if !self.closed || self.points.is_empty() {
            return self.clone();
        }
        let start = (0..self.points.len())
            .min_by(|&a, &b| {
                let (p, q) = (self.points[a].pos, self.points[b].pos);
                p.x.total_cmp(&q.x).then(p.y.total_cmp(&q.y))
            })
            .unwrap();
        let mut points = self.points[start..].to_vec();
        points.extend_from_slice(&self.points[..start]);
        Tour::closed(points)
    }
}

// Keeps the more informative binding when two coincident points merge.
fn merge_binding(keep: &mut TourPoint, drop: &TourPoint) -> bool {
    if keep.binding == Binding::Dummy {
        keep.binding = drop.binding;
    }
    true
}

pub(crate) fn scale_of(pts: impl Iterator<Item = Point>) -> f64 {
    let mut s: f64 = 1.0;
    for p in pts {
        s = s.max(p.x.abs()).max(p.y.abs());
    }
    s
}

pub fn tour_cost(tour: &Tour) -> f64 {
    tour.legs().map(|(a, b)| a.dist(b)).sum()
}

pub fn path_cost(pts: &[Point]) -> f64 {
    pts.windows(2).map(|w| w[0].dist(w[1])).sum()
}

/// Signed distance of `c` from the line through `a` and `b` (positive on the left).
fn side(a: Point, b: Point, c: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len = dx.hypot(dy);
    if len == 0.0 {
        return 0.0;
    }
    (dx * (c.y - a.y) - dy * (c.x - a.x)) / len
}

/// True when the two segments share interior points: a proper transversal
/// crossing or a collinear overlap of positive length. Endpoint touches
/// do not count.
pub fn legs_cross(a: Point, b: Point, c: Point, d: Point, tol: f64) -> bool {
    if a.dist(b) <= tol || c.dist(d) <= tol {
        return false;
    }
    let d1 = side(a, b, c);
    let d2 = side(a, b, d);
    let d3 = side(c, d, a);
    let d4 = side(c, d, b);
    if d1.abs() <= tol && d2.abs() <= tol {
        // Collinear: project on the longer direction.
        let (ux, uy) = (b.x - a.x, b.y - a.y);
        let len = ux.hypot(uy);
        let t = |p: Point| ((p.x - a.x) * ux + (p.y - a.y) * uy) / len;
        let (c0, c1) = (t(c).min(t(d)), t(c).max(t(d)));
        let overlap = c1.min(len) - c0.max(0.0);
        return overlap > tol;
    }
    let strict = |u: f64, v: f64| (u > tol && v < -tol) || (u < -tol && v > tol);
    strict(d1, d2) && strict(d3, d4)
}

fn legs_adjacent(i: usize, j: usize, m: usize, closed: bool) -> bool {
    let (i, j) = (i.min(j), i.max(j));
    j == i + 1 || (closed && i == 0 && j == m - 1)
}

/// First pair of non-adjacent legs (0-based, `i < j`) that cross.
pub fn is_self_crossing(tour: &Tour) -> Option<(usize, usize)> {
    let m = tour.leg_count();
    let tol = EPS_GEOM * scale_of(tour.points.iter().map(|p| p.pos));
    for i in 0..m {
        let (a, b) = tour.leg(i);
        for j in i + 1..m {
            if legs_adjacent(i, j, m, tour.closed) {
                continue;
            }
            let (c, d) = tour.leg(j);
            if legs_cross(a, b, c, d, tol) {
                return Some((i, j));
            }
        }
    }
    None
}

/// Returned when `uncross` cannot remove every crossing: either the
/// iteration guard tripped or a collinear overlap admits no strictly
/// shorter 2-opt rewiring. `partial` is the best tour reached.
#[derive(Clone, Debug)]
pub struct UncrossStalled {
    pub partial: Tour,
    pub iterations: usize,
}

impl fmt::Display for UncrossStalled {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "uncross stalled after {} iterations", self.iterations)
    }
}

/// Repeatedly replaces a crossing leg pair (p,p'),(q,q') by (p,q),(p',q')
/// (a 2-opt reversal) while that strictly shortens the tour.
pub fn uncross(tour: &Tour) -> Result<Tour, UncrossStalled> {
    let mut t = tour.clone();
    let n = t.points.len();
    let guard = (n * n).max(4);
    let tol = EPS_GEOM * scale_of(t.points.iter().map(|p| p.pos));
    let mut iterations = 0;
    loop {
        let m = t.leg_count();
        let mut found_crossing = false;
        let mut applied = false;
        'search: for i in 0..m {
            let (a, b) = t.leg(i);
            for j in i + 1..m {
                if legs_adjacent(i, j, m, t.closed) {
                    continue;
                }
                let (c, d) = t.leg(j);
                if !legs_cross(a, b, c, d, tol) {
                    continue;
                }
                found_crossing = true;
                let delta = a.dist(c) + b.dist(d) - a.dist(b) - c.dist(d);
                if delta < -tol {
                    t.points[i + 1..=j].reverse();
                    applied = true;
                    break 'search;
                }
            }
        }
        if !found_crossing {
            return Ok(t);
        }
        if !applied {
            return Err(UncrossStalled { partial: t, iterations });
        }
        iterations += 1;
        if iterations > guard {
            return Err(UncrossStalled { partial: t, iterations });
        }
    }
}

/// Piecewise-constant count of legs stabbed by a vertical line.
#[derive(Clone, Debug, PartialEq)]
pub struct ShadowProfile {
    pub breakpoints: Vec<f64>,
    pub counts: Vec<usize>,
}

impl ShadowProfile {
    /// Shadow at `x`; on a breakpoint this is the larger adjacent count.
    pub fn at(&self, x: f64) -> usize {
        let k = self.breakpoints.partition_point(|&b| b < x);
        if k < self.breakpoints.len() && self.breakpoints[k] == x {
            self.counts[k].max(self.counts[k + 1])
        } else {
            self.counts[k]
        }
    }

    /// Maximum shadow over the closed interval `[a, b]`.
    pub fn max_over(&self, a: f64, b: f64) -> usize {
        if a > b {
            return 0;
        }
        let mut best = self.at(a).max(self.at(b));
        let bp = &self.breakpoints;
        // Interval k is (bp[k-1], bp[k]) with the unbounded ends at 0 and len.
        for k in 0..self.counts.len() {
            let lo = if k == 0 { f64::NEG_INFINITY } else { bp[k - 1] };
            let hi = if k == bp.len() { f64::INFINITY } else { bp[k] };
            if lo < b && hi > a {
                best = best.max(self.counts[k]);
            }
        }
        best
    }

    pub fn max(&self) -> usize {
        self.counts.iter().copied().max().unwrap_or(0)
    }
}

/// Shadow profile of a set of paths; with a window, counts outside it are 0
/// and the window ends become breakpoints.
pub fn shadow_profile(paths: &[Tour], window: Option<(f64, f64)>) -> ShadowProfile {
    let mut spans: Vec<(f64, f64)> = Vec::new();
    for p in paths {
        for (a, b) in p.legs() {
            spans.push((a.x.min(b.x), a.x.max(b.x)));
        }
    }
    if let Some((lo, hi)) = window {
        spans = spans
            .into_iter()
            .filter(|&(a, b)| b > lo && a < hi)
            .map(|(a, b)| (a.max(lo), b.min(hi)))
            .collect();
    }
    let mut bps: Vec<f64> = spans.iter().flat_map(|&(a, b)| [a, b]).collect();
    if let Some((lo, hi)) = window {
        bps.push(lo);
        bps.push(hi);
    }
    bps.sort_by(f64::total_cmp);
    bps.dedup();
    let mut mins: Vec<f64> = spans.iter().map(|s| s.0).collect();
    let mut maxs: Vec<f64> = spans.iter().map(|s| s.1).collect();
    mins.sort_by(f64::total_cmp);
    maxs.sort_by(f64::total_cmp);
    let mut counts = Vec::with_capacity(bps.len() + 1);
    counts.push(0);
    for &b in &bps {
        let started = mins.partition_point(|&v| v <= b);
        let ended = maxs.partition_point(|&v| v <= b);
        counts.push(started - ended);
    }
    *counts.last_mut().unwrap() = 0;
    ShadowProfile {
        breakpoints: bps,
        counts,
    }
}

pub fn shadow_max(paths: &[Tour], interval: (f64, f64)) -> usize {
    shadow_profile(paths, None).max_over(interval.0, interval.1)
}

/// Naive count of legs whose closed x-span contains `x`.
pub fn stabbing_count(paths: &[Tour], x: f64) -> usize {
    paths
        .iter()
        .flat_map(|p| p.legs())
        .filter(|(a, b)| a.x.min(b.x) <= x && x <= a.x.max(b.x))
        .count()
}

/// Distance from `p` to the closed segment `ab`.
pub fn point_segment_dist(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let l2 = dx * dx + dy * dy;
    if l2 == 0.0 {
        return p.dist(a);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / l2).clamp(0.0, 1.0);
    p.dist(Point::new(a.x + t * dx, a.y + t * dy))
}

/// Distance between the closed segments `ab` and `cd`.
pub fn segment_segment_dist(a: Point, b: Point, c: Point, d: Point) -> f64 {
    if legs_cross(a, b, c, d, 0.0) {
        return 0.0;
    }
    let s1 = side(a, b, c);
    let s2 = side(a, b, d);
    let s3 = side(c, d, a);
    let s4 = side(c, d, b);
    if s1 * s2 <= 0.0 && s3 * s4 <= 0.0 && a.dist(b) > 0.0 && c.dist(d) > 0.0 {
        return 0.0;
    }
    point_segment_dist(a, c, d)
        .min(point_segment_dist(b, c, d))
        .min(point_segment_dist(c, a, b))
        .min(point_segment_dist(d, a, b))
}

/// Axis-parallel square with lower-left corner `(x0, y0)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Square {
    pub x0: f64,
    pub y0: f64,
    pub side: f64,
}

impl Square {
    pub fn new(x0: f64, y0: f64, side: f64) -> Self {
        Square { x0, y0, side }
    }

    pub fn x1(&self) -> f64 {
        self.x0 + self.side
    }

    pub fn y1(&self) -> f64 {
        self.y0 + self.side
    }

    pub fn contains(&self, p: Point, tol: f64) -> bool {
        p.x >= self.x0 - tol && p.x <= self.x1() + tol && p.y >= self.y0 - tol && p.y <= self.y1() + tol
    }

    pub fn on_boundary(&self, p: Point, tol: f64) -> bool {
        self.contains(p, tol)
            && ((p.x - self.x0).abs() <= tol
                || (p.x - self.x1()).abs() <= tol
                || (p.y - self.y0).abs() <= tol
                || (p.y - self.y1()).abs() <= tol)
    }

    /// Children in the order lower-left, lower-right, upper-left, upper-right.
    pub fn quarters(&self) -> [Square; 4] {
        let h = self.side / 2.0;
        [
            Square::new(self.x0, self.y0, h),
            Square::new(self.x0 + h, self.y0, h),
            Square::new(self.x0, self.y0 + h, h),
            Square::new(self.x0 + h, self.y0 + h, h),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(pts: &[(f64, f64)], closed: bool) -> Tour {
        let v: Vec<Point> = pts.iter().map(|&(x, y)| Point::new(x, y)).collect();
        Tour::from_points(&v, closed)
    }

    #[test]
    fn cost_examples() {
        assert_eq!(tour_cost(&t(&[(0.0, 0.0)], true)), 0.0);
        let rect = t(&[(0.0, 0.0), (2.0, 0.0), (2.0, 1.0), (0.0, 1.0)], true);
        assert_eq!(tour_cost(&rect), 6.0);
        assert_eq!(tour_cost(&t(&[(0.0, 0.0), (3.0, 4.0)], true)), 10.0);
        assert_eq!(tour_cost(&t(&[(0.0, 0.0), (3.0, 4.0)], false)), 5.0);
    }

    #[test]
    fn bowtie_crosses_and_uncrosses() {
        let bow = t(&[(0.0, 0.0), (1.0, 1.0), (1.0, 0.0), (0.0, 1.0)], true);
        assert_eq!(is_self_crossing(&bow), Some((0, 2)));
        let fixed = uncross(&bow).unwrap();
        assert_eq!(is_self_crossing(&fixed), None);
        assert!((tour_cost(&fixed) - 4.0).abs() < 1e-12);
        assert!(tour_cost(&fixed) < tour_cost(&bow));
    }

    #[test]
    fn convex_quad_is_fixed_point() {
        let q = t(&[(0.0, 0.0), (2.0, 0.0), (3.0, 2.0), (0.0, 1.0)], true);
        assert_eq!(is_self_crossing(&q), None);
        assert_eq!(uncross(&q).unwrap(), q);
    }

    #[test]
    fn collinear_overlap_is_a_crossing() {
        let z = t(&[(0.0, 0.0), (2.0, 0.0), (1.0, 0.0), (3.0, 0.0)], false);
        assert_eq!(is_self_crossing(&z), Some((0, 2)));
        let u = uncross(&z).unwrap();
        assert!(tour_cost(&u) < tour_cost(&z));
    }

    #[test]
    fn shadow_basics() {
        let h = t(&[(0.0, 0.0), (5.0, 0.0)], false);
        let p = shadow_profile(std::slice::from_ref(&h), None);
        assert_eq!(p.at(2.5), 1);
        assert_eq!(p.at(-1.0), 0);
        let rect = t(&[(0.0, 0.0), (2.0, 0.0), (2.0, 1.0), (0.0, 1.0)], true);
        let p = shadow_profile(std::slice::from_ref(&rect), None);
        assert_eq!(p.at(1.0), 2);
        assert_eq!(shadow_max(&[rect], (0.0, 2.0)), 2);
        assert_eq!(shadow_max(&[], (0.0, 1.0)), 0);
    }

    #[test]
    fn windowed_profile_is_clipped() {
        let h = t(&[(0.0, 0.0), (5.0, 0.0), (5.0, 1.0), (0.0, 1.0)], true);
        let p = shadow_profile(&[h], Some((1.0, 2.0)));
        assert_eq!(p.at(1.5), 2);
        assert_eq!(p.at(3.0), 0);
        assert_eq!(p.at(0.5), 0);
    }

    #[test]
    fn dedup_merges_bindings() {
        let mut tour = t(&[(0.0, 0.0), (0.0, 0.0), (1.0, 0.0), (0.0, 0.0)], true);
        tour.points[1].binding = Binding::Segment(3);
        let d = tour.dedup();
        assert_eq!(d.len(), 2);
        assert_eq!(d.points[0].binding, Binding::Segment(3));
    }
}
