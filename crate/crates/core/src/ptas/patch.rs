//! Reducing the crossings of a closed tour with an axis-parallel piece of a
//! dissecting line to at most two.
//!
//! The tour is cut at its crossing points into arcs. On each side of the
//! line the piece is walked once through all crossing points, interior
//! points are paired up with a second copy of the short piece between them,
//! and the resulting Eulerian multigraph (arcs plus these pieces plus a
//! link at the first crossing) is traversed in one circuit. Only the link
//! changes sides on the piece, so at most two crossings remain; the added
//! length is at most six times the piece length.

use crate::geometry::{Point, Tour, TourPoint};

/// A horizontal or vertical piece from `a` to `b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinePiece {
    pub a: Point,
    pub b: Point,
}

impl LinePiece {
    pub fn new(a: Point, b: Point) -> Self {
        LinePiece { a, b }
    }

    fn vertical(&self) -> bool {
        (self.a.x - self.b.x).abs() <= (self.a.y - self.b.y).abs()
    }

    pub fn length(&self) -> f64 {
        self.a.dist(self.b)
    }

    /// Signed side of `p`: -1, 0 or 1.
    fn side(&self, p: Point, tol: f64) -> i8 {
        let d = if self.vertical() { p.x - self.a.x } else { p.y - self.a.y };
        if d > tol {
            1
        } else if d < -tol {
            -1
        } else {
            0
        }
    }

    /// Coordinate along the piece.
    fn along(&self, p: Point) -> f64 {
        if self.vertical() {
            p.y
        } else {
            p.x
        }
    }

    fn span(&self) -> (f64, f64) {
        let (s, t) = (self.along(self.a), self.along(self.b));
        (s.min(t), s.max(t))
    }

    fn at(&self, s: f64) -> Point {
        if self.vertical() {
            Point::new(self.a.x, s)
        } else {
            Point::new(s, self.a.y)
        }
    }
}

fn tolerance(tour: &Tour, piece: &LinePiece) -> f64 {
    let mut s: f64 = 1.0;
    for p in tour.points.iter().map(|p| p.pos).chain([piece.a, piece.b]) {
        s = s.max(p.x.abs()).max(p.y.abs());
    }
    1e-9 * s
}

/// Sides of the tour points with points on the line inheriting the side of
/// the nearest earlier point off it.
fn resolved_sides(tour: &Tour, piece: &LinePiece, tol: f64) -> Option<Vec<i8>> {
    let raw: Vec<i8> = tour.points.iter().map(|p| piece.side(p.pos, tol)).collect();
    let start = raw.iter().position(|&s| s != 0)?;
    let n = raw.len();
    let mut out = raw.clone();
    let mut last = raw[start];
    for k in 0..n {
        let i = (start + k) % n;
        if raw[i] == 0 {
            out[i] = last;
        } else {
            last = raw[i];
        }
    }
    Some(out)
}

/// A place where the tour passes from one side of the piece to the other:
/// after tour point `leg`, at `pos`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Crossing {
    pub leg: usize,
    pub pos: Point,
}

/// Crossings of a closed tour with the piece, in tour order. A stretch
/// running along the line counts once, where it leaves the line.
pub fn piece_crossings(tour: &Tour, piece: &LinePiece) -> Vec<Crossing> {
    let n = tour.points.len();
    if n < 2 {
        return vec![];
    }
    let tol = tolerance(tour, piece);
    let Some(sides) = resolved_sides(tour, piece, tol) else {
        return vec![];
    };
    let (lo, hi) = piece.span();
    let mut out = Vec::new();
    for i in 0..n {
        let j = (i + 1) % n;
        if sides[i] == sides[j] {
            continue;
        }
        let (p, q) = (tour.points[i].pos, tour.points[j].pos);
        let pos = if piece.side(p, tol) == 0 {
            p
        } else if piece.side(q, tol) == 0 {
            q
        } else {
            let (dp, dq) = if piece.vertical() { (p.x - piece.a.x, q.x - piece.a.x) } else { (p.y - piece.a.y, q.y - piece.a.y) };
            let t = dp / (dp - dq);
            Point::new(p.x + t * (q.x - p.x), p.y + t * (q.y - p.y))
        };
        let s = piece.along(pos);
        if s >= lo - tol && s <= hi + tol {
            out.push(Crossing { leg: i, pos: piece.at(s) });
        }
    }
    out
}

struct Arc {
    points: Vec<TourPoint>,
    /// Crossing index and side at each end.
    from: (usize, i8),
    to: (usize, i8),
}

/// Rewires `tour` so it crosses `piece` at most twice.
pub fn patch(tour: &Tour, piece: &LinePiece) -> Tour {
    let cr = piece_crossings(tour, piece);
    if cr.len() <= 2 {
        return tour.clone();
    }
    let tol = tolerance(tour, piece);
    let sides = resolved_sides(tour, piece, tol).unwrap();
    let n = tour.points.len();
    let k = cr.len();

    // Arcs between consecutive crossings.
    let mut arcs = Vec::with_capacity(k);
    for c in 0..k {
        let d = (c + 1) % k;
        let mut pts = vec![TourPoint::dummy(cr[c].pos)];
        let mut i = (cr[c].leg + 1) % n;
        loop {
            pts.push(tour.points[i]);
            if i == cr[d].leg {
                break;
            }
            i = (i + 1) % n;
        }
        pts.push(TourPoint::dummy(cr[d].pos));
        arcs.push(Arc {
            points: pts,
            from: (c, sides[(cr[c].leg + 1) % n]),
            to: (d, sides[cr[d].leg]),
        });
    }

    // Vertices: crossing c on side -1 is 2c, on side +1 is 2c+1.
    let vid = |c: usize, s: i8| 2 * c + usize::from(s > 0);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| piece.along(cr[a].pos).total_cmp(&piece.along(cr[b].pos)).then(a.cmp(&b)));

    // Edges: (u, v, polyline from u to v).
    let mut edges: Vec<(usize, usize, Vec<TourPoint>)> = arcs
        .into_iter()
        .map(|a| (vid(a.from.0, a.from.1), vid(a.to.0, a.to.1), a.points))
        .collect();
    let straight = |a: usize, b: usize| vec![TourPoint::dummy(cr[a].pos), TourPoint::dummy(cr[b].pos)];
    for s in [-1i8, 1] {
        for w in order.windows(2) {
            edges.push((vid(w[0], s), vid(w[1], s), straight(w[0], w[1])));
        }
        // Interior crossings have odd degree; pair neighbours in order.
        let mut deg = vec![0usize; 2 * k];
        for e in &edges {
            deg[e.0] += 1;
            deg[e.1] += 1;
        }
        let odd: Vec<usize> = order.iter().copied().filter(|&c| deg[vid(c, s)] % 2 == 1).collect();
        for pair in odd.chunks(2) {
            // Walk the piece between the two, doubling each stretch. With an
            // odd count the last one walks back to the first crossing.
            let (a, b) = match *pair {
                [a, b] => (a, b),
                [b] => (order[0], b),
                _ => unreachable!(),
            };
            let ia = order.iter().position(|&c| c == a).unwrap();
            let ib = order.iter().position(|&c| c == b).unwrap();
            for w in order[ia..=ib].windows(2) {
                edges.push((vid(w[0], s), vid(w[1], s), straight(w[0], w[1])));
            }
        }
    }
    let first = order[0];
    let odd_first = edges.iter().filter(|e| e.0 == vid(first, -1) || e.1 == vid(first, -1)).count() % 2 == 1;
    for _ in 0..if odd_first { 1 } else { 2 } {
        edges.push((vid(first, -1), vid(first, 1), straight(first, first)));
    }

    let circuit = euler_circuit(2 * k, &edges, vid(first, -1));
    let mut pts: Vec<TourPoint> = Vec::new();
    for (e, fwd) in circuit {
        let mut seg = edges[e].2.clone();
        if !fwd {
            seg.reverse();
        }
        for p in seg {
            if pts.last().map_or(true, |l: &TourPoint| l.pos != p.pos) {
                pts.push(p);
            }
        }
    }
    if pts.len() > 1 && pts[0].pos == pts[pts.len() - 1].pos {
        pts.pop();
    }
    Tour::closed(pts)
}

/// Hierholzer's algorithm; returns `(edge, forward)` in circuit order.
pub(crate) fn euler_circuit<T>(nv: usize, edges: &[(usize, usize, T)], start: usize) -> Vec<(usize, bool)> {
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nv];
    for (i, e) in edges.iter().enumerate() {
        adj[e.0].push((i, e.1));
        adj[e.1].push((i, e.0));
    }
    let mut used = vec![false; edges.len()];
    let mut ptr = vec![0usize; nv];
    // Stack of (vertex, edge taken to reach it, forward).
    let mut stack: Vec<(usize, Option<(usize, bool)>)> = vec![(start, None)];
    let mut out = Vec::new();
    while let Some(&(v, via)) = stack.last() {
        let mut advanced = false;
        while ptr[v] < adj[v].len() {
            let (e, w) = adj[v][ptr[v]];
            ptr[v] += 1;
            if used[e] {
                continue;
            }
            used[e] = true;
            let fwd = edges[e].0 == v;
            stack.push((w, Some((e, fwd))));
            advanced = true;
            break;
        }
        if !advanced {
            stack.pop();
            if let Some(x) = via {
                out.push(x);
            }
        }
    }
    out.reverse();
    out
}
