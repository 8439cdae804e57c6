//! The outer dynamic program over the dissection.
//!
//! A configuration of a square lists the portal pairs joined by the tour's
//! pieces inside it and the required portals on its boundary those pieces
//! visit. Candidates come from portal-respecting seed tours: every seed
//! induces one configuration per square it touches. Leaves are priced by
//! the inner DP; a parent combines one candidate per child, gluing pieces at
//! shared portals, and keeps the cheapest combination for each of its own
//! candidates. The root's candidate is a single closed tour.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::error::{Result, TspnError};
use crate::geometry::{path_cost, tour_cost, Binding, Point, Tour, TourPoint};
use crate::inner_dp::{inner_dp_solve, InnerCaps, LeafProblem};
use crate::instance::{Instance, Segment};

use super::dissection::{Cell, Key, QuadTree};
use super::patch::euler_circuit;

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SquareConfig {
    /// Unordered portal pairs, each stored smaller key first, sorted.
    pub pairs: Vec<(Key, Key)>,
    /// Required portals on the boundary visited without leaving the square.
    pub visits: Vec<Key>,
    /// The whole tour lies in this square.
    pub closed: bool,
}

impl SquareConfig {
    pub fn new(pairs: Vec<(Key, Key)>, visits: Vec<Key>, closed: bool) -> Self {
        let mut pairs: Vec<(Key, Key)> = pairs.into_iter().map(|(a, b)| if a <= b { (a, b) } else { (b, a) }).collect();
        pairs.sort();
        let mut visits = visits;
        visits.sort();
        visits.dedup();
        SquareConfig { pairs, visits, closed }
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty() && self.visits.is_empty() && !self.closed
    }
}

/// A closed tour whose legs each lie in one leaf, every leg end on a
/// dissecting line being a portal.
#[derive(Clone, Debug)]
pub struct SnappedTour {
    pub points: Vec<TourPoint>,
    pub keys: Vec<Option<Key>>,
    /// Leaf of the leg from point `i` to point `i + 1`.
    pub leaves: Vec<(i64, i64)>,
}

fn key_of(p: Point, required: &[(Key, Point)], tol: f64) -> Option<Key> {
    required.iter().find(|(_, q)| q.dist(p) <= tol).map(|(k, _)| *k)
}

#[derive(Clone, Copy)]
enum Cut {
    V(i64),
    H(i64),
    Corner(i64, i64),
}

/// Moves every crossing of a dissecting line to the nearest portal of that
/// line. Tour vertices on a line must be required portals.
pub fn portal_respecting(tour: &Tour, qt: &QuadTree, required: &[(Key, Point)]) -> Result<SnappedTour> {
    let n = tour.points.len();
    if n == 0 {
        return Err(TspnError::Empty);
    }
    let tol = 1e-9 * qt.root.side;
    let mut pts = Vec::new();
    let mut keys = Vec::new();
    let mut leaves = Vec::new();
    if n == 1 {
        let p = tour.points[0];
        return Ok(SnappedTour {
            points: vec![p],
            keys: vec![key_of(p.pos, required, tol)],
            leaves: vec![qt.leaf_at(p.pos)],
        });
    }
    let base = qt.base_side;
    for i in 0..n {
        let p = tour.points[i].pos;
        let q = tour.points[(i + 1) % n].pos;
        pts.push(tour.points[i]);
        keys.push(key_of(p, required, tol));
        let mut cuts: Vec<(f64, Cut)> = Vec::new();
        let mut scan = |a: f64, b: f64, origin: f64, vertical: bool| {
            if (b - a).abs() <= tol {
                return;
            }
            let (lo, hi) = (a.min(b), a.max(b));
            let k0 = (((lo - origin) / base).ceil() as i64).max(1);
            let k1 = (((hi - origin) / base).floor() as i64).min(qt.cells() - 1);
            for k in k0..=k1 {
                let c = origin + k as f64 * base;
                if c <= lo + tol || c >= hi - tol {
                    continue;
                }
                let t = (c - a) / (b - a);
                cuts.push((t, if vertical { Cut::V(k) } else { Cut::H(k) }));
            }
        };
        scan(p.x, q.x, qt.root.x0, true);
        scan(p.y, q.y, qt.root.y0, false);
        cuts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, Cut)> = Vec::new();
        for (t, c) in cuts {
            if let Some(last) = merged.last_mut() {
                if (t - last.0).abs() <= 1e-12 {
                    if let (Cut::V(kv), Cut::H(kh)) | (Cut::H(kh), Cut::V(kv)) = (last.1, c) {
                        last.1 = Cut::Corner(kv, kh);
                        continue;
                    }
                }
            }
            merged.push((t, c));
        }
        let at = |t: f64| Point::new(p.x + t * (q.x - p.x), p.y + t * (q.y - p.y));
        let mut bounds = vec![0.0];
        bounds.extend(merged.iter().map(|c| c.0));
        bounds.push(1.0);
        leaves.push(qt.leaf_at(at(0.5 * (bounds[0] + bounds[1]))));
        for (j, &(t, c)) in merged.iter().enumerate() {
            let key = match c {
                Cut::V(k) => qt.snap_vertical(k, at(t).y),
                Cut::H(k) => qt.snap_horizontal(k, at(t).x),
                Cut::Corner(kv, kh) => (kv * qt.m, kh * qt.m),
            };
            pts.push(TourPoint::dummy(qt.point(key)));
            keys.push(Some(key));
            leaves.push(qt.leaf_at(at(0.5 * (bounds[j + 1] + bounds[j + 2]))));
        }
    }
    // Drop zero-length legs.
    let mut out = SnappedTour {
        points: Vec::new(),
        keys: Vec::new(),
        leaves: Vec::new(),
    };
    for i in 0..pts.len() {
        if let Some(last) = out.points.last() {
            if last.pos == pts[i].pos {
                let j = out.points.len() - 1;
                out.leaves[j] = leaves[i];
                out.keys[j] = out.keys[j].or(keys[i]);
                if out.points[j].binding == Binding::Dummy {
                    out.points[j].binding = pts[i].binding;
                }
                continue;
            }
        }
        out.points.push(pts[i]);
        out.keys.push(keys[i]);
        out.leaves.push(leaves[i]);
    }
    while out.points.len() > 1 && out.points[0].pos == out.points[out.points.len() - 1].pos {
        let last = out.points.len() - 1;
        out.keys[0] = out.keys[0].or(out.keys[last]);
        out.points.pop();
        out.keys.pop();
        out.leaves.pop();
    }
    Ok(out)
}

/// Configurations a snapped tour induces, level by level.
#[derive(Clone, Debug, Default)]
pub struct Induced {
    pub configs: Vec<BTreeMap<Cell, SquareConfig>>,
    /// The tour's pieces inside each leaf, portal to portal (or one cycle).
    pub leaf_pieces: BTreeMap<Cell, Vec<Vec<TourPoint>>>,
    /// Largest number of crossings through one side of one square.
    pub max_side_crossings: usize,
}

pub fn induced_configs(st: &SnappedTour, qt: &QuadTree, required: &BTreeSet<Key>) -> Result<Induced> {
    let n = st.points.len();
    let mut out = Induced::default();
    for level in 0..=qt.depth {
        let cell: Vec<Cell> = st.leaves.iter().map(|&l| qt.ancestor(l, level)).collect();
        let mut map: BTreeMap<Cell, (Vec<(Key, Key)>, Vec<Key>)> = BTreeMap::new();
        let mut pieces: BTreeMap<Cell, Vec<Vec<TourPoint>>> = BTreeMap::new();
        let mut side_count: BTreeMap<(Cell, u8), usize> = BTreeMap::new();
        let start = (0..n).find(|&i| cell[i] != cell[(i + n - 1) % n]);
        match start {
            None => {
                let c = cell[0];
                let visits = st
                    .keys
                    .iter()
                    .flatten()
                    .filter(|k| required.contains(k) && qt.on_boundary(c, **k))
                    .copied()
                    .collect();
                out.configs.push(BTreeMap::from([(c, SquareConfig::new(vec![], visits, true))]));
                if level == qt.depth {
                    out.leaf_pieces.insert(c, vec![st.points.clone()]);
                }
                continue;
            }
            Some(start) => {
                let mut i = start;
                let mut walked = 0;
                while walked < n {
                    let c = cell[i];
                    let first = i;
                    let mut len = 0;
                    while walked < n && cell[(first + len) % n] == c {
                        len += 1;
                        walked += 1;
                    }
                    let last = (first + len) % n;
                    let (Some(a), Some(b)) = (st.keys[first], st.keys[last]) else {
                        return Err(TspnError::Internal(format!("piece in {c:?} does not end at portals")));
                    };
                    let entry = map.entry(c).or_default();
                    entry.0.push((a, b));
                    for d in 1..len {
                        if let Some(k) = st.keys[(first + d) % n] {
                            if required.contains(&k) && qt.on_boundary(c, k) {
                                entry.1.push(k);
                            }
                        }
                    }
                    for k in [a, b] {
                        let s = qt.sides_of(c, k);
                        for bit in 0..4 {
                            if s & (1 << bit) != 0 {
                                *side_count.entry((c, bit)).or_default() += 1;
                            }
                        }
                    }
                    if level == qt.depth {
                        let poly = (0..=len).map(|d| st.points[(first + d) % n]).collect();
                        pieces.entry(c).or_default().push(poly);
                    }
                    i = last;
                }
            }
        }
        out.max_side_crossings = out.max_side_crossings.max(side_count.values().copied().max().unwrap_or(0));
        out.configs.push(
            map.into_iter()
                .map(|(c, (p, v))| (c, SquareConfig::new(p, v, false)))
                .collect(),
        );
        if level == qt.depth {
            out.leaf_pieces = pieces;
        }
    }
    Ok(out)
}

fn perfect_matchings(ends: &[usize], child: &[usize]) -> Vec<Vec<(usize, usize)>> {
    if ends.is_empty() {
        return vec![vec![]];
    }
    let a = ends[0];
    let mut out = Vec::new();
    for j in 1..ends.len() {
        let b = ends[j];
        if child[a] == child[b] {
            continue;
        }
        let rest: Vec<usize> = ends[1..].iter().copied().filter(|&e| e != b).collect();
        for mut m in perfect_matchings(&rest, child) {
            m.push((a, b));
            out.push(m);
        }
    }
    out
}

const MAX_GLUINGS: usize = 512;

/// Every parent configuration obtainable by gluing the children's pieces.
pub fn combine(qt: &QuadTree, parent: Cell, kids: [(Cell, &SquareConfig); 4], required: &BTreeSet<Key>) -> Vec<SquareConfig> {
    let on_parent = |k: &Key| qt.on_boundary(parent, *k);
    let kid_visits: Vec<Key> = kids.iter().flat_map(|(_, c)| c.visits.iter().copied()).collect();

    // Required portals on the inner cross must be touched by some piece.
    let mut touched: BTreeSet<Key> = kid_visits.iter().copied().collect();
    for (_, c) in &kids {
        for &(a, b) in &c.pairs {
            touched.insert(a);
            touched.insert(b);
        }
    }
    if required.iter().any(|k| qt.on_inner_cross(parent, *k) && !touched.contains(k)) {
        return vec![];
    }

    if let Some(ci) = kids.iter().position(|(_, c)| c.closed) {
        if kids.iter().enumerate().any(|(i, (_, c))| i != ci && !c.is_empty()) {
            return vec![];
        }
        let visits = kids[ci].1.visits.iter().copied().filter(on_parent).collect();
        return vec![SquareConfig::new(vec![], visits, true)];
    }

    // Ends 2r and 2r+1 belong to piece r.
    let mut end_key = Vec::new();
    let mut end_child = Vec::new();
    for (ci, (_, c)) in kids.iter().enumerate() {
        for &(a, b) in &c.pairs {
            end_key.extend([a, b]);
            end_child.extend([ci, ci]);
        }
    }
    let mut groups: BTreeMap<Key, Vec<usize>> = BTreeMap::new();
    for (e, k) in end_key.iter().enumerate() {
        groups.entry(*k).or_default().push(e);
    }
    // Per key: (ends left open, glued pairs).
    let mut options: Vec<Vec<(Vec<usize>, Vec<(usize, usize)>)>> = Vec::new();
    for (k, ends) in &groups {
        let mut opts = Vec::new();
        if on_parent(k) {
            if ends.len() > 8 {
                return vec![];
            }
            for mask in 0u32..(1 << ends.len()) {
                let open: Vec<usize> = (0..ends.len()).filter(|i| mask & (1 << i) != 0).map(|i| ends[i]).collect();
                let rest: Vec<usize> = (0..ends.len()).filter(|i| mask & (1 << i) == 0).map(|i| ends[i]).collect();
                if rest.len() % 2 == 1 {
                    continue;
                }
                for m in perfect_matchings(&rest, &end_child) {
                    opts.push((open.clone(), m));
                }
            }
        } else {
            for m in perfect_matchings(ends, &end_child) {
                opts.push((vec![], m));
            }
        }
        if opts.is_empty() {
            return vec![];
        }
        options.push(opts);
    }

    let keys: Vec<Key> = groups.keys().copied().collect();
    let ne = end_key.len();
    let mut out: BTreeSet<SquareConfig> = BTreeSet::new();
    let mut choice = vec![0usize; options.len()];
    let mut tried = 0;
    loop {
        tried += 1;
        const OPEN: usize = usize::MAX;
        let mut mate = vec![OPEN; ne];
        let mut glued_at: Vec<Key> = Vec::new();
        for (g, &c) in choice.iter().enumerate() {
            let (_, glue) = &options[g][c];
            for &(a, b) in glue {
                mate[a] = b;
                mate[b] = a;
            }
            if !glue.is_empty() {
                glued_at.push(keys[g]);
            }
        }
        let mut seen = vec![false; ne / 2];
        let mut pairs = Vec::new();
        for e in 0..ne {
            if mate[e] != OPEN || seen[e / 2] {
                continue;
            }
            let mut cur = e;
            loop {
                seen[cur / 2] = true;
                let other = cur ^ 1;
                if mate[other] == OPEN {
                    pairs.push((end_key[e], end_key[other]));
                    break;
                }
                cur = mate[other];
            }
        }
        let mut cycles = 0;
        for r in 0..ne / 2 {
            if seen[r] {
                continue;
            }
            cycles += 1;
            let mut cur = 2 * r;
            while !seen[cur / 2] {
                seen[cur / 2] = true;
                cur = mate[cur ^ 1];
            }
        }
        let visits: Vec<Key> = kid_visits
            .iter()
            .copied()
            .filter(on_parent)
            .chain(glued_at.iter().copied().filter(|k| on_parent(k) && required.contains(k)))
            .collect();
        if cycles == 0 {
            out.insert(SquareConfig::new(pairs, visits, false));
        } else if cycles == 1 && pairs.is_empty() {
            out.insert(SquareConfig::new(vec![], visits, true));
        }

        // Next combination.
        let mut g = 0;
        loop {
            if g == choice.len() {
                return out.into_iter().collect();
            }
            choice[g] += 1;
            if choice[g] < options[g].len() {
                break;
            }
            choice[g] = 0;
            g += 1;
        }
        if tried >= MAX_GLUINGS {
            return out.into_iter().collect();
        }
    }
}

/// A priced candidate of one square with the children choices behind it.
#[derive(Clone, Debug)]
struct Entry {
    config: SquareConfig,
    cost: f64,
    back: Option<[usize; 4]>,
}

/// How a leaf's pieces were priced.
#[derive(Clone, Debug)]
struct LeafSolution {
    cost: f64,
    /// Paths from the first to the second key of each pair, or one cycle.
    paths: Vec<Vec<TourPoint>>,
    by_dp: bool,
}

#[derive(Clone, Debug, Default)]
pub struct OuterStats {
    pub seeds: usize,
    /// Seeds dropped for crossing some square side more than `r` times.
    pub heavy_seeds: usize,
    pub leaf_problems: usize,
    pub leaf_dp_solved: usize,
    /// Leaves where the inner DP gave up and the seed's own pieces were used.
    pub leaf_fallbacks: usize,
    /// Crossings of dissecting lines by the assembled tour.
    pub line_crossings: usize,
}

#[derive(Clone, Debug)]
pub struct OuterResult {
    pub tour: Tour,
    pub cost: f64,
    pub stats: OuterStats,
}

pub struct OuterInput<'a> {
    pub qt: &'a QuadTree,
    pub kept: &'a Instance,
    pub required: &'a [Key],
    pub seeds: &'a [Tour],
    pub caps: InnerCaps,
    pub r: usize,
}

fn leaf_problem(qt: &QuadTree, cell: Cell, segs: &[Segment], cfg: &SquareConfig) -> LeafProblem {
    LeafProblem {
        square: qt.square(cell),
        segments: segs.to_vec(),
        pairs: cfg.pairs.iter().map(|&(a, b)| (qt.point(a), qt.point(b))).collect(),
        required: cfg.visits.iter().map(|&k| qt.point(k)).collect(),
    }
}

/// A single path leaving and re-entering through one portal is a closed
/// tour through that portal, cut open there.
fn loop_leaf(qt: &QuadTree, cell: Cell, segs: &[Segment], cfg: &SquareConfig, caps: InnerCaps) -> Option<LeafSolution> {
    let [(a, _)] = cfg.pairs[..] else {
        return None;
    };
    let pa = qt.point(a);
    let mut problem = leaf_problem(qt, cell, segs, cfg);
    problem.pairs.clear();
    problem.required.insert(0, pa);
    let sol = inner_dp_solve(&problem, caps).ok()?;
    let cycle = sol.paths.into_iter().next()?;
    let i = cycle.iter().position(|p| p.pos == pa)?;
    let n = cycle.len();
    let mut path: Vec<TourPoint> = (0..n).map(|k| cycle[(i + k) % n]).collect();
    path[0] = TourPoint::dummy(pa);
    path.push(TourPoint::dummy(pa));
    Some(LeafSolution {
        cost: sol.cost,
        paths: vec![path],
        by_dp: true,
    })
}

/// Orients the seed's pieces to match `cfg.pairs`.
fn seed_paths(qt: &QuadTree, cfg: &SquareConfig, pieces: &[Vec<TourPoint>]) -> Option<Vec<Vec<TourPoint>>> {
    if cfg.closed {
        return Some(pieces.to_vec());
    }
    let mut left: Vec<Vec<TourPoint>> = pieces.to_vec();
    let mut out = Vec::new();
    for &(a, b) in &cfg.pairs {
        let (pa, pb) = (qt.point(a), qt.point(b));
        let i = left.iter().position(|p| {
            let (s, e) = (p[0].pos, p[p.len() - 1].pos);
            (s == pa && e == pb) || (s == pb && e == pa)
        })?;
        let mut p = left.swap_remove(i);
        if p[0].pos != pa {
            p.reverse();
        }
        out.push(p);
    }
    Some(out)
}

fn poly_cost(paths: &[Vec<TourPoint>], closed: bool) -> f64 {
    paths
        .iter()
        .map(|p| {
            let pts: Vec<Point> = p.iter().map(|t| t.pos).collect();
            if closed {
                tour_cost(&Tour::from_points(&pts, true))
            } else {
                path_cost(&pts)
            }
        })
        .sum()
}

pub fn outer_dp(input: &OuterInput) -> Result<OuterResult> {
    let qt = input.qt;
    let tol = 1e-9 * qt.root.side;
    let req_pts: Vec<(Key, Point)> = input.required.iter().map(|&k| (k, qt.point(k))).collect();
    let req_set: BTreeSet<Key> = input.required.iter().copied().collect();
    let mut stats = OuterStats::default();

    let mut induced = Vec::new();
    for t in input.seeds {
        let st = portal_respecting(t, qt, &req_pts)?;
        let ind = induced_configs(&st, qt, &req_set)?;
        stats.seeds += 1;
        if ind.max_side_crossings > input.r {
            stats.heavy_seeds += 1;
            continue;
        }
        induced.push(ind);
    }
    if induced.is_empty() {
        return Err(TspnError::Infeasible(format!("no seed is {}-light", input.r)));
    }

    // Candidates per square: each seed's configuration, empty if it skips it.
    let depth = qt.depth as usize;
    let mut cands: Vec<BTreeMap<Cell, Vec<SquareConfig>>> = vec![BTreeMap::new(); depth + 1];
    for level in 0..=depth {
        let cells: BTreeSet<Cell> = induced.iter().flat_map(|ind| ind.configs[level].keys().copied()).collect();
        for c in cells {
            let mut list: Vec<SquareConfig> = induced
                .iter()
                .map(|ind| ind.configs[level].get(&c).cloned().unwrap_or_default())
                .collect();
            list.sort();
            list.dedup();
            cands[level].insert(c, list);
        }
    }

    // Leaves.
    let mut by_leaf: BTreeMap<(i64, i64), Vec<Segment>> = BTreeMap::new();
    for s in &input.kept.segments {
        by_leaf.entry(qt.leaf_at(s.mid())).or_default().push(*s);
    }
    let mut jobs: Vec<(Cell, SquareConfig, Option<Vec<Vec<TourPoint>>>)> = Vec::new();
    for (&cell, list) in &cands[depth] {
        for cfg in list {
            let mut best: Option<(f64, Vec<Vec<TourPoint>>)> = None;
            for ind in &induced {
                if ind.configs[depth].get(&cell) != Some(cfg) {
                    continue;
                }
                if let Some(paths) = seed_paths(qt, cfg, &ind.leaf_pieces[&cell]) {
                    let c = poly_cost(&paths, cfg.closed);
                    if best.as_ref().map_or(true, |b| c < b.0) {
                        best = Some((c, paths));
                    }
                }
            }
            jobs.push((cell, cfg.clone(), best.map(|b| b.1)));
        }
    }
    stats.leaf_problems = jobs.len();
    let caps = input.caps;
    let solved: Vec<LeafSolution> = jobs
        .par_iter()
        .map(|(cell, cfg, seed)| {
            let segs = by_leaf.get(&(cell.i, cell.j)).map(Vec::as_slice).unwrap_or(&[]);
            if cfg.is_empty() {
                let cost = if segs.is_empty() { 0.0 } else { f64::INFINITY };
                return LeafSolution {
                    cost,
                    paths: vec![],
                    by_dp: false,
                };
            }
            let seed_sol = seed.as_ref().map(|p| LeafSolution {
                cost: poly_cost(p, cfg.closed),
                paths: p.clone(),
                by_dp: false,
            });
            let degenerate = cfg.pairs.iter().any(|(a, b)| a == b);
            let dp = if degenerate {
                loop_leaf(qt, *cell, segs, cfg, caps)
            } else {
                inner_dp_solve(&leaf_problem(qt, *cell, segs, cfg), caps).ok().map(|s| LeafSolution {
                    cost: s.cost,
                    paths: s.paths,
                    by_dp: true,
                })
            };
            match (dp, seed_sol) {
                (Some(d), Some(s)) => {
                    if d.cost <= s.cost + tol {
                        d
                    } else {
                        s
                    }
                }
                (Some(d), None) => d,
                (None, Some(s)) => s,
                (None, None) => LeafSolution {
                    cost: f64::INFINITY,
                    paths: vec![],
                    by_dp: false,
                },
            }
        })
        .collect();
    stats.leaf_dp_solved = solved.iter().filter(|s| s.by_dp).count();
    stats.leaf_fallbacks = jobs
        .iter()
        .zip(&solved)
        .filter(|((_, c, _), s)| !c.is_empty() && !s.by_dp)
        .count();

    let mut table: Vec<BTreeMap<Cell, Vec<Entry>>> = vec![BTreeMap::new(); depth + 1];
    let mut leaf_sol: BTreeMap<(Cell, usize), LeafSolution> = BTreeMap::new();
    {
        let mut it = solved.into_iter();
        for (&cell, list) in &cands[depth] {
            let mut entries = Vec::new();
            for (ci, cfg) in list.iter().enumerate() {
                let s = it.next().unwrap();
                entries.push(Entry {
                    config: cfg.clone(),
                    cost: s.cost,
                    back: None,
                });
                leaf_sol.insert((cell, ci), s);
            }
            table[depth].insert(cell, entries);
        }
    }

    let empty = SquareConfig::default();
    for level in (0..depth).rev() {
        let cells: Vec<(Cell, Vec<SquareConfig>)> = cands[level].iter().map(|(c, l)| (*c, l.clone())).collect();
        let below = &table[level + 1];
        let filled: Vec<(Cell, Vec<Entry>)> = cells
            .par_iter()
            .map(|(cell, list)| {
                let kids = qt.children(*cell);
                let opts: Vec<Vec<(usize, &SquareConfig, f64)>> = kids
                    .iter()
                    .map(|k| match below.get(k) {
                        Some(es) => es
                            .iter()
                            .enumerate()
                            .filter(|(_, e)| e.cost.is_finite())
                            .map(|(i, e)| (i, &e.config, e.cost))
                            .collect(),
                        None => vec![(usize::MAX, &empty, 0.0)],
                    })
                    .collect();
                let index: BTreeMap<&SquareConfig, usize> = list.iter().enumerate().map(|(i, c)| (c, i)).collect();
                let mut entries: Vec<Entry> = list
                    .iter()
                    .map(|c| Entry {
                        config: c.clone(),
                        cost: f64::INFINITY,
                        back: None,
                    })
                    .collect();
                for a in &opts[0] {
                    for b in &opts[1] {
                        for c in &opts[2] {
                            for d in &opts[3] {
                                let cost = a.2 + b.2 + c.2 + d.2;
                                let kids_cfg = [(kids[0], a.1), (kids[1], b.1), (kids[2], c.1), (kids[3], d.1)];
                                for derived in combine(qt, *cell, kids_cfg, &req_set) {
                                    if let Some(&i) = index.get(&derived) {
                                        if cost < entries[i].cost {
                                            entries[i].cost = cost;
                                            entries[i].back = Some([a.0, b.0, c.0, d.0]);
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                (*cell, entries)
            })
            .collect();
        table[level] = filled.into_iter().collect();
    }

    let root = Cell { level: 0, i: 0, j: 0 };
    let (root_idx, root_entry) = table[0]
        .get(&root)
        .and_then(|es| {
            es.iter()
                .enumerate()
                .filter(|(_, e)| e.config.closed && e.cost.is_finite())
                .min_by(|a, b| a.1.cost.total_cmp(&b.1.cost))
        })
        .ok_or_else(|| TspnError::Infeasible("no consistent combination of seed configurations".into()))?;
    let dp_cost = root_entry.cost;

    // Walk back to the chosen leaf configurations.
    let mut chosen: Vec<(Cell, usize)> = Vec::new();
    let mut stack = vec![(root, root_idx)];
    while let Some((cell, idx)) = stack.pop() {
        if cell.level as usize == depth {
            chosen.push((cell, idx));
            continue;
        }
        let back = table[cell.level as usize][&cell][idx]
            .back
            .ok_or_else(|| TspnError::Internal("outer DP entry without children".into()))?;
        for (k, &b) in qt.children(cell).iter().zip(&back) {
            if b != usize::MAX {
                stack.push((*k, b));
            }
        }
    }
    chosen.sort();

    let mut edges: Vec<(usize, usize, Vec<TourPoint>)> = Vec::new();
    let mut vid: BTreeMap<Key, usize> = BTreeMap::new();
    let mut closed_cycle: Option<Vec<TourPoint>> = None;
    for (cell, idx) in &chosen {
        let cfg = &table[depth][cell][*idx].config;
        let sol = &leaf_sol[&(*cell, *idx)];
        if cfg.closed {
            closed_cycle = sol.paths.first().cloned();
            continue;
        }
        for (&(a, b), path) in cfg.pairs.iter().zip(&sol.paths) {
            let n = vid.len();
            let va = *vid.entry(a).or_insert(n);
            let n = vid.len();
            let vb = *vid.entry(b).or_insert(n);
            edges.push((va, vb, path.clone()));
        }
        stats.line_crossings += cfg.pairs.len();
    }
    stats.line_crossings /= 2;

    let mut pts: Vec<TourPoint> = Vec::new();
    if let Some(cycle) = closed_cycle {
        if !edges.is_empty() {
            return Err(TspnError::Internal("closed leaf alongside open pieces".into()));
        }
        pts = cycle;
    } else {
        if edges.is_empty() {
            return Err(TspnError::Internal("outer DP chose no pieces".into()));
        }
        let circuit = euler_circuit(vid.len(), &edges, edges[0].0);
        if circuit.len() != edges.len() {
            return Err(TspnError::Internal("leaf pieces do not form one tour".into()));
        }
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
    }
    for p in &mut pts {
        if let Some(i) = req_pts.iter().position(|(_, q)| q.dist(p.pos) <= tol) {
            p.binding = Binding::Portal(i);
        } else if matches!(p.binding, Binding::Portal(_)) {
            p.binding = Binding::Dummy;
        }
    }
    let tour = Tour::closed(pts);
    let cost = tour_cost(&tour);
    if (cost - dp_cost).abs() > 1e-6 * dp_cost.max(1.0) {
        return Err(TspnError::Internal(format!("assembled tour costs {cost}, table says {dp_cost}")));
    }
    Ok(OuterResult { tour, cost, stats })
}
