//! Shifted quad-tree over a scaled instance. Horizontal dissecting lines are
//! placed on cover-lines, so they all fall into one cover-line group.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, TspnError};
use crate::geometry::{Point, Square};
use crate::instance::Instance;
use crate::structure::CoverLineSet;
use crate::Stage;

/// A portal position in grid units `base_side / m` from the root's lower-left
/// corner. Every portal of every line is a grid point.
pub type Key = (i64, i64);

/// A dissection square: `level` 0 is the root, leaves sit at `depth`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub level: u32,
    pub i: i64,
    pub j: i64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadTree {
    /// Horizontal shift in whole units and the vertical shift in cover-lines.
    pub shift: (i64, i64),
    pub root: Square,
    pub base_side: f64,
    pub depth: u32,
    pub m: i64,
    /// Cover-lines per group; dissecting lines are `h` cover-lines apart.
    pub h: i64,
    pub rho: f64,
    /// Cover-line index (counted down from `y0`) of the root's bottom edge.
    pub bottom_line: i64,
    pub y0: f64,
}

impl QuadTree {
    /// Leaves per side.
    pub fn cells(&self) -> i64 {
        1 << self.depth
    }

    pub fn unit(&self) -> f64 {
        self.base_side / self.m as f64
    }

    /// Grid units per side of the whole root.
    pub fn extent(&self) -> i64 {
        self.m * self.cells()
    }

    pub fn point(&self, k: Key) -> Point {
        let u = self.unit();
        Point::new(self.root.x0 + k.0 as f64 * u, self.root.y0 + k.1 as f64 * u)
    }

    /// Level of the dissecting line with index `k` (in leaf sides); the root
    /// boundary is level 0.
    pub fn line_level(&self, k: i64) -> u32 {
        if k <= 0 || k >= self.cells() {
            0
        } else {
            self.depth - k.trailing_zeros()
        }
    }

    /// Distance between neighbouring portals on a line of `level`, in units.
    pub fn portal_step(&self, level: u32) -> i64 {
        1 << (self.depth - level)
    }

    pub fn vline_x(&self, k: i64) -> f64 {
        self.root.x0 + k as f64 * self.base_side
    }

    pub fn hline_y(&self, k: i64) -> f64 {
        self.root.y0 + k as f64 * self.base_side
    }

    /// Cover-line index of horizontal dissecting line `k`.
    pub fn cover_index(&self, k: i64) -> i64 {
        self.bottom_line - k * self.h
    }

    pub fn j_star(&self) -> i64 {
        self.bottom_line.rem_euclid(self.h)
    }

    fn snap_along(&self, line: i64, rel: f64) -> i64 {
        let step = self.portal_step(self.line_level(line));
        let i = ((rel / self.unit()) / step as f64).round() as i64 * step;
        i.clamp(0, self.extent())
    }

    /// Nearest portal of vertical line `k` to height `y`.
    pub fn snap_vertical(&self, k: i64, y: f64) -> Key {
        (k * self.m, self.snap_along(k, y - self.root.y0))
    }

    /// Nearest portal of horizontal line `k` to abscissa `x`.
    pub fn snap_horizontal(&self, k: i64, x: f64) -> Key {
        (self.snap_along(k, x - self.root.x0), k * self.m)
    }

    /// Leaf containing `p`; points on a dissecting line go to the leaf on the
    /// left or below.
    pub fn leaf_at(&self, p: Point) -> (i64, i64) {
        let f = |v: f64| {
            let r = v / self.base_side;
            let near = r.round();
            let k = if (r - near).abs() <= 1e-9 { near as i64 - 1 } else { r.floor() as i64 };
            k.clamp(0, self.cells() - 1)
        };
        (f(p.x - self.root.x0), f(p.y - self.root.y0))
    }

    pub fn leaf_cell(&self, p: Point) -> Cell {
        let (i, j) = self.leaf_at(p);
        Cell { level: self.depth, i, j }
    }

    /// Side of `c` in grid units.
    pub fn cell_width(&self, c: Cell) -> i64 {
        self.m << (self.depth - c.level)
    }

    pub fn square(&self, c: Cell) -> Square {
        let side = self.root.side / (1u64 << c.level) as f64;
        Square::new(self.root.x0 + c.i as f64 * side, self.root.y0 + c.j as f64 * side, side)
    }

    pub fn ancestor(&self, leaf: (i64, i64), level: u32) -> Cell {
        let s = self.depth - level;
        Cell { level, i: leaf.0 >> s, j: leaf.1 >> s }
    }

    pub fn children(&self, c: Cell) -> [Cell; 4] {
        let l = c.level + 1;
        let (i, j) = (2 * c.i, 2 * c.j);
        [
            Cell { level: l, i, j },
            Cell { level: l, i: i + 1, j },
            Cell { level: l, i, j: j + 1 },
            Cell { level: l, i: i + 1, j: j + 1 },
        ]
    }

    pub fn on_boundary(&self, c: Cell, k: Key) -> bool {
        let w = self.cell_width(c);
        let (x0, y0) = (c.i * w, c.j * w);
        let inx = k.0 >= x0 && k.0 <= x0 + w;
        let iny = k.1 >= y0 && k.1 <= y0 + w;
        ((k.0 == x0 || k.0 == x0 + w) && iny) || ((k.1 == y0 || k.1 == y0 + w) && inx)
    }

    /// Which sides of `c` hold `k`, as a bit mask (left, right, bottom, top).
    pub fn sides_of(&self, c: Cell, k: Key) -> u8 {
        let w = self.cell_width(c);
        let (x0, y0) = (c.i * w, c.j * w);
        let inx = k.0 >= x0 && k.0 <= x0 + w;
        let iny = k.1 >= y0 && k.1 <= y0 + w;
        let mut s = 0;
        if iny && k.0 == x0 {
            s |= 1;
        }
        if iny && k.0 == x0 + w {
            s |= 2;
        }
        if inx && k.1 == y0 {
            s |= 4;
        }
        if inx && k.1 == y0 + w {
            s |= 8;
        }
        s
    }

    /// True when `k` lies on the two lines that split `c`, away from its
    /// boundary.
    pub fn on_inner_cross(&self, c: Cell, k: Key) -> bool {
        if c.level >= self.depth {
            return false;
        }
        let w = self.cell_width(c);
        let (x0, y0) = (c.i * w, c.j * w);
        let strict_x = k.0 > x0 && k.0 < x0 + w;
        let strict_y = k.1 > y0 && k.1 < y0 + w;
        (k.0 == x0 + w / 2 && strict_y) || (k.1 == y0 + w / 2 && strict_x)
    }
}

/// Levels below an unshifted root of side `N`: `⌈log2(N / base)⌉`.
pub fn dissection_depth(n_bound: f64, base_side: f64) -> u32 {
    if n_bound <= base_side {
        return 0;
    }
    (n_bound / base_side).log2().ceil() as u32
}

/// Portal count parameter: the least power of two at least
/// `(4/ε)·log2(N/(ρh))`, raised so that every leaf corner is a portal of
/// each line through it.
pub fn portal_parameter(epsilon: f64, n_bound: f64, base_side: f64, depth: u32) -> i64 {
    let want = (4.0 / epsilon) * (n_bound / base_side).max(1.0).log2();
    let mut m: i64 = 2;
    while (m as f64) < want {
        m *= 2;
    }
    m.max(1 << depth.saturating_sub(1))
}

/// Builds the shifted dissection. The root is doubled relative to the
/// bounding box so any shift keeps every segment strictly inside.
pub fn build_quadtree(inst: &Instance, epsilon: f64, seed: u64, m_override: Option<i64>) -> Result<QuadTree> {
    if inst.stage != Stage::Scaled {
        return Err(TspnError::Stage {
            expected: Stage::Scaled,
            found: inst.stage,
        });
    }
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(TspnError::Argument(format!("epsilon = {epsilon} not in (0, 1]")));
    }
    let rho = inst.rho.ok_or(TspnError::DegenerateScale)?;
    let bb = inst.bounding_box()?;
    let n_bound = inst.n_bound.unwrap_or(bb.width().max(bb.height()));
    let h = (1.0 / epsilon).ceil() as i64 * inst.lambda.ceil().max(1.0) as i64;
    let base = h as f64 * rho;
    let depth = dissection_depth(n_bound, base) + 1;
    let side = base * (1u64 << depth) as f64;
    let m = match m_override {
        Some(m) if m < 1 || (m & (m - 1)) != 0 => {
            return Err(TspnError::Argument(format!("m = {m} is not a power of two")));
        }
        Some(m) => m.max(1 << (depth - 1)),
        None => portal_parameter(epsilon, n_bound, base, depth),
    };
    let y0 = inst.segments.iter().map(|s| s.y_bot).fold(f64::NEG_INFINITY, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Vertical: the bottom edge sits t cover-lines below the lowest tip.
    let below = ((y0 - bb.y_min) / rho).floor() as i64 + 1;
    let room = ((side / 2.0) / rho).floor() as i64 - 1;
    let t = rng.gen_range(0..room.max(1));
    let bottom_line = below + t;
    let oy = y0 - bottom_line as f64 * rho;

    // Horizontal: redraw until no vertical line passes near a segment.
    let max_a = ((side / 2.0).floor() as i64).max(2);
    let xs: Vec<f64> = inst.segments.iter().map(|s| s.x).collect();
    for _ in 0..256 {
        let a = rng.gen_range(1..max_a);
        let ox = bb.x_min - a as f64;
        let clear = xs.iter().all(|&x| {
            let r = (x - ox) / base;
            (r - r.round()).abs() * base > 0.5
        });
        if clear {
            return Ok(QuadTree {
                shift: (a, t),
                root: Square::new(ox, oy, side),
                base_side: base,
                depth,
                m,
                h,
                rho,
                bottom_line,
                y0,
            });
        }
    }
    Err(TspnError::Internal("no vertical shift clears every segment".into()))
}

/// Cover-lines split into `h` groups by index modulo `h`; `j_star` is the
/// group holding the horizontal dissecting lines.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoverGroups {
    pub h: i64,
    pub j_star: i64,
    pub groups: Vec<Vec<usize>>,
}

pub fn group_cover_lines(h: i64, j_star: i64, lines: &CoverLineSet) -> CoverGroups {
    let mut groups = vec![Vec::new(); h.max(1) as usize];
    for k in 0..lines.count {
        groups[(k as i64).rem_euclid(h) as usize].push(k);
    }
    CoverGroups { h, j_star, groups }
}

pub fn group_for_tree(qt: &QuadTree, lines: &CoverLineSet) -> CoverGroups {
    group_cover_lines(qt.h, qt.j_star(), lines)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{generate, GenKind, GenParams};
    use crate::instance::{perturb_snap, scale};
    use crate::structure::build_cover_lines;

    fn scaled(n: usize, seed: u64) -> Instance {
        let raw = generate(GenKind::Uniform, n, &GenParams::default(), seed).unwrap();
        scale(&perturb_snap(&raw, 0.5).unwrap()).unwrap()
    }

    #[test]
    fn depth_of_four_leaves() {
        assert_eq!(dissection_depth(4.0 * 3.0, 3.0), 2);
        assert_eq!(dissection_depth(3.0, 3.0), 0);
        assert_eq!(dissection_depth(3.1, 3.0), 1);
    }

    #[test]
    fn five_lines_two_groups() {
        let lines = CoverLineSet {
            y0: 0.0,
            spacing: 1.0,
            count: 5,
            assignment: Default::default(),
        };
        let g = group_cover_lines(2, 0, &lines);
        assert_eq!(g.groups[0].len(), 3);
        assert_eq!(g.groups[1].len(), 2);
    }

    #[test]
    fn tree_contains_instance_and_is_deterministic() {
        for seed in 0..10 {
            let inst = scaled(8, seed);
            let qt = build_quadtree(&inst, 0.5, seed, None).unwrap();
            assert_eq!(qt, build_quadtree(&inst, 0.5, seed, None).unwrap());
            for s in &inst.segments {
                assert!(s.x > qt.root.x0 && s.x < qt.root.x1());
                assert!(s.y_bot > qt.root.y0 && s.y_top < qt.root.y1());
                for k in 1..qt.cells() {
                    assert!((s.x - qt.vline_x(k)).abs() > 0.5);
                }
            }
            // Every horizontal dissecting line is a cover-line of group j*.
            let lines = build_cover_lines(&inst);
            for k in 0..=qt.cells() {
                let tau = qt.cover_index(k);
                assert!((lines.y(tau) - qt.hline_y(k)).abs() < 1e-6 * qt.root.side);
                assert_eq!(tau.rem_euclid(qt.h), qt.j_star());
            }
        }
    }

    #[test]
    fn leaf_corners_are_portals_of_every_line() {
        let inst = scaled(30, 3);
        let qt = build_quadtree(&inst, 0.5, 1, Some(2)).unwrap();
        for k in 1..qt.cells() {
            let step = qt.portal_step(qt.line_level(k));
            for c in 0..=qt.cells() {
                assert_eq!((c * qt.m) % step, 0);
            }
        }
    }

    #[test]
    fn snapping_lands_on_the_line() {
        let inst = scaled(12, 5);
        let qt = build_quadtree(&inst, 0.5, 2, None).unwrap();
        let k = qt.cells() / 2;
        let key = qt.snap_vertical(k, qt.root.y0 + 0.37 * qt.root.side);
        assert_eq!(key.0, k * qt.m);
        assert_eq!(key.1 % qt.portal_step(1), 0);
        let p = qt.point(key);
        assert!((p.x - qt.vline_x(k)).abs() < 1e-9 * qt.root.side);
    }
}
