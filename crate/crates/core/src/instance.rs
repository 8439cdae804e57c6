//! Segments, instances, and the snap/scale preprocessing.

use std::collections::HashSet;

use crate::error::{Result, Stage, TspnError};
use crate::geometry::{Point, EPS_GEOM};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub id: usize,
    pub x: f64,
    pub y_bot: f64,
    pub y_top: f64,
}

impl Segment {
    pub fn new(id: usize, x: f64, y_bot: f64, y_top: f64) -> Self {
        Segment { id, x, y_bot, y_top }
    }

    pub fn len(&self) -> f64 {
        self.y_top - self.y_bot
    }

    pub fn bottom(&self) -> Point {
        Point::new(self.x, self.y_bot)
    }

    pub fn top(&self) -> Point {
        Point::new(self.x, self.y_top)
    }

    pub fn mid(&self) -> Point {
        Point::new(self.x, 0.5 * (self.y_bot + self.y_top))
    }

    pub fn clamp_y(&self, y: f64) -> f64 {
        y.clamp(self.y_bot, self.y_top)
    }

    pub fn contains_y(&self, y: f64, tol: f64) -> bool {
        y >= self.y_bot - tol && y <= self.y_top + tol
    }

    /// Distance from a point to this segment.
    pub fn dist_to(&self, p: Point) -> f64 {
        let dy = if p.y < self.y_bot {
            self.y_bot - p.y
        } else if p.y > self.y_top {
            p.y - self.y_top
        } else {
            0.0
        };
        (p.x - self.x).hypot(dy)
    }

    /// Distance between two vertical segments.
    pub fn dist_seg(&self, o: &Segment) -> f64 {
        let gap = (o.y_bot - self.y_top).max(self.y_bot - o.y_top).max(0.0);
        (self.x - o.x).hypot(gap)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundingBox {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl BoundingBox {
    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub segments: Vec<Segment>,
    pub lambda: f64,
    pub stage: Stage,
    /// Scale factor applied by `scale`.
    pub rho: Option<f64>,
    /// Side of the scaled bounding square, ρ·max(L, H).
    pub n_bound: Option<f64>,
    /// Grid pitch εB/n² chosen by `perturb_snap`; `None` when B = 0.
    pub pitch: Option<f64>,
    /// B = max{L, H − 2} of the raw instance.
    pub b: Option<f64>,
}

impl Instance {
    /// Builds a raw instance, checking the length window `[1, λ]` and unique ids.
    pub fn new(segments: Vec<Segment>, lambda: f64) -> Result<Self> {
        let inst = Instance::unchecked(segments, lambda);
        inst.validate()?;
        Ok(inst)
    }

    /// Builds a raw instance without the length check. Zero-length sites are
    /// allowed here; they arise inside the axis-parallel reduction.
    pub fn unchecked(segments: Vec<Segment>, lambda: f64) -> Self {
        Instance {
            segments,
            lambda,
            stage: Stage::Raw,
            rho: None,
            n_bound: None,
            pitch: None,
            b: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 1.0) || !self.lambda.is_finite() {
            return Err(TspnError::Invalid(format!("lambda = {} < 1", self.lambda)));
        }
        let mut ids = HashSet::new();
        for s in &self.segments {
            if !ids.insert(s.id) {
                return Err(TspnError::Invalid(format!("duplicate segment id {}", s.id)));
            }
            if !(s.x.is_finite() && s.y_bot.is_finite() && s.y_top.is_finite()) {
                return Err(TspnError::Invalid(format!("segment {} has non-finite coordinates", s.id)));
            }
            let tol = EPS_GEOM * (1.0 + s.y_top.abs().max(s.y_bot.abs()));
            if s.len() < 1.0 - tol || s.len() > self.lambda + tol {
                return Err(TspnError::Invalid(format!(
                    "segment {} has length {} outside [1, {}]",
                    s.id,
                    s.len(),
                    self.lambda
                )));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.segments.len()
    }

    pub fn by_id(&self, id: usize) -> Option<&Segment> {
        self.segments.iter().find(|s| s.id == id)
    }

    /// Map from segment id to position in `segments`.
    pub fn index_of(&self) -> std::collections::HashMap<usize, usize> {
        self.segments.iter().enumerate().map(|(i, s)| (s.id, i)).collect()
    }

    pub fn bounding_box(&self) -> Result<BoundingBox> {
        bounding_box(self)
    }

    /// B = max{L, H − 2}, with H − 2 clamped at 0.
    pub fn b_value(&self) -> Result<f64> {
        let bb = self.bounding_box()?;
        Ok(bb.width().max((bb.height() - 2.0).max(0.0)))
    }

    /// True when a single horizontal line meets every segment.
    pub fn common_y(&self) -> Option<(f64, f64)> {
        let lo = self.segments.iter().map(|s| s.y_bot).fold(f64::NEG_INFINITY, f64::max);
        let hi = self.segments.iter().map(|s| s.y_top).fold(f64::INFINITY, f64::min);
        (lo <= hi && !self.segments.is_empty()).then_some((lo, hi))
    }

    /// Geometric tolerance scaled to the instance extent.
    pub fn tol(&self) -> f64 {
        let s = self
            .segments
            .iter()
            .fold(1.0f64, |m, s| m.max(s.x.abs()).max(s.y_top.abs()).max(s.y_bot.abs()));
        EPS_GEOM * s
    }
}

pub fn bounding_box(inst: &Instance) -> Result<BoundingBox> {
    let first = inst.segments.first().ok_or(TspnError::Empty)?;
    let mut bb = BoundingBox {
        x_min: first.x,
        x_max: first.x,
        y_min: first.y_bot,
        y_max: first.y_top,
    };
    for s in &inst.segments[1..] {
        bb.x_min = bb.x_min.min(s.x);
        bb.x_max = bb.x_max.max(s.x);
        bb.y_min = bb.y_min.min(s.y_bot);
        bb.y_max = bb.y_max.max(s.y_top);
    }
    Ok(bb)
}

/// Moves every lower tip to the grid of pitch εB/n² so that all x are
/// distinct. Columns already taken push a segment to the nearest free
/// column, the one with smaller x winning ties.
pub fn perturb_snap(inst: &Instance, epsilon: f64) -> Result<Instance> {
    if inst.stage != Stage::Raw {
        return Err(TspnError::Stage {
            expected: Stage::Raw,
            found: inst.stage,
        });
    }
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(TspnError::Argument(format!("epsilon = {epsilon} not in (0, 1]")));
    }
    let n = inst.n();
    if n == 0 {
        return Err(TspnError::Empty);
    }
    let b = inst.b_value()?;
    let mut out = inst.clone();
    out.stage = Stage::Snapped;
    out.b = Some(b);
    if b <= 0.0 {
        out.pitch = None;
        return Ok(out);
    }
    let pitch = epsilon * b / (n * n) as f64;
    out.pitch = Some(pitch);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        let (a, c) = (&inst.segments[i], &inst.segments[j]);
        a.x.total_cmp(&c.x).then(a.id.cmp(&c.id))
    });
    let mut taken: HashSet<i64> = HashSet::new();
    for i in order {
        let s = inst.segments[i];
        let col = nearest_free_column(s.x, pitch, &taken);
        taken.insert(col);
        let row = (s.y_bot / pitch).round() as i64;
        let len = s.len();
        let seg = &mut out.segments[i];
        seg.x = col as f64 * pitch;
        seg.y_bot = row as f64 * pitch;
        seg.y_top = seg.y_bot + len;
    }
    Ok(out)
}

fn nearest_free_column(x: f64, pitch: f64, taken: &HashSet<i64>) -> i64 {
    let mut left = (x / pitch).floor() as i64;
    let mut right = left + 1;
    loop {
        let dl = (x - left as f64 * pitch).abs();
        let dr = (right as f64 * pitch - x).abs();
        if dl <= dr {
            if !taken.contains(&left) {
                return left;
            }
            left -= 1;
        } else {
            if !taken.contains(&right) {
                return right;
            }
            right += 1;
        }
    }
}

/// Multiplies all coordinates by ρ = 4n²/(εB) = 4/pitch so that snapped
/// columns and lower tips land on multiples of 4.
pub fn scale(inst: &Instance) -> Result<Instance> {
    if inst.stage != Stage::Snapped {
        return Err(TspnError::Stage {
            expected: Stage::Snapped,
            found: inst.stage,
        });
    }
    let pitch = inst.pitch.ok_or(TspnError::DegenerateScale)?;
    let rho = 4.0 / pitch;
    let mut out = inst.clone();
    for s in &mut out.segments {
        let len = s.len();
        s.x = 4.0 * (s.x / pitch).round();
        s.y_bot = 4.0 * (s.y_bot / pitch).round();
        s.y_top = s.y_bot + rho * len;
    }
    let bb = out.bounding_box()?;
    out.stage = Stage::Scaled;
    out.rho = Some(rho);
    out.n_bound = Some(bb.width().max(bb.height()));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(id: usize, x: f64, y: f64) -> Segment {
        Segment::new(id, x, y, y + 1.0)
    }

    #[test]
    fn bbox_examples() {
        let one = Instance::new(vec![unit(0, 0.0, 0.0)], 1.0).unwrap();
        let bb = bounding_box(&one).unwrap();
        assert_eq!((bb.x_min, bb.x_max, bb.y_min, bb.y_max), (0.0, 0.0, 0.0, 1.0));
        let two = Instance::new(vec![unit(0, 0.0, 0.0), unit(1, 3.0, 0.5)], 1.0).unwrap();
        assert_eq!(bounding_box(&two).unwrap().width(), 3.0);
        assert!(matches!(
            bounding_box(&Instance::unchecked(vec![], 1.0)),
            Err(TspnError::Empty)
        ));
    }

    #[test]
    fn rejects_bad_lengths_and_lambda() {
        assert!(Instance::new(vec![Segment::new(0, 0.0, 0.0, 0.5)], 1.0).is_err());
        assert!(Instance::new(vec![Segment::new(0, 0.0, 0.0, 2.5)], 2.0).is_err());
        assert!(Instance::new(vec![unit(0, 0.0, 0.0)], 0.5).is_err());
        assert!(Instance::new(vec![unit(0, 0.0, 0.0), unit(0, 1.0, 0.0)], 1.0).is_err());
    }

    #[test]
    fn snap_fixed_point_on_grid() {
        // L = 4, H = 1 so B = 4; n = 2, eps = 1 gives pitch 1.
        let inst = Instance::new(vec![unit(0, 0.0, 0.0), unit(1, 4.0, 0.0)], 1.0).unwrap();
        let s = perturb_snap(&inst, 1.0).unwrap();
        assert_eq!(s.pitch, Some(1.0));
        assert_eq!(s.segments, inst.segments);
    }

    #[test]
    fn snap_shared_column_moves_second_one_step() {
        // Three segments, two sharing x = 0; B = L = 9, eps = 1: pitch = 1.
        let inst = Instance::new(
            vec![unit(0, 0.0, 0.0), unit(1, 0.0, 2.0), unit(2, 9.0, 0.0)],
            1.0,
        )
        .unwrap();
        let s = perturb_snap(&inst, 1.0).unwrap();
        assert_eq!(s.segments[0].x, 0.0);
        // Both neighbours are one column away; the left one wins.
        assert_eq!(s.segments[1].x, -1.0);
        assert_eq!(s.segments[2].x, 9.0);
    }

    #[test]
    fn scale_stage_guards() {
        let inst = Instance::new(vec![unit(0, 0.0, 0.0), unit(1, 3.0, 0.5)], 1.0).unwrap();
        assert!(scale(&inst).is_err());
        let s = perturb_snap(&inst, 0.5).unwrap();
        let sc = scale(&s).unwrap();
        assert!(scale(&sc).is_err());
        assert!(perturb_snap(&sc, 0.5).is_err());
        let rho = sc.rho.unwrap();
        assert!((sc.segments[0].len() - rho).abs() < 1e-9 * rho);
    }

    #[test]
    fn degenerate_b_cannot_scale() {
        let one = Instance::new(vec![unit(0, 0.0, 0.0)], 1.0).unwrap();
        let s = perturb_snap(&one, 0.5).unwrap();
        assert_eq!(s.pitch, None);
        assert!(matches!(scale(&s), Err(TspnError::DegenerateScale)));
    }
}
