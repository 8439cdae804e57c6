//! Text formats for instances, tours, and mixed axis-parallel instances.
//!
//! ```text
//! TSPN-SEG 1
//! n=<int> lambda=<decimal>
//! <id> <x> <y_bot> <y_top>
//! ```
//!
//! Tours are `TSPN-TOUR 1` followed by `<x> <y> <binding>` lines where the
//! binding is `s<id>`, `portal<id>` or `-`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Result, TspnError};
use crate::geometry::{Binding, Point, Tour, TourPoint};
use crate::instance::{Instance, Segment};

struct Lines<'a> {
    file: String,
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn new(file: &str, text: &'a str) -> Self {
        Lines {
            file: file.to_string(),
            iter: text.lines().enumerate(),
        }
    }

    fn next_content(&mut self) -> Option<(usize, &'a str)> {
        for (i, l) in self.iter.by_ref() {
            let t = l.trim_end_matches('\r');
            if !t.trim().is_empty() {
                return Some((i + 1, t));
            }
        }
        None
    }

    fn err(&self, line: usize, col: usize, msg: impl Into<String>) -> TspnError {
        TspnError::Parse {
            file: self.file.clone(),
            line,
            col,
            msg: msg.into(),
        }
    }
}

/// Whitespace-separated tokens with their 1-based starting column.
fn tokens(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        match (c.is_whitespace(), start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                out.push((s + 1, &line[s..i]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s + 1, &line[s..]));
    }
    out
}

fn num<T: std::str::FromStr>(lines: &Lines, line: usize, tok: (usize, &str), what: &str) -> Result<T> {
    tok.1
        .parse::<T>()
        .map_err(|_| lines.err(line, tok.0, format!("expected {what}, found `{}`", tok.1)))
}

fn real(lines: &Lines, line: usize, tok: (usize, &str), what: &str) -> Result<f64> {
    let v: f64 = num(lines, line, tok, what)?;
    if !v.is_finite() {
        return Err(lines.err(line, tok.0, format!("{what} must be finite")));
    }
    Ok(v)
}

fn header(lines: &mut Lines, magic: &str) -> Result<()> {
    match lines.next_content() {
        Some((_, l)) if l.trim() == magic => Ok(()),
        Some((ln, l)) => Err(lines.err(ln, 1, format!("expected header `{magic}`, found `{}`", l.trim()))),
        None => Err(lines.err(1, 1, format!("missing header `{magic}`"))),
    }
}

fn key_value<'a>(lines: &Lines, line: usize, tok: (usize, &'a str), key: &str) -> Result<(usize, &'a str)> {
    let prefix = format!("{key}=");
    tok.1
        .strip_prefix(&prefix)
        .map(|v| (tok.0 + prefix.len(), v))
        .ok_or_else(|| lines.err(line, tok.0, format!("expected `{key}=...`")))
}

pub fn parse_instance(text: &str, file: &str) -> Result<Instance> {
    let mut lines = Lines::new(file, text);
    header(&mut lines, "TSPN-SEG 1")?;
    let (ln, l) = lines
        .next_content()
        .ok_or_else(|| lines.err(2, 1, "missing `n=<int> lambda=<decimal>` line"))?;
    let t = tokens(l);
    if t.len() != 2 {
        return Err(lines.err(ln, 1, "expected `n=<int> lambda=<decimal>`"));
    }
    let n: usize = num(&lines, ln, key_value(&lines, ln, t[0], "n")?, "integer n")?;
    let lt = key_value(&lines, ln, t[1], "lambda")?;
    let lambda = real(&lines, ln, lt, "decimal lambda")?;
    if lambda < 1.0 {
        return Err(lines.err(ln, lt.0, format!("lambda = {lambda} must be at least 1")));
    }
    let mut segs = Vec::with_capacity(n);
    while let Some((ln, l)) = lines.next_content() {
        let t = tokens(l);
        if t.len() != 4 {
            let col = t.get(4).map_or(l.len() + 1, |x| x.0);
            return Err(lines.err(ln, col, format!("expected 4 fields, found {}", t.len())));
        }
        let id: usize = num(&lines, ln, t[0], "integer id")?;
        let x = real(&lines, ln, t[1], "x")?;
        let yb = real(&lines, ln, t[2], "y_bot")?;
        let yt = real(&lines, ln, t[3], "y_top")?;
        if yt < yb {
            return Err(lines.err(ln, t[3].0, "y_top below y_bot"));
        }
        segs.push(Segment::new(id, x, yb, yt));
    }
    if segs.len() != n {
        return Err(lines.err(ln, 1, format!("header says n={n} but {} segments follow", segs.len())));
    }
    let inst = Instance::unchecked(segs, lambda);
    inst.validate()?;
    Ok(inst)
}

pub fn format_instance(inst: &Instance) -> String {
    let mut s = String::new();
    writeln!(s, "TSPN-SEG 1").unwrap();
    writeln!(s, "n={} lambda={}", inst.n(), inst.lambda).unwrap();
    for g in &inst.segments {
        writeln!(s, "{} {} {} {}", g.id, g.x, g.y_bot, g.y_top).unwrap();
    }
    s
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<Instance> {
    let p = path.as_ref();
    parse_instance(&fs::read_to_string(p)?, &p.display().to_string())
}

pub fn write_instance(inst: &Instance, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_instance(inst))?;
    Ok(())
}

fn format_binding(b: Binding) -> String {
    match b {
        Binding::Segment(id) => format!("s{id}"),
        Binding::Portal(id) => format!("portal{id}"),
        Binding::Dummy => "-".to_string(),
    }
}

pub fn format_tour(tour: &Tour) -> String {
    let mut s = String::new();
    writeln!(s, "TSPN-TOUR 1").unwrap();
    for p in &tour.points {
        writeln!(s, "{} {} {}", p.pos.x, p.pos.y, format_binding(p.binding)).unwrap();
    }
    s
}

pub fn parse_tour(text: &str, file: &str) -> Result<Tour> {
    let mut lines = Lines::new(file, text);
    header(&mut lines, "TSPN-TOUR 1")?;
    let mut pts = Vec::new();
    while let Some((ln, l)) = lines.next_content() {
        let t = tokens(l);
        if t.len() != 3 {
            return Err(lines.err(ln, 1, format!("expected `<x> <y> <binding>`, found {} fields", t.len())));
        }
        let x = real(&lines, ln, t[0], "x")?;
        let y = real(&lines, ln, t[1], "y")?;
        let b = t[2].1;
        let binding = if b == "-" {
            Binding::Dummy
        } else if let Some(r) = b.strip_prefix("portal") {
            Binding::Portal(num(&lines, ln, (t[2].0 + 6, r), "portal id")?)
        } else if let Some(r) = b.strip_prefix('s') {
            Binding::Segment(num(&lines, ln, (t[2].0 + 1, r), "segment id")?)
        } else {
            return Err(lines.err(ln, t[2].0, format!("unknown binding `{b}`")));
        };
        pts.push(TourPoint::new(Point::new(x, y), binding));
    }
    if pts.is_empty() {
        return Err(lines.err(2, 1, "tour has no points"));
    }
    Ok(Tour::closed(pts))
}

pub fn read_tour(path: impl AsRef<Path>) -> Result<Tour> {
    let p = path.as_ref();
    parse_tour(&fs::read_to_string(p)?, &p.display().to_string())
}

pub fn write_tour(tour: &Tour, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_tour(tour))?;
    Ok(())
}

/// An axis-parallel segment of a mixed instance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AxisSegment {
    /// `x`, `y_bot`, `y_top`.
    Vertical { id: usize, x: f64, lo: f64, hi: f64 },
    /// `y`, `x_left`, `x_right`.
    Horizontal { id: usize, y: f64, lo: f64, hi: f64 },
}

impl AxisSegment {
    pub fn id(&self) -> usize {
        match *self {
            AxisSegment::Vertical { id, .. } | AxisSegment::Horizontal { id, .. } => id,
        }
    }

    pub fn endpoints(&self) -> (Point, Point) {
        match *self {
            AxisSegment::Vertical { x, lo, hi, .. } => (Point::new(x, lo), Point::new(x, hi)),
            AxisSegment::Horizontal { y, lo, hi, .. } => (Point::new(lo, y), Point::new(hi, y)),
        }
    }
}

/// `TSPN-AXIS 1`, `n=<int>`, then `<id> v <x> <y_bot> <y_top>` or
/// `<id> h <y> <x_left> <x_right>`.
pub fn parse_axis(text: &str, file: &str) -> Result<Vec<AxisSegment>> {
    let mut lines = Lines::new(file, text);
    header(&mut lines, "TSPN-AXIS 1")?;
    let (ln, l) = lines.next_content().ok_or_else(|| lines.err(2, 1, "missing `n=<int>` line"))?;
    let t = tokens(l);
    if t.len() != 1 {
        return Err(lines.err(ln, 1, "expected `n=<int>`"));
    }
    let n: usize = num(&lines, ln, key_value(&lines, ln, t[0], "n")?, "integer n")?;
    let mut out = Vec::with_capacity(n);
    while let Some((ln, l)) = lines.next_content() {
        let t = tokens(l);
        if t.len() != 5 {
            return Err(lines.err(ln, 1, format!("expected 5 fields, found {}", t.len())));
        }
        let id: usize = num(&lines, ln, t[0], "integer id")?;
        let a = real(&lines, ln, t[2], "coordinate")?;
        let lo = real(&lines, ln, t[3], "coordinate")?;
        let hi = real(&lines, ln, t[4], "coordinate")?;
        if hi < lo {
            return Err(lines.err(ln, t[4].0, "upper end below lower end"));
        }
        out.push(match t[1].1 {
            "v" => AxisSegment::Vertical { id, x: a, lo, hi },
            "h" => AxisSegment::Horizontal { id, y: a, lo, hi },
            o => return Err(lines.err(ln, t[1].0, format!("orientation must be v or h, found `{o}`"))),
        });
    }
    if out.len() != n {
        return Err(lines.err(ln, 1, format!("header says n={n} but {} segments follow", out.len())));
    }
    Ok(out)
}

pub fn format_axis(segs: &[AxisSegment]) -> String {
    let mut s = String::new();
    writeln!(s, "TSPN-AXIS 1").unwrap();
    writeln!(s, "n={}", segs.len()).unwrap();
    for g in segs {
        match *g {
            AxisSegment::Vertical { id, x, lo, hi } => writeln!(s, "{id} v {x} {lo} {hi}").unwrap(),
            AxisSegment::Horizontal { id, y, lo, hi } => writeln!(s, "{id} h {y} {lo} {hi}").unwrap(),
        }
    }
    s
}
