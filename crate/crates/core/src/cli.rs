//! Command-line front end. `run` returns the process exit code: 0 on
//! success, 2 when a solve had to fall back to a baseline, 1 on any error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::baseline::{coverline_stitch, is_feasible, missed_segments, nn_2opt, BaselineConfig, BaselineKind};
use crate::error::{Result, TspnError};
use crate::generate::{generate, GenKind, GenParams};
use crate::geometry::{shadow_profile, tour_cost, uncross, Binding, Point, Tour};
use crate::inner_dp::{brute_force_square, inner_dp_solve, random_leaf_problem, InnerCaps};
use crate::instance::{perturb_snap, scale, Instance};
use crate::io::{format_instance, parse_axis, read_instance, read_tour, write_tour};
use crate::oracle::{exact_oracle, held_karp_discretized, DEFAULT_TOL};
use crate::ptas::{
    axis_feasible, build_quadtree, patch, piece_crossings, solve_axis_parallel, solve_ptas, LinePiece, PtasConfig,
    SolveReport,
};
use crate::structure::{
    build_cover_lines, check_optimal_structure, classify_points, partition_zigzag_sink, restrict_to_strip, PointKind,
    SectionKind, StripPathKind,
};

/// Largest instance the exact oracle is asked to solve.
pub const ORACLE_MAX_N: usize = 9;

#[derive(Parser, Debug)]
#[command(name = "tspn", version, about = "TSP with neighbourhoods over parallel vertical segments")]
pub struct Cli {
    /// Worker threads; all cores when unset.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a seeded random instance.
    Generate(GenerateArgs),
    /// Solve an instance and print a report.
    Solve(SolveArgs),
    /// Structural report for a tour of an instance.
    Analyze(AnalyzeArgs),
    /// Run a named self-check suite.
    Verify(VerifyArgs),
    /// Compare algorithms on generated instances.
    Bench(BenchArgs),
    /// Draw an instance and optionally a tour as SVG.
    Render(RenderArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    Ptas,
    Oracle,
    Coverline,
    Nn2opt,
    Axis,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Uniform,
    CombZigzag,
    FarApart,
    PackedBox,
}

impl From<Kind> for GenKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Uniform => GenKind::Uniform,
            Kind::CombZigzag => GenKind::CombZigzag,
            Kind::FarApart => GenKind::FarApart,
            Kind::PackedBox => GenKind::PackedBox,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Layer {
    Coverlines,
    Dissection,
}

#[derive(Args, Debug, Clone)]
pub struct GenParamArgs {
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 10.0)]
    pub width: f64,
    #[arg(long, default_value_t = 10.0)]
    pub height: f64,
    /// Vertical gap between the two combs of `comb-zigzag`.
    #[arg(long, default_value_t = 0.5)]
    pub gap: f64,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value_t = Kind::Uniform)]
    pub kind: Kind,
    #[arg(long)]
    pub n: usize,
    #[command(flatten)]
    pub params: GenParamArgs,
    /// Minimum distance is 1/epsilon for `far-apart`.
    #[arg(long, default_value_t = 0.5)]
    pub epsilon: f64,
    #[arg(long, env = "TSPN_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Output file; standard output when omitted.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 0.5)]
    pub epsilon: f64,
    #[arg(long, env = "TSPN_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub shifts: usize,
    /// Crossings allowed per square side.
    #[arg(long)]
    pub r: Option<usize>,
    /// Portal parameter, a power of two.
    #[arg(long)]
    pub m: Option<i64>,
    #[arg(long)]
    pub shadow_cap: Option<usize>,
    #[arg(long)]
    pub reflect_cap: Option<usize>,
}

impl SolverArgs {
    pub fn config(&self) -> Result<PtasConfig> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(TspnError::Argument(format!("epsilon = {} not in (0, 1]", self.epsilon)));
        }
        let mut cfg = PtasConfig {
            epsilon: self.epsilon,
            seed: self.seed,
            shifts: self.shifts.max(1),
            r: self.r,
            m: self.m,
            ..Default::default()
        };
        if self.shadow_cap.is_some() || self.reflect_cap.is_some() {
            let mut caps = cfg.caps();
            caps.shadow_cap = self.shadow_cap.unwrap_or(caps.shadow_cap);
            caps.reflect_cap = self.reflect_cap.unwrap_or(caps.reflect_cap);
            cfg.caps = Some(caps);
        }
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    /// Instance file (`TSPN-SEG`, or `TSPN-AXIS` with `--algo axis`).
    pub instance: PathBuf,
    #[arg(long, value_enum, default_value_t = Algo::Ptas)]
    pub algo: Algo,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Also write the tour here.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    pub instance: PathBuf,
    pub tour: PathBuf,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// One of: oracle-vs-hk, uncross-monotone, inner-dp, patch, shadow-h3, ptas-ratio.
    #[arg(long)]
    pub suite: String,
    /// Number of seeded cases.
    #[arg(long, default_value_t = 20)]
    pub seeds: u64,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, value_enum, default_value_t = Kind::Uniform)]
    pub kind: Kind,
    #[arg(long, default_value_t = 6)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub count: u64,
    #[command(flatten)]
    pub params: GenParamArgs,
    /// Algorithms to compare, comma separated.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "ptas,oracle,coverline,nn2opt")]
    pub algos: Vec<Algo>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Append wall-clock milliseconds; output is then no longer reproducible.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Args, Debug)]
pub struct RenderArgs {
    pub instance: PathBuf,
    #[arg(long)]
    pub tour: Option<PathBuf>,
    #[arg(long, short)]
    pub out: PathBuf,
    /// Extra layers, comma separated.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub layers: Vec<Layer>,
    /// Epsilon and seed of the drawn dissection.
    #[arg(long, default_value_t = 0.5)]
    pub epsilon: f64,
    #[arg(long, env = "TSPN_SEED", default_value_t = 0)]
    pub seed: u64,
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn std::io::Write, err: &mut dyn std::io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if code == 0 {
                write!(out, "{}", e.render())
            } else {
                let usage = <Cli as clap::CommandFactory>::command().render_usage();
                write!(err, "{}\n{usage}\n", e.render())
            };
            return code;
        }
    };
    if let Some(t) = cli.threads {
        // Fails only if a pool already exists, e.g. on a second call in-process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global();
    }
    match execute(&cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn execute(cmd: &Command, out: &mut dyn std::io::Write) -> Result<i32> {
    let mut text = String::new();
    let code = match cmd {
        Command::Generate(a) => cmd_generate(a, &mut text)?,
        Command::Solve(a) => cmd_solve(a, &mut text)?,
        Command::Analyze(a) => cmd_analyze(a, &mut text)?,
        Command::Verify(a) => cmd_verify(a, &mut text)?,
        Command::Bench(a) => cmd_bench(a, &mut text)?,
        Command::Render(a) => cmd_render(a, &mut text)?,
    };
    out.write_all(text.as_bytes())?;
    Ok(code)
}

fn gen_params(p: &GenParamArgs, epsilon: f64) -> GenParams {
    GenParams {
        lambda: p.lambda,
        width: p.width,
        height: p.height,
        epsilon,
        gap: p.gap,
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

pub fn cmd_generate(a: &GenerateArgs, text: &mut String) -> Result<i32> {
    let inst = generate(a.kind.into(), a.n, &gen_params(&a.params, a.epsilon), a.seed)?;
    let s = format_instance(&inst);
    match &a.out {
        Some(p) => write_file(p, &s)?,
        None => text.push_str(&s),
    }
    Ok(0)
}

fn plain_report(name: &str, tour: Tour, inst: &Instance) -> SolveReport {
    let cost = tour_cost(&tour);
    SolveReport {
        cost,
        stages: vec![(name.to_string(), cost)],
        feasible: is_feasible(&tour, inst),
        fallback: false,
        tour,
        diagnostics: vec![],
    }
}

/// Solves with the chosen algorithm; the tour is audited before returning.
pub fn solve_with(inst: &Instance, algo: Algo, cfg: &PtasConfig) -> Result<SolveReport> {
    inst.validate()?;
    let rep = match algo {
        Algo::Ptas => solve_ptas(inst, cfg)?,
        Algo::Oracle => {
            let r = exact_oracle(inst, ORACLE_MAX_N, DEFAULT_TOL)?;
            plain_report("oracle", r.tour, inst)
        }
        Algo::Coverline => plain_report("coverline", coverline_stitch(inst), inst),
        Algo::Nn2opt => {
            let bc = BaselineConfig {
                kind: BaselineKind::Nn2Opt,
                seed: cfg.seed,
                ..Default::default()
            };
            plain_report("nn2opt", nn_2opt(inst, &bc), inst)
        }
        Algo::Axis => return Err(TspnError::Argument("--algo axis needs a TSPN-AXIS instance".into())),
    };
    if !rep.feasible || !is_feasible(&rep.tour, inst) {
        return Err(TspnError::Infeasible(format!(
            "tour misses segments {:?}",
            missed_segments(&rep.tour, inst)
        )));
    }
    Ok(rep)
}

fn solve_axis_file(path: &Path, cfg: &PtasConfig) -> Result<SolveReport> {
    let text = std::fs::read_to_string(path)?;
    let segs = parse_axis(&text, &path.display().to_string())?;
    let sol = solve_axis_parallel(&segs, cfg)?;
    if !axis_feasible(&sol.tour, &segs, 1e-7) {
        return Err(TspnError::Infeasible("joined tour misses a segment".into()));
    }
    Ok(SolveReport {
        cost: sol.cost,
        stages: vec![("axis".into(), sol.cost)],
        feasible: true,
        fallback: false,
        tour: sol.tour,
        diagnostics: vec![
            ("candidates".into(), sol.candidates.to_string()),
            ("point".into(), format!("{} {}", sol.point.x, sol.point.y)),
        ],
    })
}

pub fn cmd_solve(a: &SolveArgs, text: &mut String) -> Result<i32> {
    let cfg = a.solver.config()?;
    let rep = if a.algo == Algo::Axis {
        solve_axis_file(&a.instance, &cfg)?
    } else {
        solve_with(&read_instance(&a.instance)?, a.algo, &cfg)?
    };
    if let Some(p) = &a.out {
        write_tour(&rep.tour, p)?;
    }
    write!(text, "{rep}").unwrap();
    Ok(if rep.fallback { 2 } else { 0 })
}

pub fn analyze_report(inst: &Instance, tour: &Tour) -> Result<String> {
    let missed = missed_segments(tour, inst);
    if !missed.is_empty() {
        return Err(TspnError::Infeasible(format!("tour misses segments {missed:?}")));
    }
    let mut s = String::new();
    writeln!(s, "TOUR points={} legs={} cost={}", tour.len(), tour.leg_count(), tour_cost(tour)).unwrap();
    let prof = shadow_profile(std::slice::from_ref(tour), None);
    writeln!(s, "SHADOW max={} breakpoints={}", prof.max(), prof.breakpoints.len()).unwrap();

    let classes = classify_points(tour, inst)?;
    let mut counts = [0usize; 4];
    let (mut pure, mut tips) = (0, 0);
    for c in classes.iter().flatten() {
        let k = match c.kind {
            PointKind::Straight => 0,
            PointKind::Break => 1,
            PointKind::ReflectionLeft => 2,
            PointKind::ReflectionRight => 3,
        };
        counts[k] += 1;
        pure += usize::from(c.pure);
        tips += usize::from(c.at_tip);
    }
    writeln!(
        s,
        "CLASSES straight={} break={} reflection_left={} reflection_right={} pure={pure} at_tip={tips}",
        counts[0], counts[1], counts[2], counts[3]
    )
    .unwrap();

    let lines = build_cover_lines(inst);
    writeln!(s, "COVERLINES count={} spacing={} y0={}", lines.count, lines.spacing, lines.y0).unwrap();
    for k in -1..=lines.count as i64 {
        let paths = restrict_to_strip(tour, k, &lines);
        if paths.is_empty() {
            continue;
        }
        let count = |kind| paths.iter().filter(|p| p.kind == kind).count();
        let (mut parts, mut sinks, mut zigzags) = (0, 0, 0);
        for p in &paths {
            if !matches!(p.kind, StripPathKind::Loop | StripPathKind::Ladder | StripPathKind::Closed) {
                continue;
            }
            let part = partition_zigzag_sink(p, &classes, tour, inst, lines.y(k));
            parts += part.parts.len();
            for sec in part.parts.iter().flat_map(|p| &p.sections) {
                match sec.kind {
                    SectionKind::Sink => sinks += 1,
                    SectionKind::ZigZag => zigzags += 1,
                }
            }
        }
        writeln!(
            s,
            "STRIP {k} loops={} ladders={} coverline_loops={} closed={} parts={parts} sinks={sinks} zigzags={zigzags}",
            count(StripPathKind::Loop),
            count(StripPathKind::Ladder),
            count(StripPathKind::CoverLineLoop),
            count(StripPathKind::Closed),
        )
        .unwrap();
    }
    write!(s, "{}", check_optimal_structure(tour, inst)?).unwrap();
    Ok(s)
}

pub fn cmd_analyze(a: &AnalyzeArgs, text: &mut String) -> Result<i32> {
    let inst = read_instance(&a.instance)?;
    let tour = read_tour(&a.tour)?;
    text.push_str(&analyze_report(&inst, &tour)?);
    Ok(0)
}

pub const SUITES: [&str; 6] = ["oracle-vs-hk", "uncross-monotone", "inner-dp", "patch", "shadow-h3", "ptas-ratio"];

/// Runs one suite over `seeds` cases and returns failure descriptions.
pub fn run_suite(suite: &str, seeds: u64) -> Result<Vec<String>> {
    let mut bad = Vec::new();
    match suite {
        "oracle-vs-hk" => {
            for seed in 0..seeds {
                let inst = generate(GenKind::Uniform, 3 + (seed as usize % 4), &GenParams::default(), seed)?;
                let opt = exact_oracle(&inst, ORACLE_MAX_N, DEFAULT_TOL)?.cost;
                let hk = held_karp_discretized(&inst, 33)?;
                if opt > hk + 1e-9 || hk - opt > 2.0 * inst.n() as f64 * inst.lambda / 33.0 {
                    bad.push(format!("seed {seed}: oracle {opt} grid {hk}"));
                }
            }
        }
        "uncross-monotone" => {
            let mut rng = ChaCha8Rng::seed_from_u64(seeds);
            for case in 0..seeds {
                let n = rng.gen_range(3..12);
                let pts: Vec<Point> = (0..n).map(|_| Point::new(rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0))).collect();
                let t = Tour::from_points(&pts, true);
                let u = uncross(&t).unwrap_or_else(|s| s.partial);
                if tour_cost(&u) > tour_cost(&t) + 1e-9 {
                    bad.push(format!("case {case}"));
                }
            }
        }
        "inner-dp" => {
            for seed in 0..seeds {
                let p = random_leaf_problem(seed, 4, 2, 2);
                let dp = inner_dp_solve(&p, InnerCaps::default())?.cost;
                let bf = brute_force_square(&p)?;
                if (dp - bf).abs() > 1e-6 * bf.abs().max(1.0) {
                    bad.push(format!("seed {seed}: dp {dp} brute force {bf}"));
                }
            }
        }
        "patch" => {
            let mut rng = ChaCha8Rng::seed_from_u64(seeds);
            for case in 0..seeds {
                let mut pts = Vec::new();
                let mut x = 0.0;
                for _ in 0..rng.gen_range(2..8) {
                    x += rng.gen_range(0.2..2.0);
                    pts.push(Point::new(x, rng.gen_range(0.1..3.0)));
                    x += rng.gen_range(0.2..2.0);
                    pts.push(Point::new(x, -rng.gen_range(0.1..3.0)));
                }
                let t = Tour::from_points(&pts, true);
                let piece = LinePiece::new(Point::new(-1.0, 0.0), Point::new(x + 1.0, 0.0));
                let p = patch(&t, &piece);
                if piece_crossings(&p, &piece).len() > 2 || tour_cost(&p) > tour_cost(&t) + 6.0 * piece.length() + 1e-9 {
                    bad.push(format!("case {case}"));
                }
            }
        }
        "shadow-h3" => {
            let params = GenParams {
                height: 3.0,
                width: 8.0,
                ..Default::default()
            };
            for seed in 0..seeds {
                let inst = generate(GenKind::PackedBox, 3 + (seed as usize % 5), &params, seed)?;
                let t = exact_oracle(&inst, ORACLE_MAX_N, DEFAULT_TOL)?.tour;
                let m = shadow_profile(std::slice::from_ref(&t), None).max();
                if m > 2 {
                    bad.push(format!("seed {seed}: shadow {m}"));
                }
            }
        }
        "ptas-ratio" => {
            let mut within = 0;
            for seed in 0..seeds {
                let inst = generate(GenKind::Uniform, 2 + (seed as usize % 5), &GenParams::default(), seed)?;
                let cfg = PtasConfig {
                    seed,
                    ..Default::default()
                };
                let rep = solve_ptas(&inst, &cfg)?;
                let opt = exact_oracle(&inst, ORACLE_MAX_N, DEFAULT_TOL)?.cost;
                if !is_feasible(&rep.tour, &inst) {
                    bad.push(format!("seed {seed}: infeasible"));
                }
                if rep.cost <= (1.0 + cfg.epsilon) * opt + 1e-9 {
                    within += 1;
                }
            }
            if within * 100 < 95 * seeds {
                bad.push(format!("only {within}/{seeds} within 1+epsilon"));
            }
        }
        other => return Err(TspnError::Argument(format!("unknown suite `{other}`; known: {}", SUITES.join(", ")))),
    }
    Ok(bad)
}

pub fn cmd_verify(a: &VerifyArgs, text: &mut String) -> Result<i32> {
    let bad = run_suite(&a.suite, a.seeds)?;
    for b in &bad {
        writeln!(text, "VIOLATION {b}").unwrap();
    }
    let v = if bad.is_empty() { "PASS" } else { "FAIL" };
    writeln!(text, "SUITE {} {v} {} cases", a.suite, a.seeds).unwrap();
    Ok(if bad.is_empty() { 0 } else { 1 })
}

pub fn cmd_bench(a: &BenchArgs, text: &mut String) -> Result<i32> {
    let cfg = a.solver.config()?;
    let params = gen_params(&a.params, a.solver.epsilon);
    writeln!(text, "# seed algo cost ratio_to_first{}", if a.timing { " ms" } else { "" }).unwrap();
    let mut fell_back = false;
    for seed in 0..a.count {
        let inst = generate(a.kind.into(), a.n, &params, seed)?;
        let mut first = None;
        for &algo in &a.algos {
            if algo == Algo::Axis {
                return Err(TspnError::Argument("bench runs on vertical instances; axis is not available".into()));
            }
            let c = PtasConfig { seed, ..cfg };
            let t0 = Instant::now();
            let rep = solve_with(&inst, algo, &c)?;
            let ms = t0.elapsed().as_secs_f64() * 1e3;
            fell_back |= rep.fallback;
            let f = *first.get_or_insert(rep.cost);
            let ratio = if f > 0.0 { rep.cost / f } else { 1.0 };
            write!(text, "{seed} {} {:.9} {ratio:.6}", algo_name(algo), rep.cost).unwrap();
            if a.timing {
                write!(text, " {ms:.1}").unwrap();
            }
            text.push('\n');
        }
    }
    Ok(if fell_back { 2 } else { 0 })
}

fn algo_name(a: Algo) -> &'static str {
    match a {
        Algo::Ptas => "ptas",
        Algo::Oracle => "oracle",
        Algo::Coverline => "coverline",
        Algo::Nn2opt => "nn2opt",
        Algo::Axis => "axis",
    }
}

/// SVG 1.1 drawing; y grows upwards in instance space.
pub fn render_svg(inst: &Instance, tour: Option<&Tour>, layers: &[Layer], epsilon: f64, seed: u64) -> Result<String> {
    let bb = inst.bounding_box()?;
    let pad = 1.0;
    let (x0, y0) = (bb.x_min - pad, bb.y_min - pad);
    let (w, h) = (bb.width() + 2.0 * pad, bb.height() + 2.0 * pad);
    let px = 600.0 / w.max(h);
    let sx = |x: f64| (x - x0) * px;
    let sy = |y: f64| (y0 + h - y) * px;
    let mut s = String::new();
    writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#).unwrap();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{:.0}" height="{:.0}" viewBox="0 0 {:.3} {:.3}">"#,
        w * px,
        h * px,
        w * px,
        h * px
    )
    .unwrap();
    writeln!(s, r#"<rect x="0" y="0" width="100%" height="100%" fill="white"/>"#).unwrap();

    if layers.contains(&Layer::Coverlines) {
        let lines = build_cover_lines(inst);
        writeln!(s, r##"<g id="coverlines" stroke="#9ab" stroke-width="0.8" stroke-dasharray="4 3">"##).unwrap();
        for k in 0..lines.count {
            let y = sy(lines.y(k as i64));
            writeln!(s, r#"<line x1="0" y1="{y:.3}" x2="{:.3}" y2="{y:.3}"/>"#, w * px).unwrap();
        }
        writeln!(s, "</g>").unwrap();
    }
    if layers.contains(&Layer::Dissection) {
        let scaled = scale(&perturb_snap(inst, epsilon)?)?;
        let qt = build_quadtree(&scaled, epsilon, seed, None)?;
        let rho = qt.rho;
        let cells = qt.cells();
        writeln!(s, r##"<g id="dissection" stroke="#d84" stroke-width="0.8" fill="none">"##).unwrap();
        for i in 0..=cells {
            let x = sx((qt.root.x0 + i as f64 * qt.base_side) / rho);
            let y = sy((qt.root.y0 + i as f64 * qt.base_side) / rho);
            let (lo, hi) = (qt.root.y0 / rho, (qt.root.y0 + qt.root.side) / rho);
            let (l, r) = (qt.root.x0 / rho, (qt.root.x0 + qt.root.side) / rho);
            writeln!(s, r#"<line x1="{x:.3}" y1="{:.3}" x2="{x:.3}" y2="{:.3}"/>"#, sy(lo), sy(hi)).unwrap();
            writeln!(s, r#"<line x1="{:.3}" y1="{y:.3}" x2="{:.3}" y2="{y:.3}"/>"#, sx(l), sx(r)).unwrap();
        }
        writeln!(s, "</g>").unwrap();
    }

    writeln!(s, r##"<g id="segments" stroke="#222" stroke-width="2" stroke-linecap="round">"##).unwrap();
    for seg in &inst.segments {
        writeln!(
            s,
            r#"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}"/>"#,
            sx(seg.x),
            sy(seg.y_bot),
            sx(seg.x),
            sy(seg.y_top)
        )
        .unwrap();
    }
    writeln!(s, "</g>").unwrap();

    if let Some(t) = tour {
        let pts: Vec<String> = t.points.iter().map(|p| format!("{:.3},{:.3}", sx(p.pos.x), sy(p.pos.y))).collect();
        let tag = if t.closed { "polygon" } else { "polyline" };
        writeln!(s, r##"<{tag} id="tour" points="{}" fill="none" stroke="#c22" stroke-width="1.5"/>"##, pts.join(" ")).unwrap();
        writeln!(s, r##"<g id="touch" fill="#c22">"##).unwrap();
        for p in t.points.iter().filter(|p| matches!(p.binding, Binding::Segment(_))) {
            writeln!(s, r#"<circle cx="{:.3}" cy="{:.3}" r="3"/>"#, sx(p.pos.x), sy(p.pos.y)).unwrap();
        }
        writeln!(s, "</g>").unwrap();
    }
    writeln!(s, "</svg>").unwrap();
    Ok(s)
}

pub fn cmd_render(a: &RenderArgs, _text: &mut String) -> Result<i32> {
    let inst = read_instance(&a.instance)?;
    let tour = a.tour.as_ref().map(read_tour).transpose()?;
    let svg = render_svg(&inst, tour.as_ref(), &a.layers, a.epsilon, a.seed)?;
    write_file(&a.out, &svg)?;
    Ok(0)
}
