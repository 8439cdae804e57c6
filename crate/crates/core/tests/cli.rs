use std::path::PathBuf;
use std::process::{Command, Output};

use tspn::io::{parse_tour, read_instance};
use tspn::oracle::{exact_oracle, DEFAULT_TOL};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_tspn"));
    c.env_remove("TSPN_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

struct TempDir(PathBuf);

impl TempDir {
    fn new(name: &str) -> Self {
        let p = std::env::temp_dir().join(format!("tspn-cli-{name}-{}", std::process::id()));
        std::fs::create_dir_all(&p).unwrap();
        TempDir(p)
    }

    fn file(&self, name: &str) -> String {
        self.0.join(name).display().to_string()
    }
}

impl Drop for TempDir {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

#[test]
fn generate_is_reproducible_and_parses_back() {
    let d = TempDir::new("gen");
    let (a, b) = (d.file("a.txt"), d.file("b.txt"));
    for f in [&a, &b] {
        assert!(run(&["generate", "--n", "10", "--seed", "7", "--lambda", "2", "-o", f]).status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(read_instance(&a).unwrap().n(), 10);
}

#[test]
fn seed_comes_from_the_environment() {
    let with_env = bin().args(["generate", "--n", "5"]).env("TSPN_SEED", "11").output().unwrap();
    let with_flag = run(&["generate", "--n", "5", "--seed", "11"]);
    assert_eq!(stdout(&with_env), stdout(&with_flag));
    assert_ne!(stdout(&with_flag), stdout(&run(&["generate", "--n", "5"])));
}

#[test]
fn oracle_solve_matches_the_library() {
    let d = TempDir::new("oracle");
    let f = d.file("i.txt");
    run(&["generate", "--n", "5", "--seed", "3", "-o", &f]);
    let o = run(&["solve", &f, "--algo", "oracle"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let cost: f64 = text.lines().next().unwrap().strip_prefix("COST ").unwrap().parse().unwrap();
    let want = exact_oracle(&read_instance(&f).unwrap(), 9, DEFAULT_TOL).unwrap().cost;
    assert!((cost - want).abs() < 1e-12);
}

#[test]
fn ptas_solve_is_feasible_and_stable() {
    let d = TempDir::new("ptas");
    let (f, t) = (d.file("i.txt"), d.file("t.txt"));
    run(&["generate", "--n", "12", "--seed", "5", "--lambda", "2", "-o", &f]);
    let a = run(&["solve", &f, "--seed", "2", "--out", &t]);
    let b = run(&["solve", &f, "--seed", "2"]);
    assert!(matches!(a.status.code(), Some(0) | Some(2)));
    assert!(stdout(&a).contains("FEASIBLE yes"));
    assert_eq!(stdout(&a), stdout(&b));
    let tour = parse_tour(&std::fs::read_to_string(&t).unwrap(), "t").unwrap();
    assert!(tspn::baseline::is_feasible(&tour, &read_instance(&f).unwrap()));
}

#[test]
fn errors_exit_with_one() {
    let d = TempDir::new("err");
    let f = d.file("i.txt");
    run(&["generate", "--n", "4", "-o", &f]);
    let o = run(&["solve", &f, "--algo", "simplex"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(run(&["verify", "--suite", "nonsense"]).status.code(), Some(1));
    assert_eq!(run(&["solve", "/nonexistent/instance"]).status.code(), Some(1));
    assert_eq!(run(&["solve", &f, "--epsilon", "2"]).status.code(), Some(1));
}

#[test]
fn analyze_reports_height_three_shadow() {
    let d = TempDir::new("analyze");
    let (f, t) = (d.file("i.txt"), d.file("t.txt"));
    run(&["generate", "--kind", "packed-box", "--n", "6", "--height", "3", "--width", "6", "--seed", "9", "-o", &f]);
    run(&["solve", &f, "--algo", "oracle", "--out", &t]);
    let a = run(&["analyze", &f, &t]);
    assert_eq!(a.status.code(), Some(0));
    assert!(stdout(&a).contains("CHECK shadow_H3 PASS"));
    assert_eq!(stdout(&a), stdout(&run(&["analyze", &f, &t])));
}

#[test]
fn analyze_rejects_an_infeasible_tour() {
    let d = TempDir::new("infeasible");
    let (f, t) = (d.file("i.txt"), d.file("t.txt"));
    run(&["generate", "--n", "4", "--seed", "1", "-o", &f]);
    std::fs::write(&t, "TSPN-TOUR 1\n0 0 -\n1 0 -\n").unwrap();
    let a = run(&["analyze", &f, &t]);
    assert_eq!(a.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&a.stderr).contains("misses"));
}

#[test]
fn render_draws_segments_tour_and_layers() {
    let d = TempDir::new("render");
    let (f, t, s) = (d.file("i.txt"), d.file("t.txt"), d.file("o.svg"));
    run(&["generate", "--n", "7", "--seed", "2", "-o", &f]);
    assert!(run(&["render", &f, "-o", &s]).status.success());
    let svg = std::fs::read_to_string(&s).unwrap();
    assert!(svg.contains(r#"version="1.1""#));
    assert_eq!(svg.matches("<line").count(), 7);

    run(&["solve", &f, "--algo", "nn2opt", "--out", &t]);
    run(&["render", &f, "--tour", &t, "-o", &s, "--layers", "coverlines"]);
    let svg = std::fs::read_to_string(&s).unwrap();
    assert_eq!(svg.matches("<polygon").count(), 1);
    let inst = read_instance(&f).unwrap();
    let guides = tspn::structure::build_cover_lines(&inst).count;
    assert_eq!(svg.matches("<line").count(), 7 + guides);
}

#[test]
fn verify_suites_pass() {
    for suite in ["oracle-vs-hk", "uncross-monotone", "inner-dp", "patch", "shadow-h3"] {
        let o = run(&["verify", "--suite", suite, "--seeds", "8"]);
        assert_eq!(o.status.code(), Some(0), "{suite}: {}", stdout(&o));
        assert!(stdout(&o).contains("PASS"));
    }
}

#[test]
fn axis_instances_solve() {
    let d = TempDir::new("axis");
    let f = d.file("a.txt");
    let segs = vec![
        tspn::io::AxisSegment::Vertical { id: 0, x: 0.0, lo: 0.0, hi: 1.0 },
        tspn::io::AxisSegment::Vertical { id: 1, x: 4.0, lo: 1.0, hi: 2.0 },
        tspn::io::AxisSegment::Horizontal { id: 2, y: 3.0, lo: 1.0, hi: 2.0 },
    ];
    std::fs::write(&f, tspn::io::format_axis(&segs)).unwrap();
    let o = run(&["solve", &f, "--algo", "axis", "--shifts", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("FEASIBLE yes"));
}

#[test]
fn bench_is_reproducible_without_timing() {
    let args = ["bench", "--n", "4", "--count", "2", "--algos", "ptas,nn2opt"];
    let a = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stdout(&a), stdout(&run(&args)));
    assert_eq!(stdout(&a).lines().count(), 5);
}
