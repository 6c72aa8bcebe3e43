use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mpcc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mpcc")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

fn num(s: &str) -> f64 {
    s.parse().unwrap_or_else(|_| panic!("not a number: `{s}`"))
}

#[test]
fn unknown_problem_is_a_usage_error_with_listing() {
    let o = mpcc(&["solve", "--problem", "nosuch"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    for name in mpcc_core::problems::NAMES {
        assert!(err.contains(name), "{name} missing from {err}");
    }
}

#[test]
fn bad_flags_are_usage_errors() {
    for args in [
        vec!["solve", "--scheme", "sqp"],
        vec!["solve", "--kappa", "2"],
        vec!["solve", "--z0", "1,2"],
        vec!["solve", "--bogus"],
        vec!["classify", "--problem", "scholtes4", "--point", "0,0"],
        vec!["classify", "--problem", "scholtes4", "--point", "1,1,0"],
        vec!["bench", "--table", "3"],
    ] {
        assert_eq!(mpcc(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn solve_ba_trace_ends_with_minus_two() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let o = mpcc(&["solve", "--problem", "scholtes4", "--scheme", "ba", "--eps-tol", "1e-12", "--trace", trace.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (h, rows) = read_csv(&trace);
    let expected: Vec<&str> = "k,eps,p1,z1,z2,z3,u1,f_up,f_low,min_curv,shift,rank_deficient".split(',').collect();
    assert_eq!(h, expected);
    assert_eq!(rows.len(), 11);
    let last = rows.last().unwrap();
    assert_eq!(num(&last[col(&h, "eps")]), 1e-12);
    assert!((num(&last[col(&h, "u1")]) + 2.0).abs() < 1e-6);
    assert!(stdout(&o).contains("omega: {1}"));
}

#[test]
fn solve_reg_flags_blow_up() {
    let o = mpcc(&["solve", "--problem", "scholtes4", "--scheme", "reg", "--eps-tol", "1e-6"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("multiplier blow-up: yes"), "{}", stdout(&o));
    let o = mpcc(&["solve", "--problem", "scholtes4", "--scheme", "ba", "--eps-tol", "1e-6"]);
    assert!(stdout(&o).contains("multiplier blow-up: no"));
}

#[test]
fn solver_failure_exits_one() {
    // two inner iterations cannot reach the KKT tolerance from (1, 1, 1)
    let o = mpcc(&["solve", "--problem", "scholtes4", "--max-iter", "2"]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    assert!(stdout(&o).contains("status: failed"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let trace = dir.path().join("t.csv");
    fs::write(&cfg, format!("# table run\nproblem = ex9_2_2\nscheme = mlf\neps_tol = 1e-4\ntrace = {}\n", trace.display())).unwrap();
    let o = mpcc(&["solve", "--config", cfg.to_str().unwrap(), "--eps-tol", "1e-6"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (h, rows) = read_csv(&trace);
    assert!(h.contains(&"uL3".to_string()) && h.contains(&"uU1".to_string()));
    assert_eq!(num(&rows.last().unwrap()[1]), 1e-6);

    fs::write(&cfg, "problem = ex9_2_2\nspeed = 3\n").unwrap();
    let o = mpcc(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("speed"));
}

#[test]
fn classify_golden_points() {
    let cases: [(&str, &str, &[&str]); 3] = [
        ("scholtes4", "0,0,0", &["piecewise-M: true", "S: false", "B(via LPCC): true"]),
        ("mstat_counterexample", "0,0", &["M: true", "piecewise-M: false", "partition (∅,{1}): multiplier-infeasible"]),
        ("fritz_john_corner", "0,0", &["A: true", "piecewise-M: false", "partition ({1},∅): multiplier-infeasible"]),
    ];
    for (problem, point, want) in cases {
        let o = mpcc(&["classify", "--problem", problem, "--point", point]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let out = stdout(&o);
        for line in want {
            assert!(out.lines().any(|l| l.trim() == *line || l.trim().starts_with(line)), "{problem}: `{line}` missing in\n{out}");
        }
    }
}

#[test]
fn classify_writes_verdict_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v.csv");
    let o = mpcc(&["classify", "--problem", "mstat_counterexample", "--point", "0,0", "--omega", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (h, rows) = read_csv(&out);
    assert_eq!(h, ["property", "value"]);
    let get = |k: &str| rows.iter().find(|r| r[0] == k).map(|r| r[1].clone()).unwrap();
    assert_eq!(get("M"), "true");
    assert_eq!(get("piecewise_m"), "false");
    assert_eq!(get("b_reduced"), "false");
    assert_eq!(get("failing_partition"), "(∅,{1})");
    assert!((num(&get("descent_slope")) + 2.0).abs() <= 1e-9);
}

fn bench_csv(args: &[&str]) -> (Vec<String>, Vec<Vec<String>>, String) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("b.csv");
    let mut full = args.to_vec();
    full.extend(["--csv", path.to_str().unwrap()]);
    let o = mpcc(&full);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (h, rows) = read_csv(&path);
    (h, rows, stdout(&o))
}

#[test]
fn bench_table_one_ba_column() {
    let (h, rows, md) = bench_csv(&["bench", "--table", "1"]);
    assert!(md.contains("## Table 1: scholtes4"));
    let ba: Vec<_> = rows.iter().filter(|r| r[1] == "BA").collect();
    assert_eq!(ba.len(), 3);
    for r in ba {
        assert_eq!(num(&r[col(&h, "p1")]), 0.0);
        assert!((num(&r[col(&h, "u1")]) + 2.0).abs() <= 1e-6);
        assert!(r[col(&h, "vREG1")].is_empty());
    }
}

#[test]
fn bench_table_two_reg_grows() {
    let (h, rows, _) = bench_csv(&["bench", "--table", "2", "--scheme", "reg"]);
    let v: Vec<f64> = rows.iter().map(|r| num(&r[col(&h, "vREG1")])).collect();
    assert_eq!(v.len(), 3);
    assert!(v[0] >= 1e3 && v[1] > v[0] && v[2] > v[1], "{v:?}");
}

#[test]
fn bench_table_one_reg_values() {
    let (h, rows, _) = bench_csv(&["bench", "--table", "1", "--scheme", "reg"]);
    assert!(rows.iter().all(|r| r[1] == "REG"));
    let r = rows.iter().find(|r| num(&r[2]) == 1e-6).unwrap();
    for (c, want) in [("z1", 1e-3), ("z2", 1e-3), ("z3", 4e-3)] {
        let z = num(&r[col(&h, c)]);
        assert!((z - want).abs() <= 0.1 * want, "{c} = {z}");
    }
}

#[test]
fn csv_output_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for i in 0..2 {
        let t = dir.path().join(format!("t{i}.csv"));
        let b = dir.path().join(format!("b{i}.csv"));
        assert!(mpcc(&["solve", "--problem", "ex9_2_2", "--scheme", "ba", "--trace", t.to_str().unwrap()]).status.success());
        assert!(mpcc(&["bench", "--table", "2", "--csv", b.to_str().unwrap()]).status.success());
        outputs.push((fs::read(t).unwrap(), fs::read(b).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn check_passes_and_times_each_check() {
    let o = mpcc(&["check"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().filter(|l| l.starts_with("PASS") || l.starts_with("FAIL")).collect();
    assert!(lines.len() >= 30);
    assert!(lines.iter().all(|l| l.starts_with("PASS") && l.ends_with(" ms]")), "{out}");
}

#[test]
fn list_prints_registry() {
    let o = mpcc(&["list"]);
    assert_eq!(stdout(&o).lines().count(), mpcc_core::problems::NAMES.len());
}
