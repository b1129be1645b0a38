use std::path::PathBuf;
use std::process::{Command, Output};

use mpicheck::report::{Report, VerdictKind, WitnessDetail};

fn example(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mpicheck"))
        .args(args)
        .env_remove(mpicheck::MAX_EVENTS_VAR)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_program(dir: &tempfile::TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn json(path: &str, extra: &[&str]) -> (Report, i32) {
    let mut args = vec!["check", path, "--json"];
    args.extend_from_slice(extra);
    let o = run(&args);
    let report: Report = serde_json::from_slice(&o.stdout).expect("valid report");
    (report, o.status.code().unwrap())
}

#[test]
fn check_prog2_reports_a_three_pair_cycle() {
    let (r, code) = json(example("prog2.mdl").to_str().unwrap(), &[]);
    assert_eq!(code, 1);
    assert_eq!(r.verdict, VerdictKind::Deadlock);
    assert_eq!(r.phase, "smodel");
    match r.witness.unwrap().detail {
        WitnessDetail::MdgCycle { pairs } => assert_eq!(pairs.len(), 3),
        other => panic!("{other:?}"),
    }
}

#[test]
fn check_prog3_reports_the_ratio_solution() {
    let (r, code) = json(example("prog3.mdl").to_str().unwrap(), &[]);
    assert_eq!(code, 0);
    assert_eq!(r.phase, "l0");
    assert_eq!(r.reg_solutions, [1, 2, 1]);
    assert_eq!(r.lcms, [2]);
    assert_eq!(r.sliced_times, [Some(2), Some(1), Some(2)]);
    assert_eq!(r.reg_equations.len(), 4);
    assert!(r.fpp_trace.is_none());
}

#[test]
fn check_prog10_trace_shows_both_pools() {
    let (r, code) = json(example("prog10.mdl").to_str().unwrap(), &["--trace"]);
    assert_eq!(code, 0);
    assert_eq!(r.phase, "l2");
    let trace = r.fpp_trace.unwrap();
    let pool = |k: usize| -> Vec<String> { trace[k].pool.iter().map(|e| format!("{}: {}", e.node, e.power)).collect() };
    assert_eq!(pool(0), ["P0: (ac)^2", "P1: (ac)^3", "P2: b^4"]);
    assert_eq!(pool(1), ["P0: b^4", "P1: (ac)^1", "P2: b^4"]);
    let comps: Vec<Vec<String>> = trace[0]
        .reg_components
        .iter()
        .map(|c| c.iter().map(|(n, _)| n.clone()).collect())
        .collect();
    assert_eq!(comps, [vec!["P0", "P1"], vec!["P2"]]);
}

#[test]
fn text_trace_narrates_the_steps() {
    let o = run(&["check", example("prog3.mdl").to_str().unwrap(), "--trace"]);
    let out = stdout(&o);
    assert!(out.contains("p0 : p1 = 1 : 2"), "{out}");
    assert!(out.contains("lcm 2"), "{out}");
    assert!(out.contains("sliced loop times: P0 2, P1 1, P2 2"), "{out}");
    assert!(out.contains("verdict: deadlock-free"), "{out}");
}

#[test]
fn report_round_trips_and_is_stable() {
    let path = example("prog10.mdl");
    let (a, _) = json(path.to_str().unwrap(), &["--trace"]);
    let (b, _) = json(path.to_str().unwrap(), &["--trace"]);
    let strip = |mut r: Report| {
        r.timings = Default::default();
        r
    };
    let a = strip(a);
    assert_eq!(a, strip(b));
    let again: Report = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
    assert_eq!(again, a);
}

#[test]
fn forced_methods_agree_on_the_examples() {
    for name in ["prog2.mdl", "prog3.mdl", "prog8.mdl", "prog9.mdl", "prog10.mdl", "prog18.mdl"] {
        let path = example(name);
        let auto = run(&["check", path.to_str().unwrap()]).status.code();
        let l2 = run(&["check", path.to_str().unwrap(), "--via", "l2"]).status.code();
        assert_eq!(auto, l2, "{name}");
    }
}

#[test]
fn smodel_refuses_endless_loops() {
    let o = run(&["check", example("prog3.mdl").to_str().unwrap(), "--via", "smodel"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn parse_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_program(&dir, "bad.mdl", "node P0 { send a to }");
    let o = run(&["check", &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
    let unknown = write_program(&dir, "unknown.mdl", "node P0 { send a to P7 }");
    assert_eq!(run(&["check", &unknown]).status.code(), Some(2));
    assert_eq!(run(&["check", "/nonexistent/file.mdl"]).status.code(), Some(2));
}

#[test]
fn event_cap_comes_from_the_environment() {
    let path = example("prog9.mdl");
    let o = Command::new(env!("CARGO_BIN_EXE_mpicheck"))
        .args(["check", path.to_str().unwrap()])
        .env(mpicheck::MAX_EVENTS_VAR, "4")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_mpicheck"))
        .args(["check", path.to_str().unwrap()])
        .env(mpicheck::MAX_EVENTS_VAR, "lots")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn empty_nodes_are_noted() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_program(&dir, "e.mdl", "node P0 { send a to P1 }\nnode P1 { recv a from P0 }\nnode P2 { }");
    let (r, code) = json(&p, &[]);
    assert_eq!(code, 0);
    assert_eq!(r.notes.len(), 1);
    assert!(r.notes[0].contains("P2"));
}

#[test]
fn mdg_dot_for_prog2_highlights_the_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.dot");
    let o = run(&["mdg", example("prog2.mdl").to_str().unwrap(), "--dot", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let dot = std::fs::read_to_string(out).unwrap();
    assert!(dot.starts_with("digraph mdg {"));
    assert_eq!(dot.matches("[label=").count(), 3);
    assert_eq!(dot.matches("->").count(), 3);
    assert_eq!(dot.matches("color=red").count(), 3);
}

#[test]
fn mdg_single_pair_has_no_edges() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_program(&dir, "one.mdl", "node P0 { send a to P1 }\nnode P1 { recv a from P0 }");
    let o = run(&["mdg", &p]);
    assert_eq!(o.status.code(), Some(0));
    let dot = stdout(&o);
    assert_eq!(dot.matches("[label=").count(), 1);
    assert_eq!(dot.matches("->").count(), 0);
}

/// Kahn's algorithm over the `nA -> nB` lines.
fn acyclic(dot: &str) -> bool {
    let n = dot.matches("[label=").count();
    let edges: Vec<(usize, usize)> = dot
        .lines()
        .filter_map(|l| {
            let (a, b) = l.trim().trim_end_matches(';').split_once(" -> ")?;
            let b = b.split_whitespace().next()?;
            Some((a.trim_start_matches('n').parse().ok()?, b.trim_start_matches('n').parse().ok()?))
        })
        .collect();
    let mut indeg = vec![0; n];
    for &(_, b) in &edges {
        indeg[b] += 1;
    }
    let mut ready: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut seen = 0;
    while let Some(v) = ready.pop() {
        seen += 1;
        for &(a, b) in &edges {
            if a == v {
                indeg[b] -= 1;
                if indeg[b] == 0 {
                    ready.push(b);
                }
            }
        }
    }
    seen == n
}

#[test]
fn mdg_of_prog9_and_sliced_prog3_is_acyclic() {
    for name in ["prog9.mdl", "prog3.mdl"] {
        let o = run(&["mdg", example(name).to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{name}");
        let dot = stdout(&o);
        assert_eq!(dot.matches("[label=").count(), 8, "{name}");
        assert!(acyclic(&dot), "{name}");
    }
}

#[test]
fn mdg_refuses_nested_endless_loops() {
    let o = run(&["mdg", example("prog10.mdl").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn reg_prints_equations_and_solution() {
    let o = run(&["reg", example("prog3.mdl").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    for line in ["p0 : p1 = 1 : 2      a:", "p0 : p2 = 1 : 1      c:", "p0 : p1 = 1 : 2      b:", "p1 : p2 = 2 : 1      d:"] {
        assert!(out.contains(line), "{out}");
    }
    assert!(out.contains("p0 : p1 : p2 = 1 : 2 : 1"), "{out}");
}

#[test]
fn reg_single_node() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_program(&dir, "solo.mdl", "node P0 { }");
    let o = run(&["reg", &p]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "no equations; p0 = 1");
}

#[test]
fn reg_reports_conflicts() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_program(
        &dir,
        "clash.mdl",
        "node P0 { for inf { send a to P1, send b to P1, send b to P1 } }\n\
         node P1 { for inf { recv a from P0, recv b from P0 } }",
    );
    let o = run(&["reg", &p]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains("inconsistent: p0 : p1 = 1 : 1, p0 : p1 = 2 : 1"), "{out}");
}

#[test]
fn simulate_exit_codes() {
    let o = run(&["simulate", example("prog2.mdl").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("trace: (initial state)"));
    assert_eq!(run(&["simulate", example("prog10.mdl").to_str().unwrap()]).status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let crossed = write_program(
        &dir,
        "crossed.mdl",
        "node P0 { send a to P1, recv b from P1 }\nnode P1 { send b to P0, recv a from P0 }",
    );
    let o = run(&["simulate", &crossed]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains("stuck: {P0, P1}"), "{out}");
    assert!(out.contains("P0: a: P0→P1"), "{out}");

    let o = run(&["simulate", example("prog10.mdl").to_str().unwrap(), "--max-states", "3"]);
    assert_eq!(o.status.code(), Some(3));
}
