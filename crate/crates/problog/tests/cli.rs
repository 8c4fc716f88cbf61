use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use problog::report::QueryReport;

const EXAMPLE: &str = "\
0.8::edge(a,c).  0.7::edge(a,b).  0.8::edge(c,e).
0.6::edge(b,c).  0.9::edge(c,d).  0.5::edge(e,d).
path(X,Y) :- edge(X,Y).
path(X,Y) :- edge(X,Z), path(Z,Y).
";

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("problog-cli-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn example_file() -> PathBuf {
    let path = scratch("example.pl");
    fs::write(&path, EXAMPLE).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_problog"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn exact_prints_the_probability() {
    let p = example_file();
    let out = run(&["exact", "-p", p.to_str().unwrap(), "-q", "path(c,d)"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with("P = 0.94"), "got: {text}");
}

#[test]
fn kbest_prints_probability_and_proofs() {
    let p = example_file();
    let out = run(&["kbest", "-k", "2", "-p", p.to_str().unwrap(), "-q", "path(a,d)"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("P = 0.7956"), "got: {text}");
    assert_eq!(text.matches("proof (p = ").count(), 2);
    assert!(text.contains("edge(a,c)"));
}

#[test]
fn bounds_first_iteration_interval() {
    let p = example_file();
    let out = run(&[
        "bounds", "--delta", "0.5", "--gamma", "0.9", "--beta", "0.5",
        "-p", p.to_str().unwrap(), "-q", "path(c,d)",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("[0.9, 0.98]"), "got: {text}");
}

#[test]
fn json_report_round_trips() {
    let p = example_file();
    let out = run(&["exact", "--json", "-p", p.to_str().unwrap(), "-q", "path(c,d)"]);
    assert!(out.status.success());
    let report: QueryReport = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report.mode, "exact");
    assert!((report.probability.unwrap() - 0.94).abs() < 1e-9);
    let reparsed: QueryReport = serde_json::from_str(&report.to_json()).unwrap();
    assert_eq!(reparsed, report);
}

#[test]
fn seeded_mc_json_is_byte_identical() {
    let p = example_file();
    let args = [
        "mc", "--json", "--delta", "0.02", "--seed", "7",
        "-p", p.to_str().unwrap(), "-q", "path(c,d)",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let report: QueryReport = serde_json::from_str(&stdout(&a)).unwrap();
    assert!((report.probability.unwrap() - 0.94).abs() < 0.05);
    assert!(report.samples.unwrap() >= 1000);
}

#[test]
fn explain_reports_the_best_proof() {
    let p = example_file();
    let out = run(&["explain", "-p", p.to_str().unwrap(), "-q", "path(c,X)"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("P = 0.9"), "got: {text}");
    assert!(text.contains("explanation: edge(c,d)"));
    assert!(text.contains("X = d"));
}

#[test]
fn exit_codes() {
    // 1: unreadable or unparsable program
    let out = run(&["exact", "-p", "/nonexistent.pl", "-q", "path(c,d)"]);
    assert_eq!(out.status.code(), Some(1));
    let bad = scratch("bad.pl");
    fs::write(&bad, "0.5::").unwrap();
    let out = run(&["exact", "-p", bad.to_str().unwrap(), "-q", "path(c,d)"]);
    assert_eq!(out.status.code(), Some(1));

    // 2: query errors (syntax, unknown predicate, misused builtins)
    let p = example_file();
    let out = run(&["exact", "-p", p.to_str().unwrap(), "-q", "path(c"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["exact", "-p", p.to_str().unwrap(), "-q", "nopath(c,d)"]);
    assert_eq!(out.status.code(), Some(2));

    // 3: bounds that cannot reach the requested width
    let out = run(&[
        "bounds", "--delta", "0.0001", "--max-iterations", "1",
        "-p", p.to_str().unwrap(), "-q", "path(a,d)",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn visited_builtins_rejected_outside_mc() {
    let program = scratch("memo.pl");
    fs::write(
        &program,
        format!(
            "{EXAMPLE}\
             memopath(X,Y,A) :- eraseall(visited), memopath(X,Y,[X],A).\n\
             memopath(X,X,A,A).\n\
             memopath(X,Y,A,R) :- X \\== Y, edge(X,Z), recordzifnot(visited,Z,_),\n\
                 memopath(Z,Y,[Z|A],R).\n"
        ),
    )
    .unwrap();
    let out = run(&["exact", "-p", program.to_str().unwrap(), "-q", "memopath(c,d,_)"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr.clone()).unwrap();
    assert!(err.contains("Monte Carlo"), "got: {err}");

    let out = run(&[
        "mc", "--delta", "0.05", "--seed", "3",
        "-p", program.to_str().unwrap(), "-q", "memopath(c,d,_)",
    ]);
    assert!(out.status.success(), "mc rejected memopath");
}

#[test]
fn graph_loading_and_prelude() {
    let graph = scratch("edges.tsv");
    fs::write(&graph, "s\tm\t0.5\nm\tt\t0.5\n").unwrap();
    let program = scratch("rules.pl");
    fs::write(
        &program,
        "path(X,Y,P) :- path(X,Y,[X],P).\n\
         path(X,X,A,A).\n\
         path(X,Y,A,R) :- X \\== Y, edge(X,Z), absent(Z,A), path(Z,Y,[Z|A],R).\n",
    )
    .unwrap();
    let out = run(&[
        "exact",
        "-p", program.to_str().unwrap(),
        "--graph", graph.to_str().unwrap(),
        "-q", "path('s','t',_)",
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).starts_with("P = 0.25"));
}

#[test]
fn dump_script_and_dot() {
    let p = example_file();
    let script = scratch("script.txt");
    let dot = scratch("bdd.dot");
    let out = run(&[
        "exact",
        "-p", p.to_str().unwrap(),
        "-q", "path(a,d)",
        "--dump-script", script.to_str().unwrap(),
        "--dump-dot", dot.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let script_text = fs::read_to_string(&script).unwrap();
    assert_eq!(script_text.lines().count(), 7);
    assert!(script_text.contains("edge(c,e) ∧ edge(e,d)"));
    assert!(script_text.ends_with("top = n6\n"));
    let dot_text = fs::read_to_string(&dot).unwrap();
    assert!(dot_text.starts_with("digraph"));
    assert!(dot_text.contains("edge(c,d)"));
}

#[test]
fn timings_appear_only_on_request() {
    let p = example_file();
    let plain = run(&["exact", "--json", "-p", p.to_str().unwrap(), "-q", "path(c,d)"]);
    assert!(!stdout(&plain).contains("timings"));
    let timed = run(&[
        "exact", "--json", "--timings", "-p", p.to_str().unwrap(), "-q", "path(c,d)",
    ]);
    let report: QueryReport = serde_json::from_str(&stdout(&timed)).unwrap();
    let t = report.timings.unwrap();
    assert!(t.search_secs >= 0.0 && t.bdd_secs >= 0.0);
}
