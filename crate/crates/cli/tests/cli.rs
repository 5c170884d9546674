use std::fs;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rotor-explore"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn adversary_path_passes() {
    let o = cli(&["adversary-path", "--agent", "rotor-router", "--n", "10"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        stdout(&o),
        "experiment,agent,n,param,bound,measured,verdict\n\
         adversary-path,rotor-router,10,entry_arcs=9;need=9,81,81,pass\n"
    );
}

#[test]
fn adversary_cubic_reports_bound() {
    let o = cli(&["adversary-cubic", "--agent", "rotor-router", "--n", "18", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["verdict"], "pass");
    assert_eq!(report["rows"][0]["bound"], "180");
}

#[test]
fn instance_export_and_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("g.json");
    let g = graph.to_str().unwrap();
    let o = cli(&["adversary-cubic", "--n", "18", "--instance-out", g]);
    assert_eq!(o.status.code(), Some(0));
    let sidecar: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("g.sidecar.json")).unwrap()).unwrap();
    assert_eq!(sidecar["start"], 0);
    assert_eq!(sidecar["bound"], 180);
    assert!(sidecar["log"]["p"].is_u64());
    assert!(sidecar["log"]["v_star"].is_u64());

    let agent = dir.path().join("a.json");
    fs::write(&agent, r#"{"tables":{"2":[1,2],"6":[1,2,3,4,5,6]},"extension":"cycle"}"#).unwrap();
    let trace = dir.path().join("t.csv");
    let o = cli(&[
        "simulate",
        "--graph",
        g,
        "--agent",
        agent.to_str().unwrap(),
        "--start",
        "0",
        "--stop",
        "covered",
        "--out",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(&trace).unwrap();
    assert!(csv.starts_with("step,node,outport,next_node\n0,0,1,6\n"));
    let covered: u64 = csv
        .lines()
        .find_map(|l| l.strip_prefix("covered_at,"))
        .unwrap()
        .parse()
        .unwrap();
    assert!(covered >= 180);

    // Same agent written as a script and as the builtin gives the same trace.
    let builtin = cli(&["simulate", "--graph", g, "--stop", "covered"]);
    assert_eq!(stdout(&builtin), csv);
}

#[test]
fn simulate_not_stopped_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("p.json");
    fs::write(&graph, r#"{"n":3,"ports":[[1],[2,0],[1]]}"#).unwrap();
    let o = cli(&[
        "simulate",
        "--graph",
        graph.to_str().unwrap(),
        "--agent",
        "always-1",
        "--start",
        "2",
        "--stop",
        "target:0",
        "--cap",
        "50",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bruteforce_and_sweep() {
    let o = cli(&["bruteforce-path", "--n", "2..=8"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 8);

    let o = cli(&["rotor-upper", "--n", "20,40", "--m", "2n", "--seed", "1..=3", "--factor", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("assumption"));

    // An absurd factor must fail the sweep.
    let o = cli(&["rotor-upper", "--n", "30", "--m", "60", "--factor", "0.001"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn deterministic_reports() {
    let a = cli(&["rotor-upper", "--n", "15..18", "--seed", "4,5"]);
    let b = cli(&["rotor-upper", "--n", "15..18", "--seed", "4,5"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn usage_errors_are_distinct() {
    assert_eq!(cli(&["adversary-path", "--n", "x"]).status.code(), Some(2));
    assert_eq!(cli(&["adversary-path", "--agent", "nobody", "--n", "5"]).status.code(), Some(2));
    assert_eq!(cli(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        cli(&["adversary-path", "--n", "3,4", "--instance-out", "/tmp/never-written.json"]).status.code(),
        Some(2)
    );
    // Runtime errors (here: a bad graph file) use their own code.
    assert_eq!(cli(&["simulate", "--graph", "/nonexistent/g.json"]).status.code(), Some(3));
    assert_eq!(cli(&["bruteforce-path", "--n", "20"]).status.code(), Some(3));
}
