//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use proptest::strategy::{Just, Strategy, ValueTree};
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

use rotor_explore::adversary::{verify_cubic_bound, verify_path_bound, Verdict};
use rotor_explore::agent::{battery, memory_lower_bound_check, BuiltinAgent, PortFunction};
use rotor_explore::experiments::{brute_force_path_worst_case, rotor_cover_run, upper_bound_verdict};
use rotor_explore::graph::{random_connected_graph, NodeId, PortLabeledGraph};
use rotor_explore::sim::{self, StopCondition};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit: Duration, failures: &mut Vec<String>) {
    if elapsed > limit {
        failures.push(format!("runtime {:.1?} over {:?}", elapsed, limit));
    }
}

fn summarize(failures: Vec<String>, ok: String) -> Outcome {
    if failures.is_empty() {
        outcome(true, ok)
    } else {
        let shown: Vec<_> = failures.iter().take(5).cloned().collect();
        outcome(false, format!("{} failure(s): {}", failures.len(), shown.join("; ")))
    }
}

/// Rotor-router worst case on paths is exactly (n-1)^2 for n = 2..=12.
fn path_exactness() -> Outcome {
    let t0 = Instant::now();
    let mut failures = Vec::new();
    for n in 2..=12usize {
        let want = ((n - 1) * (n - 1)) as u64;
        match brute_force_path_worst_case(&BuiltinAgent::RotorRouter, n, 4 * (n as u64).pow(2)) {
            Ok(r) if r.max_steps == Some(want) && r.unreached.is_empty() => {}
            Ok(r) => failures.push(format!("n={n}: max {:?} != {want}", r.max_steps)),
            Err(e) => failures.push(format!("n={n}: {e}")),
        }
    }
    within(t0.elapsed(), Duration::from_secs(60), &mut failures);
    summarize(failures, format!("max = (n-1)^2 for n=2..=12 in {:.2?}", t0.elapsed()))
}

/// verify_path_bound passes for every battery agent and n = 2..=200.
/// The cap 4n^2 exceeds (n-1)^2, so an uncapped run can only be slower.
fn path_construction() -> Outcome {
    let t0 = Instant::now();
    let mut failures = Vec::new();
    let mut measured = 0;
    let mut vacuous = 0;
    for agent in battery() {
        for n in 2..=200usize {
            match verify_path_bound(&agent, n, 4 * (n as u64).pow(2)) {
                Ok(r) => match r.verdict {
                    Verdict::PassMeasured => {
                        measured += 1;
                        let steps = r.steps_to_target.unwrap();
                        if steps < r.bound || r.entry_arc_count < (n - 1) as u64 {
                            failures.push(format!("{agent} n={n}: inconsistent verdict"));
                        }
                    }
                    Verdict::PassVacuous => vacuous += 1,
                    Verdict::Fail => failures.push(format!(
                        "{agent} n={n}: steps {:?} arcs {}",
                        r.steps_to_target, r.entry_arc_count
                    )),
                },
                Err(e) => failures.push(format!("{agent} n={n}: {e}")),
            }
        }
    }
    within(t0.elapsed(), Duration::from_secs(60), &mut failures);
    summarize(
        failures,
        format!("{measured} measured, {vacuous} vacuous passes in {:.2?}", t0.elapsed()),
    )
}

/// verify_cubic_bound passes for every battery agent and n in {18, 21, 30, 60, 90}.
fn cubic_bound() -> Outcome {
    let t0 = Instant::now();
    let mut failures = Vec::new();
    let mut lines = Vec::new();
    for agent in battery() {
        for n in [18usize, 21, 30, 60, 90] {
            let d = (n / 3) as u64;
            match verify_cubic_bound(&agent, n, sim::default_cap(n)) {
                Ok(r) => {
                    if r.bound != d * d * (d - 1) {
                        failures.push(format!("{agent} n={n}: bound {} != {}", r.bound, d * d * (d - 1)));
                    }
                    if r.v_star_visits > d * (d - 1) {
                        failures.push(format!("{agent} n={n}: v* visited {} > {}", r.v_star_visits, d * (d - 1)));
                    }
                    if !r.verdict.is_pass() {
                        failures.push(format!("{agent} n={n}: cover {:?} < {}", r.cover_time, r.bound));
                    }
                    if agent == BuiltinAgent::RotorRouter {
                        lines.push(format!("n={n}:{}>={}", r.cover_time.map_or(0, |c| c), r.bound));
                    }
                }
                Err(e) => failures.push(format!("{agent} n={n}: {e}")),
            }
        }
    }
    within(t0.elapsed(), Duration::from_secs(120), &mut failures);
    summarize(failures, format!("rotor-router {} in {:.2?}", lines.join(" "), t0.elapsed()))
}

fn lemma1_case(g: &PortLabeledGraph, perm: &[NodeId], agent: &BuiltinAgent) -> Result<(), String> {
    let t = sim::run(g, agent, 0, StopCondition::Covered, 20_000).map_err(|e| e.to_string())?;
    for v in 0..g.node_count() {
        let taken = t.outports_from(v).map_err(|e| e.to_string())?;
        let d = g.degree(v);
        for (i, &p) in taken.iter().enumerate() {
            let want = agent.port(d, i as u64 + 1).map_err(|e| e.to_string())?;
            if p != want {
                return Err(format!("node {v} visit {}: port {p} != port_{d}({}) = {want}", i + 1, i + 1));
            }
        }
    }
    let h = g.relabel(perm);
    let u = sim::run(&h, agent, perm[0], StopCondition::Covered, 20_000).map_err(|e| e.to_string())?;
    let mapped: Vec<(NodeId, usize, NodeId)> =
        t.moves.unwrap().iter().map(|m| (perm[m.node], m.port, perm[m.next])).collect();
    let relabeled: Vec<(NodeId, usize, NodeId)> = u.moves.unwrap().iter().map(|m| (m.node, m.port, m.next)).collect();
    if mapped != relabeled || t.covered_at != u.covered_at {
        return Err("permuted graph produced a different trace".into());
    }
    Ok(())
}

/// Per-node outport sequences and identifier-permutation invariance on 100
/// random graphs with n <= 50, for every battery agent.
fn lemma1_fidelity() -> Outcome {
    let t0 = Instant::now();
    let config = Config {
        cases: 100,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    let strategy = (2usize..=50, proptest::num::u64::ANY, 0.0f64..1.0).prop_flat_map(
        |(n, seed, fill)| {
            let perm = Just((0..n).collect::<Vec<NodeId>>()).prop_shuffle();
            (Just(n), Just(seed), Just(fill), perm)
        },
    );
    let mut failures = Vec::new();
    for case in 0..100 {
        let (n, seed, fill, perm) = strategy.new_tree(&mut runner).unwrap().current();
        let max_m = n * (n - 1) / 2;
        let m = n - 1 + ((max_m - (n - 1)) as f64 * fill * fill) as usize;
        let g = random_connected_graph(n, m, seed).unwrap();
        for agent in battery() {
            if let Err(e) = lemma1_case(&g, &perm, &agent) {
                failures.push(format!("case {case} (n={n}, m={m}, seed={seed}) {agent}: {e}"));
            }
        }
    }
    summarize(failures, format!("100 graphs x {} agents in {:.2?}", battery().len(), t0.elapsed()))
}

/// Rotor-router covers 50 random connected graphs (n <= 200) within 2 m D;
/// failures at factor 2 are re-checked at factor 3 before being reported.
fn rotor_upper_bound() -> Outcome {
    let t0 = Instant::now();
    let fills = [0.0, 0.02, 0.1, 0.3, 0.7];
    let mut worst_ratio = 0.0f64;
    let mut fail2 = Vec::new();
    let mut fail3 = Vec::new();
    for k in 0..50u64 {
        let n = 10 + (k as usize * 37) % 191;
        let max_m = n * (n - 1) / 2;
        let m = n - 1 + ((max_m - (n - 1)) as f64 * fills[k as usize % fills.len()]) as usize;
        let g = random_connected_graph(n, m, 1000 + k).unwrap();
        let run = match rotor_cover_run(&g, sim::default_cap(n)) {
            Ok(r) => r,
            Err(e) => {
                fail3.push(format!("n={n} m={m}: {e}"));
                continue;
            }
        };
        if let Some(c) = run.cover_time {
            worst_ratio = worst_ratio.max(c as f64 / (run.m * run.diameter) as f64);
        }
        if !upper_bound_verdict(&run, 2.0).is_pass() {
            fail2.push(format!("n={n} m={m} D={} cover {:?}", run.diameter, run.cover_time));
            if !upper_bound_verdict(&run, 3.0).is_pass() {
                fail3.push(format!("n={n} m={m} D={} cover {:?} > 3mD", run.diameter, run.cover_time));
            }
        }
    }
    let mut failures = fail3;
    within(t0.elapsed(), Duration::from_secs(120), &mut failures);
    if !fail2.is_empty() {
        println!("  escalated to factor 3: {}", fail2.join("; "));
    }
    summarize(
        failures,
        format!(
            "50 graphs, max cover/(mD) = {worst_ratio:.3}, {} over factor 2, in {:.2?}",
            fail2.len(),
            t0.elapsed()
        ),
    )
}

/// memory_lower_bound_check agrees with 2^M >= d for M <= 10, d <= 1024.
fn memory_bound() -> Outcome {
    let mut failures = Vec::new();
    for bits in 0u32..=10 {
        let states: u64 = (0..bits).fold(1, |acc, _| acc * 2);
        for d in 1u64..=1024 {
            if memory_lower_bound_check(bits, d) != (states >= d) {
                failures.push(format!("M={bits} d={d}"));
            }
        }
    }
    summarize(failures, "11 x 1024 pairs agree".into())
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 6] = [
        ("1 path worst case exact (brute force)", path_exactness),
        ("2 path adversary construction", path_construction),
        ("3 cubic adversary bound", cubic_bound),
        ("4 port-function fidelity and anonymity", lemma1_fidelity),
        ("5 rotor-router cover <= 2mD", rotor_upper_bound),
        ("6 memory lower bound check", memory_bound),
    ];
    let mut all = true;
    for (name, check) in criteria {
        let o = check();
        all &= o.pass;
        println!("criterion {name}: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
