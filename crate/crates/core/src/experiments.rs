//! Brute-force oracles, bound sweeps and report emission.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::adversary::{self, AdversaryError, Verdict};
use crate::agent::{BuiltinAgent, PortFunction};
use crate::graph::{build_path, random_connected_graph, GraphError, PathLabeling, PortLabeledGraph};
use crate::sim::{self, SimError, StopCondition, TraceMode};

/// Largest path the exhaustive oracle enumerates (`2^(n-2)` labelings).
pub const BRUTE_FORCE_MAX_N: usize = 14;

/// Default multiplier in the `cover <= factor * m * D` check. This is an
/// external assumption about rotor-router, printed with every report.
pub const DEFAULT_UPPER_FACTOR: f64 = 2.0;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("path of {0} nodes is too large for exhaustive enumeration (max {BRUTE_FORCE_MAX_N})")]
    TooLarge(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BruteForceResult {
    /// Maximum steps from `v_n` to `v_1` over labelings that reach `v_1`.
    pub max_steps: Option<u64>,
    /// First labeling, in enumeration order, attaining the maximum.
    pub argmax: Option<PathLabeling>,
    /// Labelings whose run did not reach `v_1` within the cap.
    pub unreached: Vec<PathLabeling>,
    pub labelings: usize,
}

/// Labeling number `mask`: bit `j` set means internal node `v_{j+2}` uses
/// port 2 toward the far side.
fn labeling_from_mask(n: usize, mask: u64) -> PathLabeling {
    let labels = (0..n - 2).map(|j| if mask >> j & 1 == 1 { 2 } else { 1 }).collect();
    PathLabeling::new(n, labels).expect("mask labelings are well formed")
}

/// Runs the agent from `v_n` on every labeling of an `n`-node path.
pub fn brute_force_path_worst_case<A: PortFunction + ?Sized>(
    agent: &A,
    n: usize,
    cap: u64,
) -> Result<BruteForceResult, ExperimentError> {
    if n > BRUTE_FORCE_MAX_N {
        return Err(ExperimentError::TooLarge(n));
    }
    if n < 2 {
        return Err(GraphError::InvalidSize(format!("path needs at least 2 nodes, got {n}")).into());
    }
    let total = 1u64 << (n - 2);
    let outcomes = (0..total)
        .into_par_iter()
        .map(|mask| {
            let labeling = labeling_from_mask(n, mask);
            let g = build_path(&labeling);
            let t = sim::run_with_mode(&g, agent, n - 1, StopCondition::TargetVisited(0), cap, TraceMode::CountersOnly)?;
            Ok((labeling, t.stopped.then_some(t.steps)))
        })
        .collect::<Result<Vec<_>, SimError>>()?;

    let mut result = BruteForceResult {
        max_steps: None,
        argmax: None,
        unreached: Vec::new(),
        labelings: outcomes.len(),
    };
    for (labeling, steps) in outcomes {
        match steps {
            None => result.unreached.push(labeling),
            Some(s) if result.max_steps.is_none_or(|m| s > m) => {
                result.max_steps = Some(s);
                result.argmax = Some(labeling);
            }
            Some(_) => {}
        }
    }
    Ok(result)
}

/// One report row; serializes to the CSV columns
/// `experiment,agent,n,param,bound,measured,verdict`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub experiment: String,
    pub agent: String,
    pub n: usize,
    pub param: String,
    pub bound: String,
    pub measured: String,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub parameters: BTreeMap<String, String>,
    /// Assumptions that do not come from the model itself.
    pub assumptions: Vec<String>,
    pub rows: Vec<ReportRow>,
    pub verdict: Verdict,
}

impl ExperimentReport {
    pub fn new(experiment: impl Into<String>, parameters: BTreeMap<String, String>, rows: Vec<ReportRow>) -> Self {
        let verdict = aggregate(&rows);
        Self {
            experiment: experiment.into(),
            parameters,
            assumptions: Vec::new(),
            rows,
            verdict,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict.is_pass()
    }

    pub fn to_csv(&self) -> Result<String, ExperimentError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row)?;
        }
        if self.rows.is_empty() {
            w.write_record(["experiment", "agent", "n", "param", "bound", "measured", "verdict"])?;
        }
        let bytes = w.into_inner().map_err(|e| ExperimentError::InvalidParameter(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization is infallible")
    }
}

/// Pass iff every row passes; vacuous rows count as passes.
pub fn aggregate(rows: &[ReportRow]) -> Verdict {
    if rows.iter().any(|r| r.verdict == Verdict::Fail) {
        Verdict::Fail
    } else if !rows.is_empty() && rows.iter().all(|r| r.verdict == Verdict::PassVacuous) {
        Verdict::PassVacuous
    } else {
        Verdict::PassMeasured
    }
}

fn opt(v: Option<u64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| x.to_string())
}

fn params(pairs: &[(&str, String)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn range_label(ns: &[usize]) -> String {
    ns.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

/// `cap(n)` for the path experiments; `None` means `4 n^2`, which is above
/// the `(n - 1)^2` bound so a capped run still certifies it.
fn path_cap(cap: Option<u64>, n: usize) -> u64 {
    cap.unwrap_or_else(|| 4 * (n as u64).pow(2))
}

pub fn path_bound_report<A: PortFunction + ?Sized>(
    agent: &A,
    ns: &[usize],
    cap: Option<u64>,
) -> Result<ExperimentReport, ExperimentError> {
    let rows = ns
        .par_iter()
        .map(|&n| {
            let r = adversary::verify_path_bound(agent, n, path_cap(cap, n))?;
            Ok(ReportRow {
                experiment: "adversary-path".into(),
                agent: r.agent,
                n,
                param: format!("entry_arcs={};need={}", r.entry_arc_count, n - 1),
                bound: r.bound.to_string(),
                measured: opt(r.steps_to_target),
                verdict: r.verdict,
            })
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    Ok(ExperimentReport::new(
        "adversary-path",
        params(&[("agent", agent.name()), ("n", range_label(ns)), ("cap", cap.map_or("4n^2".into(), |c| c.to_string()))]),
        rows,
    ))
}

pub fn cubic_bound_report<A: PortFunction + ?Sized>(
    agent: &A,
    ns: &[usize],
    start: usize,
    cap: Option<u64>,
) -> Result<ExperimentReport, ExperimentError> {
    let rows = ns
        .par_iter()
        .map(|&n| {
            let r = adversary::verify_cubic_bound_from(agent, n, start, cap.unwrap_or_else(|| sim::default_cap(n)))?;
            Ok(ReportRow {
                experiment: "adversary-cubic".into(),
                agent: r.agent,
                n,
                param: format!(
                    "d={};p={};v_star={};v_star_visits={}/{}",
                    r.d, r.p, r.v_star, r.v_star_visits, r.v_star_budget
                ),
                bound: r.bound.to_string(),
                measured: opt(r.cover_time),
                verdict: r.verdict,
            })
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    Ok(ExperimentReport::new(
        "adversary-cubic",
        params(&[
            ("agent", agent.name()),
            ("n", range_label(ns)),
            ("start", start.to_string()),
            ("cap", cap.map_or("4n^3".into(), |c| c.to_string())),
        ]),
        rows,
    ))
}

/// Brute-force rows pass when the maximum equals `(n - 1)^2` for rotor-router,
/// or is at least `(n - 1)^2` for any agent that reaches `v_1` at all.
pub fn bruteforce_report<A: PortFunction + ?Sized>(
    agent: &A,
    ns: &[usize],
    cap: Option<u64>,
) -> Result<ExperimentReport, ExperimentError> {
    let exact = agent.name() == BuiltinAgent::RotorRouter.as_str();
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let r = brute_force_path_worst_case(agent, n, path_cap(cap, n))?;
        let bound = ((n - 1) * (n - 1)) as u64;
        let verdict = match r.max_steps {
            None => Verdict::PassVacuous,
            Some(m) if m == bound || (!exact && m >= bound) => Verdict::PassMeasured,
            Some(_) => Verdict::Fail,
        };
        let witness = r
            .argmax
            .as_ref()
            .map(|l| l.labels().iter().map(|p| p.to_string()).collect::<String>())
            .unwrap_or_default();
        rows.push(ReportRow {
            experiment: "bruteforce-path".into(),
            agent: agent.name(),
            n,
            param: format!("labelings={};unreached={};argmax={witness}", r.labelings, r.unreached.len()),
            bound: bound.to_string(),
            measured: opt(r.max_steps),
            verdict,
        });
    }
    Ok(ExperimentReport::new(
        "bruteforce-path",
        params(&[("agent", agent.name()), ("n", range_label(ns))]),
        rows,
    ))
}

/// How the sweep picks `m` for a given `n`; always clamped to the feasible
/// range `n - 1 ..= n (n - 1) / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EdgeRule {
    Fixed(usize),
    /// `m = round(k * n)`.
    PerNode(f64),
    /// `m = round(f * n (n - 1) / 2)`.
    Density(f64),
}

impl EdgeRule {
    pub fn edges(&self, n: usize) -> usize {
        let max = n * (n - 1) / 2;
        let raw = match *self {
            EdgeRule::Fixed(m) => m,
            EdgeRule::PerNode(k) => (k * n as f64).round() as usize,
            EdgeRule::Density(f) => (f * max as f64).round() as usize,
        };
        raw.clamp(n.saturating_sub(1), max)
    }

    /// `<m>`, `<k>n` or `<f>d`, e.g. `100`, `2n`, `0.1d`.
    pub fn parse(s: &str) -> Result<Self, ExperimentError> {
        let bad = || ExperimentError::InvalidParameter(format!("edge rule {s:?}: expected <m>, <k>n or <f>d"));
        if let Some(k) = s.strip_suffix('n') {
            k.parse().map(EdgeRule::PerNode).map_err(|_| bad())
        } else if let Some(f) = s.strip_suffix('d') {
            f.parse().map(EdgeRule::Density).map_err(|_| bad())
        } else {
            s.parse().map(EdgeRule::Fixed).map_err(|_| bad())
        }
    }
}

impl std::fmt::Display for EdgeRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EdgeRule::Fixed(m) => write!(f, "{m}"),
            EdgeRule::PerNode(k) => write!(f, "{k}n"),
            EdgeRule::Density(d) => write!(f, "{d}d"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct UpperBoundRun {
    pub n: usize,
    pub m: usize,
    pub diameter: usize,
    pub cover_time: Option<u64>,
}

/// Covers `g` with rotor-router from node 0 and measures `m` and `D`.
pub fn rotor_cover_run(g: &PortLabeledGraph, cap: u64) -> Result<UpperBoundRun, ExperimentError> {
    let t = sim::run_with_mode(g, &BuiltinAgent::RotorRouter, 0, StopCondition::Covered, cap, TraceMode::CountersOnly)?;
    Ok(UpperBoundRun {
        n: g.node_count(),
        m: g.edge_count(),
        diameter: g.diameter(),
        cover_time: t.covered_at,
    })
}

pub fn upper_bound_verdict(run: &UpperBoundRun, factor: f64) -> Verdict {
    match run.cover_time {
        Some(c) if c as f64 <= factor * (run.m * run.diameter) as f64 => Verdict::PassMeasured,
        _ => Verdict::Fail,
    }
}

/// Rotor-router from node 0 on `random_connected_graph(n, rule(n), seed)`
/// for every `(n, seed)`; a row passes iff it covers within
/// `factor * m * D`. Failing to cover within the cap is a failure.
pub fn rotor_upper_bound_sweep(
    ns: &[usize],
    rule: EdgeRule,
    seeds: &[u64],
    factor: f64,
    cap: Option<u64>,
) -> Result<ExperimentReport, ExperimentError> {
    if factor.is_nan() || factor <= 0.0 {
        return Err(ExperimentError::InvalidParameter(format!("factor must be positive, got {factor}")));
    }
    let cases: Vec<(usize, u64)> = ns.iter().flat_map(|&n| seeds.iter().map(move |&s| (n, s))).collect();
    let rows = cases
        .par_iter()
        .map(|&(n, seed)| {
            let m = rule.edges(n);
            let g = random_connected_graph(n, m, seed)?;
            let run = rotor_cover_run(&g, cap.unwrap_or_else(|| sim::default_cap(n)))?;
            Ok(ReportRow {
                experiment: "rotor-upper".into(),
                agent: BuiltinAgent::RotorRouter.as_str().into(),
                n,
                param: format!("m={m};seed={seed};D={}", run.diameter),
                bound: format!("{}", factor * (m * run.diameter) as f64),
                measured: opt(run.cover_time),
                verdict: upper_bound_verdict(&run, factor),
            })
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    let mut report = ExperimentReport::new(
        "rotor-upper",
        params(&[
            ("n", range_label(ns)),
            ("m", rule.to_string()),
            ("seeds", seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(",")),
            ("factor", factor.to_string()),
        ]),
        rows,
    );
    report
        .assumptions
        .push(format!("cover <= {factor} * m * D is an external constant, not derived here"));
    Ok(report)
}
