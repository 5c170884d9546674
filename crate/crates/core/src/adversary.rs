//! Worst-case instances built from an agent's port functions.
//!
//! The path adversary labels each internal path node against the agent's
//! degree-2 sequence so that reaching the far endpoint takes at least
//! `(n - 1)^2` traversals. The cubic adversary hides such a path behind a
//! rarely used port of an under-visited clique node, forcing
//! `d^2 (d - 1)` steps with `d = floor(n / 3)`.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::agent::{AgentError, PortFunction};
use crate::graph::{
    build_clique_pendant, build_path, replace_pendant_with_path, GraphError, NodeId, PathLabeling, Port,
    PortLabeledGraph,
};
use crate::sim::{self, SimError, SimulationTrace, StopCondition};

/// Construction stage, for error reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    PathLabeling,
    RarePort,
    CliqueWalk,
    VStar,
    Verification,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::PathLabeling => "path labeling",
            Stage::RarePort => "rare port",
            Stage::CliqueWalk => "clique walk",
            Stage::VStar => "v* selection",
            Stage::Verification => "verification run",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AdversaryError {
    #[error("{stage}: {source}")]
    Agent {
        stage: Stage,
        #[source]
        source: AgentError,
    },
    #[error("{stage}: {source}")]
    Sim {
        stage: Stage,
        #[source]
        source: SimError,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("horizon exceeded: need {needed} entries, have {available}")]
    HorizonExceeded { needed: usize, available: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// A pigeonhole existence guarantee failed, which means the simulator or
    /// the construction is wrong.
    #[error("internal invariant broken: {0}")]
    Internal(String),
}

impl AdversaryError {
    fn sim(stage: Stage) -> impl FnOnce(SimError) -> Self {
        move |source| match source {
            SimError::Agent(source) => AdversaryError::Agent { stage, source },
            source => AdversaryError::Sim { stage, source },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    /// The bound held on a run that reached its goal.
    #[serde(rename = "pass")]
    PassMeasured,
    /// The run never reached its goal within the cap.
    #[serde(rename = "pass-vacuous")]
    PassVacuous,
    #[serde(rename = "fail")]
    Fail,
}

impl Verdict {
    pub fn is_pass(self) -> bool {
        self != Verdict::Fail
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::PassMeasured => "pass",
            Verdict::PassVacuous => "pass-vacuous",
            Verdict::Fail => "fail",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    Node(NodeId),
    AllNodes,
}

/// The choices a construction made; enough to rebuild it.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ConstructionLog {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<Port>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_star: Option<NodeId>,
    /// Port toward the far side chosen at each internal path node, nearest
    /// the target first.
    pub alpha: Vec<Port>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdversarialInstance {
    pub graph: PortLabeledGraph,
    pub start: NodeId,
    pub target: Target,
    pub certified_bound: u64,
    pub log: ConstructionLog,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    start: NodeId,
    bound: u64,
    log: &'a ConstructionLog,
}

impl AdversarialInstance {
    /// `{"start":..,"bound":..,"log":{"p":..,"v_star":..,"alpha":[..]}}`;
    /// `p` and `v_star` are omitted for path instances.
    pub fn sidecar_json(&self) -> String {
        serde_json::to_string(&Sidecar {
            start: self.start,
            bound: self.certified_bound,
            log: &self.log,
        })
        .expect("sidecar serialization is infallible")
    }
}

/// The value in `{1, 2}` occurring at least `threshold` times among the first
/// `prefix_len` entries of `seq`, where `prefix_len = 2 threshold - 1`.
pub fn majority_element(seq: &[Port], prefix_len: usize, threshold: usize) -> Result<Port, AdversaryError> {
    if prefix_len + 1 != 2 * threshold {
        return Err(AdversaryError::Precondition(format!(
            "prefix length {prefix_len} must equal 2 * {threshold} - 1"
        )));
    }
    if prefix_len > seq.len() {
        return Err(AdversaryError::HorizonExceeded {
            needed: prefix_len,
            available: seq.len(),
        });
    }
    let prefix = &seq[..prefix_len];
    if let Some(&bad) = prefix.iter().find(|&&p| p != 1 && p != 2) {
        return Err(AdversaryError::Precondition(format!("degree-2 sequence contains port {bad}")));
    }
    let ones = prefix.iter().filter(|&&p| p == 1).count();
    if ones >= threshold {
        Ok(1)
    } else if prefix_len - ones >= threshold {
        Ok(2)
    } else {
        Err(AdversaryError::Internal("no majority at odd prefix length".into()))
    }
}

fn prefix<A: PortFunction + ?Sized>(agent: &A, degree: usize, len: usize, stage: Stage) -> Result<Vec<Port>, AdversaryError> {
    (1..=len as u64)
        .map(|i| agent.port(degree, i).map_err(|source| AdversaryError::Agent { stage, source }))
        .collect()
}

/// Labeling of an `n`-node path against `port_2`: internal node `v_i` sends
/// the majority value of `port_2(1..=2(i-1)-1)` toward `v_{i+1}`.
pub fn worst_case_path_labeling<A: PortFunction + ?Sized>(agent: &A, n: usize) -> Result<PathLabeling, AdversaryError> {
    if n < 2 {
        return Err(GraphError::InvalidSize(format!("path needs at least 2 nodes, got {n}")).into());
    }
    let seq = if n >= 3 {
        prefix(agent, 2, 2 * (n - 2) - 1, Stage::PathLabeling)?
    } else {
        Vec::new()
    };
    let labels = (2..n)
        .map(|i| majority_element(&seq, 2 * (i - 1) - 1, i - 1))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PathLabeling::new(n, labels)?)
}

pub fn path_instance<A: PortFunction + ?Sized>(agent: &A, n: usize) -> Result<AdversarialInstance, AdversaryError> {
    let labeling = worst_case_path_labeling(agent, n)?;
    Ok(AdversarialInstance {
        graph: build_path(&labeling),
        start: n - 1,
        target: Target::Node(0),
        certified_bound: ((n - 1) * (n - 1)) as u64,
        log: ConstructionLog {
            alpha: labeling.labels().to_vec(),
            ..Default::default()
        },
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PathReport {
    pub agent: String,
    pub n: usize,
    pub cap: u64,
    pub labeling: Vec<Port>,
    pub bound: u64,
    /// Steps until the first visit to `v_1`; `None` if not reached within the cap.
    pub steps_to_target: Option<u64>,
    /// Traversals of `v_n -> v_{n-1}` in the run.
    pub entry_arc_count: u64,
    pub verdict: Verdict,
}

/// Runs the agent from `v_n` on its worst-case labeling until it reaches `v_1`.
pub fn verify_path_bound<A: PortFunction + ?Sized>(agent: &A, n: usize, cap: u64) -> Result<PathReport, AdversaryError> {
    let inst = path_instance(agent, n)?;
    let trace = sim::run_with_mode(
        &inst.graph,
        agent,
        inst.start,
        StopCondition::TargetVisited(0),
        cap,
        sim::TraceMode::CountersOnly,
    )
    .map_err(AdversaryError::sim(Stage::Verification))?;
    let entry_arc_count = trace
        .arc_traversals(n - 1, n - 2)
        .map_err(AdversaryError::sim(Stage::Verification))?;
    let steps_to_target = trace.stopped.then_some(trace.steps);
    let verdict = match steps_to_target {
        None => Verdict::PassVacuous,
        Some(s) if s >= inst.certified_bound && entry_arc_count >= (n - 1) as u64 => Verdict::PassMeasured,
        Some(_) => Verdict::Fail,
    };
    Ok(PathReport {
        agent: agent.name(),
        n,
        cap,
        labeling: inst.log.alpha,
        bound: inst.certified_bound,
        steps_to_target,
        entry_arc_count,
        verdict,
    })
}

/// Smallest port appearing at most `d - 1` times in `port_d(1..=d(d-1))`.
pub fn rare_port<A: PortFunction + ?Sized>(agent: &A, d: usize) -> Result<Port, AdversaryError> {
    if d < 2 {
        return Err(GraphError::InvalidSize(format!("degree must be at least 2, got {d}")).into());
    }
    let seq = prefix(agent, d, d * (d - 1), Stage::RarePort)?;
    let mut counts = vec![0usize; d + 1];
    for p in seq {
        counts[p] += 1;
    }
    (1..=d)
        .find(|&p| counts[p] < d)
        .ok_or_else(|| AdversaryError::Internal(format!("no port used at most {} times", d - 1)))
}

/// Smallest clique node occupied at most `budget` times before `step_limit`.
pub fn select_v_star(
    trace: &SimulationTrace,
    clique_nodes: &[NodeId],
    budget: u64,
    step_limit: u64,
) -> Result<NodeId, AdversaryError> {
    let limit = step_limit.min(trace.steps);
    let mut sorted = clique_nodes.to_vec();
    sorted.sort_unstable();
    for v in sorted {
        let visits = trace
            .visit_count_upto(v, limit)
            .map_err(AdversaryError::sim(Stage::VStar))?;
        if visits <= budget {
            return Ok(v);
        }
    }
    Err(AdversaryError::Internal(format!(
        "every clique node visited more than {budget} times in {limit} steps"
    )))
}

/// Parameters the cubic construction derives from `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CubicShape {
    pub d: usize,
    /// Nodes on the attached path.
    pub path_len: usize,
    pub bound: u64,
}

impl CubicShape {
    pub fn for_n(n: usize) -> Result<Self, AdversaryError> {
        if n < 6 {
            return Err(GraphError::InvalidSize(format!("cubic instance needs n >= 6, got {n}")).into());
        }
        let d = n / 3;
        let bound = (d * d * (d - 1)) as u64;
        Ok(Self {
            d,
            path_len: d + 1 + n % 3,
            bound,
        })
    }

    /// Visits to `v*` allowed within the first `bound` steps.
    pub fn budget(&self) -> u64 {
        (self.d * (self.d - 1)) as u64
    }
}

/// Result of the cubic construction, with the walk on the clique-with-pendants
/// graph that picked `v*`.
#[derive(Debug, Clone)]
pub struct CubicConstruction {
    pub instance: AdversarialInstance,
    pub shape: CubicShape,
    pub clique_graph: PortLabeledGraph,
    pub clique_walk: SimulationTrace,
}

pub fn build_cubic_instance<A: PortFunction + ?Sized>(agent: &A, n: usize) -> Result<AdversarialInstance, AdversaryError> {
    Ok(build_cubic_construction(agent, n, 0)?.instance)
}

/// The full pipeline with an explicit start clique node.
///
/// The attached path has `L = d + 1 + n mod 3` nodes. Its labeling is the
/// worst-case labeling of an `(L + 1)`-node path whose `v_n` endpoint is `v*`
/// itself, so `v_f` is labeled like every other internal path node.
pub fn build_cubic_construction<A: PortFunction + ?Sized>(
    agent: &A,
    n: usize,
    start: NodeId,
) -> Result<CubicConstruction, AdversaryError> {
    let shape = CubicShape::for_n(n)?;
    let d = shape.d;
    if start >= d {
        return Err(GraphError::InvalidVertex(format!("start {start} is not a clique node (0..{d})")).into());
    }
    let p = rare_port(agent, d)?;
    let g1 = build_clique_pendant(d, p)?;
    let walk = sim::run(&g1, agent, start, StopCondition::Steps(shape.bound), shape.bound)
        .map_err(AdversaryError::sim(Stage::CliqueWalk))?;
    let clique: Vec<NodeId> = (0..d).collect();
    let v_star = select_v_star(&walk, &clique, shape.budget(), shape.bound)?;
    let labeling = worst_case_path_labeling(agent, shape.path_len + 1)?;
    let graph = replace_pendant_with_path(&g1, v_star, &labeling)?;
    debug_assert_eq!(graph.node_count(), n);
    Ok(CubicConstruction {
        instance: AdversarialInstance {
            graph,
            start,
            target: Target::AllNodes,
            certified_bound: shape.bound,
            log: ConstructionLog {
                p: Some(p),
                v_star: Some(v_star),
                alpha: labeling.labels().to_vec(),
            },
        },
        shape,
        clique_graph: g1,
        clique_walk: walk,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CubicReport {
    pub agent: String,
    pub n: usize,
    pub d: usize,
    pub cap: u64,
    pub p: Port,
    pub v_star: NodeId,
    pub bound: u64,
    pub cover_time: Option<u64>,
    /// Occupancies of `v*` among the first `min(bound, steps)` steps.
    pub v_star_visits: u64,
    pub v_star_budget: u64,
    pub verdict: Verdict,
}

pub fn verify_cubic_bound<A: PortFunction + ?Sized>(agent: &A, n: usize, cap: u64) -> Result<CubicReport, AdversaryError> {
    verify_cubic_bound_from(agent, n, 0, cap)
}

pub fn verify_cubic_bound_from<A: PortFunction + ?Sized>(
    agent: &A,
    n: usize,
    start: NodeId,
    cap: u64,
) -> Result<CubicReport, AdversaryError> {
    let c = build_cubic_construction(agent, n, start)?;
    let inst = &c.instance;
    let trace = sim::run(&inst.graph, agent, inst.start, StopCondition::Covered, cap)
        .map_err(AdversaryError::sim(Stage::Verification))?;
    let v_star = inst.log.v_star.expect("cubic log records v*");
    let v_star_visits = trace
        .visit_count_upto(v_star, inst.certified_bound.min(trace.steps))
        .map_err(AdversaryError::sim(Stage::Verification))?;
    let cross_check = v_star_visits <= c.shape.budget();
    let verdict = match trace.covered_at {
        _ if !cross_check => Verdict::Fail,
        None => Verdict::PassVacuous,
        Some(t) if t >= inst.certified_bound => Verdict::PassMeasured,
        Some(_) => Verdict::Fail,
    };
    Ok(CubicReport {
        agent: agent.name(),
        n,
        d: c.shape.d,
        cap,
        p: inst.log.p.expect("cubic log records p"),
        v_star,
        bound: inst.certified_bound,
        cover_time: trace.covered_at,
        v_star_visits,
        v_star_budget: c.shape.budget(),
        verdict,
    })
}
