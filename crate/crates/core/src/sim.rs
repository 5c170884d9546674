//! Step-by-step execution of an oblivious agent.
//!
//! Visit counting: the start node is occupied at step 0 and its first query
//! uses visit index 1. Each arrival increments the arrival node's index, and
//! the next departure queries `port_d(index)`.

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::agent::{AgentError, PortFunction};
use crate::graph::{NodeId, Port, PortLabeledGraph};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("node {0} does not exist")]
    InvalidNode(NodeId),
    #[error("agent is stuck at isolated node {0}")]
    Isolated(NodeId),
    #[error("({from}, {to}) is not an arc of the graph")]
    InvalidArc { from: NodeId, to: NodeId },
    #[error("step limit {limit} exceeds the {steps} recorded steps")]
    InvalidLimit { limit: u64, steps: u64 },
    #[error("trace was recorded without its move list")]
    MovesNotRecorded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StopCondition {
    Covered,
    TargetVisited(NodeId),
    Steps(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TraceMode {
    #[default]
    Full,
    /// Counters only; no per-step move list.
    CountersOnly,
}

/// Default cap for cover runs: `4 n^3` steps.
pub fn default_cap(n: usize) -> u64 {
    4 * (n as u64).pow(3)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimulationState {
    pub current: NodeId,
    pub visit_index: Vec<u64>,
    pub step: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Move {
    pub node: NodeId,
    pub port: Port,
    pub next: NodeId,
}

impl SimulationState {
    pub fn new(g: &PortLabeledGraph, start: NodeId) -> Result<Self, SimError> {
        if start >= g.node_count() {
            return Err(SimError::InvalidNode(start));
        }
        let mut visit_index = vec![0; g.node_count()];
        visit_index[start] = 1;
        Ok(Self {
            current: start,
            visit_index,
            step: 0,
        })
    }

    /// Leaves the current node through `port_d(visit_index[current])`.
    pub fn step<A: PortFunction + ?Sized>(&mut self, g: &PortLabeledGraph, agent: &A) -> Result<Move, SimError> {
        let node = self.current;
        let degree = g.degree(node);
        if degree == 0 {
            return Err(SimError::Isolated(node));
        }
        let port = agent.port(degree, self.visit_index[node])?;
        let next = g
            .neighbor_via_port(node, port)
            .ok_or(AgentError::InvalidPort { degree, port })?;
        self.visit_index[next] += 1;
        self.current = next;
        self.step += 1;
        Ok(Move { node, port, next })
    }
}

/// Functional form of [`SimulationState::step`].
pub fn step<A: PortFunction + ?Sized>(
    g: &PortLabeledGraph,
    agent: &A,
    st: &SimulationState,
) -> Result<SimulationState, SimError> {
    let mut next = st.clone();
    next.step(g, agent)?;
    Ok(next)
}

/// Traversal count of one directed arc.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ArcCount {
    pub to: NodeId,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SimulationTrace {
    pub start: NodeId,
    pub stop: StopCondition,
    pub cap: u64,
    /// Whether the stop condition fired before the cap.
    pub stopped: bool,
    pub steps: u64,
    pub final_node: NodeId,
    /// `None` in [`TraceMode::CountersOnly`].
    pub moves: Option<Vec<Move>>,
    pub first_visit: Vec<Option<u64>>,
    pub visit_counts: Vec<u64>,
    /// Indexed like the graph's port map: `arc_counts[u][p - 1]` counts
    /// traversals of `u`'s outport `p`.
    pub arc_counts: Vec<Vec<ArcCount>>,
    pub covered_at: Option<u64>,
}

pub fn run<A: PortFunction + ?Sized>(
    g: &PortLabeledGraph,
    agent: &A,
    start: NodeId,
    stop: StopCondition,
    cap: u64,
) -> Result<SimulationTrace, SimError> {
    run_with_mode(g, agent, start, stop, cap, TraceMode::Full)
}

pub fn run_with_mode<A: PortFunction + ?Sized>(
    g: &PortLabeledGraph,
    agent: &A,
    start: NodeId,
    stop: StopCondition,
    cap: u64,
    mode: TraceMode,
) -> Result<SimulationTrace, SimError> {
    let n = g.node_count();
    let mut st = SimulationState::new(g, start)?;
    if let StopCondition::TargetVisited(t) = stop {
        if t >= n {
            return Err(SimError::InvalidNode(t));
        }
    }
    let mut moves = match mode {
        TraceMode::Full => Some(Vec::new()),
        TraceMode::CountersOnly => None,
    };
    let mut first_visit = vec![None; n];
    first_visit[start] = Some(0);
    let mut unvisited = n - 1;
    let mut covered_at = (unvisited == 0).then_some(0);
    let mut arc_counts: Vec<Vec<ArcCount>> = g
        .port_map()
        .iter()
        .map(|list| list.iter().map(|&to| ArcCount { to, count: 0 }).collect())
        .collect();

    let stopped = loop {
        let fired = match stop {
            StopCondition::Covered => covered_at.is_some(),
            StopCondition::TargetVisited(t) => first_visit[t].is_some(),
            StopCondition::Steps(k) => st.step >= k,
        };
        if fired {
            break true;
        }
        if st.step >= cap {
            break false;
        }
        let mv = st.step(g, agent)?;
        arc_counts[mv.node][mv.port - 1].count += 1;
        if first_visit[mv.next].is_none() {
            first_visit[mv.next] = Some(st.step);
            unvisited -= 1;
            if unvisited == 0 {
                covered_at = Some(st.step);
            }
        }
        if let Some(m) = moves.as_mut() {
            m.push(mv);
        }
    };

    Ok(SimulationTrace {
        start,
        stop,
        cap,
        stopped,
        steps: st.step,
        final_node: st.current,
        moves,
        first_visit,
        visit_counts: st.visit_index,
        arc_counts,
        covered_at,
    })
}

pub fn cover_time(t: &SimulationTrace) -> Option<u64> {
    t.covered_at
}

impl SimulationTrace {
    pub fn cover_time(&self) -> Option<u64> {
        self.covered_at
    }

    pub fn arc_traversals(&self, from: NodeId, to: NodeId) -> Result<u64, SimError> {
        self.arc_counts
            .get(from)
            .and_then(|arcs| arcs.iter().find(|a| a.to == to))
            .map(|a| a.count)
            .ok_or(SimError::InvalidArc { from, to })
    }

    /// Steps `t < step_limit` at which the agent stood on `v`.
    pub fn visit_count_upto(&self, v: NodeId, step_limit: u64) -> Result<u64, SimError> {
        if step_limit > self.steps {
            return Err(SimError::InvalidLimit {
                limit: step_limit,
                steps: self.steps,
            });
        }
        let moves = self.moves.as_ref().ok_or(SimError::MovesNotRecorded)?;
        Ok(moves[..step_limit as usize].iter().filter(|m| m.node == v).count() as u64)
    }

    /// Node occupied at the beginning of step `t`, `0 <= t <= steps`.
    pub fn position(&self, t: u64) -> Option<NodeId> {
        let moves = self.moves.as_ref()?;
        match t.cmp(&self.steps) {
            std::cmp::Ordering::Less => Some(moves[t as usize].node),
            std::cmp::Ordering::Equal => Some(self.final_node),
            std::cmp::Ordering::Greater => None,
        }
    }

    /// Outports taken from `v`, in order.
    pub fn outports_from(&self, v: NodeId) -> Result<Vec<Port>, SimError> {
        let moves = self.moves.as_ref().ok_or(SimError::MovesNotRecorded)?;
        Ok(moves.iter().filter(|m| m.node == v).map(|m| m.port).collect())
    }

    /// Column-separated export: `step,node,outport,next_node` rows, a blank
    /// line, then `covered_at,<step|none>`, and finally a
    /// `node,first_visit,visit_count` block.
    pub fn to_csv(&self) -> Result<String, SimError> {
        let moves = self.moves.as_ref().ok_or(SimError::MovesNotRecorded)?;
        let mut out = String::from("step,node,outport,next_node\n");
        for (t, m) in moves.iter().enumerate() {
            writeln!(out, "{t},{},{},{}", m.node, m.port, m.next).unwrap();
        }
        out.push('\n');
        match self.covered_at {
            Some(c) => writeln!(out, "covered_at,{c}").unwrap(),
            None => out.push_str("covered_at,none\n"),
        }
        out.push_str("node,first_visit,visit_count\n");
        for (v, (fv, count)) in self.first_visit.iter().zip(&self.visit_counts).enumerate() {
            match fv {
                Some(fv) => writeln!(out, "{v},{fv},{count}").unwrap(),
                None => writeln!(out, "{v},none,{count}").unwrap(),
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::agent::{BuiltinAgent, Extension, ScriptedAgent};
    use crate::graph::{build_path, PathLabeling};

    fn path(n: usize, labels: &[Port]) -> PortLabeledGraph {
        build_path(&PathLabeling::new(n, labels.to_vec()).unwrap())
    }

    const ROTOR: BuiltinAgent = BuiltinAgent::RotorRouter;

    #[test]
    fn forced_move_from_endpoint() {
        let g = path(2, &[]);
        let st = SimulationState::new(&g, 0).unwrap();
        let st = step(&g, &ROTOR, &st).unwrap();
        assert_eq!(st.current, 1);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn first_step_on_three_path() {
        let g = path(3, &[1]);
        let st = step(&g, &ROTOR, &SimulationState::new(&g, 2).unwrap()).unwrap();
        assert_eq!(st.current, 1);
        assert_eq!(st.visit_index, vec![0, 1, 1]);
    }

    #[test]
    fn horizon_error_propagates() {
        let agent = ScriptedAgent::new(BTreeMap::from([(2, vec![1])]), Extension::Fail).unwrap();
        let g = path(3, &[1]);
        let err = run(&g, &agent, 2, StopCondition::Covered, 100).unwrap_err();
        assert!(matches!(err, SimError::Agent(AgentError::HorizonExceeded { degree: 2, index: 2, .. })));
    }

    #[test]
    fn two_path_cover() {
        let g = path(2, &[]);
        let t = run(&g, &ROTOR, 1, StopCondition::Covered, 10).unwrap();
        assert!(t.stopped);
        assert_eq!(cover_time(&t), Some(1));
        assert_eq!(t.arc_traversals(0, 1), Ok(0));
        assert_eq!(t.arc_traversals(1, 0), Ok(1));
    }

    #[test]
    fn three_path_base_case() {
        // Hand simulation: v_3 -> v_2 (port 1 of v_2 leads back) -> v_3 -> v_2 -> v_1.
        let g = path(3, &[1]);
        let t = run(&g, &ROTOR, 2, StopCondition::TargetVisited(0), 100).unwrap();
        assert!(t.stopped);
        assert_eq!(t.steps, 4);
        let hops: Vec<(NodeId, NodeId)> = t.moves.as_ref().unwrap().iter().map(|m| (m.node, m.next)).collect();
        assert_eq!(hops, [(2, 1), (1, 2), (2, 1), (1, 0)]);
        assert_eq!(t.arc_traversals(2, 1), Ok(2));
        assert_eq!(t.visit_count_upto(1, 4), Ok(2));
        assert_eq!(t.visit_count_upto(2, 1), Ok(1));
        assert_eq!(t.first_visit, [Some(4), Some(1), Some(0)]);
        assert_eq!(t.covered_at, Some(4));
    }

    #[test]
    fn ping_pong_never_stops() {
        let agent = ScriptedAgent::new(BTreeMap::from([(2, vec![1])]), Extension::Cycle).unwrap();
        let g = path(3, &[1]);
        let t = run(&g, &agent, 2, StopCondition::TargetVisited(0), 100).unwrap();
        assert!(!t.stopped);
        assert_eq!(t.steps, 100);
        assert_eq!(cover_time(&t), None);
    }

    #[test]
    fn query_errors() {
        let g = path(3, &[1]);
        let t = run(&g, &ROTOR, 2, StopCondition::TargetVisited(0), 100).unwrap();
        assert_eq!(t.arc_traversals(2, 0), Err(SimError::InvalidArc { from: 2, to: 0 }));
        assert!(matches!(t.visit_count_upto(0, 1_000_000_000), Err(SimError::InvalidLimit { .. })));
        let lean = run_with_mode(&g, &ROTOR, 2, StopCondition::Covered, 100, TraceMode::CountersOnly).unwrap();
        assert_eq!(lean.visit_count_upto(1, 1), Err(SimError::MovesNotRecorded));
        assert_eq!(lean.covered_at, t.covered_at);
        assert_eq!(lean.visit_counts, t.visit_counts);
        assert!(run(&g, &ROTOR, 5, StopCondition::Covered, 10).is_err());
    }

    #[test]
    fn steps_stop_and_trivial_graph() {
        let g = path(4, &[1, 2]);
        let t = run(&g, &ROTOR, 0, StopCondition::Steps(5), 100).unwrap();
        assert!(t.stopped);
        assert_eq!(t.steps, 5);
        let single = PortLabeledGraph::from_ports(vec![vec![]]).unwrap();
        let t = run(&single, &ROTOR, 0, StopCondition::Covered, 10).unwrap();
        assert_eq!(t.covered_at, Some(0));
        assert_eq!(t.steps, 0);
    }

    #[test]
    fn csv_export() {
        let g = path(2, &[]);
        let t = run(&g, &ROTOR, 1, StopCondition::Covered, 10).unwrap();
        assert_eq!(
            t.to_csv().unwrap(),
            "step,node,outport,next_node\n0,1,1,0\n\ncovered_at,1\nnode,first_visit,visit_count\n0,1,1\n1,0,1\n"
        );
    }
}
