//! Oblivious agents.
//!
//! An oblivious agent with unknown inport is fully described by the outport it
//! takes on its `i`-th visit to a node of degree `d`. [`PortFunction`] is that
//! description; [`WhiteboardAgent`] is the raw per-node transition function
//! and reduces to a port function through [`derive_port_function`].

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Port;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AgentError {
    #[error("invalid port {port} for degree {degree}")]
    InvalidPort { degree: usize, port: Port },
    #[error("agent horizon exceeded: visit {index} at degree {degree} (horizon {horizon})")]
    HorizonExceeded {
        degree: usize,
        index: u64,
        horizon: u64,
    },
    #[error("agent violation: {0}")]
    AgentViolation(String),
    #[error("bad agent script: {0}")]
    Script(String),
}

/// `port_d(i)`: outport on the `i`-th visit (`i >= 1`) to a degree-`d` node.
pub trait PortFunction: Send + Sync {
    fn port(&self, degree: usize, visit: u64) -> Result<Port, AgentError>;

    /// Largest visit index answerable at `degree`; `None` when unbounded.
    fn horizon(&self, degree: usize) -> Option<u64>;

    fn name(&self) -> String;
}

/// Closed-form agents. The last three form the scripted part of the agent
/// battery used by sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BuiltinAgent {
    /// Pointer starts at port 1 and advances cyclically.
    RotorRouter,
    /// Always port 1.
    AlwaysFirst,
    /// Rotor-router whose pointer starts at port 2: `2, 1, 2, 1, ...` at degree 2.
    AlternatingFromSecond,
    /// Cycles through `1, 1, 2, 3, ..., d`: `1, 1, 2` repeated at degree 2.
    BiasedFirst,
}

impl BuiltinAgent {
    pub const ALL: [BuiltinAgent; 4] = [
        BuiltinAgent::RotorRouter,
        BuiltinAgent::AlwaysFirst,
        BuiltinAgent::AlternatingFromSecond,
        BuiltinAgent::BiasedFirst,
    ];

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.as_str() == name)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BuiltinAgent::RotorRouter => "rotor-router",
            BuiltinAgent::AlwaysFirst => "always-1",
            BuiltinAgent::AlternatingFromSecond => "alternating-2",
            BuiltinAgent::BiasedFirst => "biased-112",
        }
    }
}

impl fmt::Display for BuiltinAgent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The agent battery: rotor-router followed by the scripted agents.
pub fn battery() -> Vec<BuiltinAgent> {
    BuiltinAgent::ALL.to_vec()
}

pub fn rotor_router_port(degree: usize, visit: u64) -> Port {
    ((visit - 1) % degree as u64) as Port + 1
}

fn check_query(degree: usize, visit: u64) -> Result<(), AgentError> {
    if degree == 0 {
        return Err(AgentError::AgentViolation("queried at a node of degree 0".into()));
    }
    if visit == 0 {
        return Err(AgentError::AgentViolation("visit indices start at 1".into()));
    }
    Ok(())
}

impl PortFunction for BuiltinAgent {
    fn port(&self, degree: usize, visit: u64) -> Result<Port, AgentError> {
        check_query(degree, visit)?;
        let d = degree as u64;
        Ok(match self {
            BuiltinAgent::RotorRouter => rotor_router_port(degree, visit),
            BuiltinAgent::AlwaysFirst => 1,
            BuiltinAgent::AlternatingFromSecond => (visit % d) as Port + 1,
            BuiltinAgent::BiasedFirst => match (visit - 1) % (d + 1) {
                0 => 1,
                k => k as Port,
            },
        })
    }

    fn horizon(&self, _degree: usize) -> Option<u64> {
        None
    }

    fn name(&self) -> String {
        self.as_str().to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extension {
    /// Beyond the table, repeat it from the start.
    Cycle,
    /// Beyond the table, fail with horizon-exceeded.
    Fail,
}

/// Finite per-degree outport tables with an explicit extension rule.
///
/// Degree 1 needs no table: its only port is 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptedAgent {
    name: String,
    tables: BTreeMap<usize, Vec<Port>>,
    extension: Extension,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScriptFile {
    tables: BTreeMap<String, Vec<Port>>,
    extension: Extension,
}

impl ScriptedAgent {
    pub fn new(tables: BTreeMap<usize, Vec<Port>>, extension: Extension) -> Result<Self, AgentError> {
        for (&d, table) in &tables {
            if d == 0 {
                return Err(AgentError::Script("degree 0 has no ports".into()));
            }
            if let Some(&p) = table.iter().find(|&&p| p == 0 || p > d) {
                return Err(AgentError::InvalidPort { degree: d, port: p });
            }
            if table.is_empty() && extension == Extension::Cycle {
                return Err(AgentError::Script(format!("empty table for degree {d} cannot cycle")));
            }
        }
        Ok(Self {
            name: "scripted".to_string(),
            tables,
            extension,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn from_json(text: &str) -> Result<Self, AgentError> {
        let file: ScriptFile =
            serde_json::from_str(text).map_err(|e| AgentError::Script(e.to_string()))?;
        let mut tables = BTreeMap::new();
        for (key, table) in file.tables {
            let d: usize = key
                .parse()
                .map_err(|_| AgentError::Script(format!("degree key {key:?} is not an integer")))?;
            tables.insert(d, table);
        }
        Self::new(tables, file.extension)
    }

    pub fn to_json(&self) -> String {
        let file = ScriptFile {
            tables: self.tables.iter().map(|(d, t)| (d.to_string(), t.clone())).collect(),
            extension: self.extension,
        };
        serde_json::to_string(&file).expect("script serialization is infallible")
    }

    pub fn tables(&self) -> &BTreeMap<usize, Vec<Port>> {
        &self.tables
    }
}

impl PortFunction for ScriptedAgent {
    fn port(&self, degree: usize, visit: u64) -> Result<Port, AgentError> {
        check_query(degree, visit)?;
        let Some(table) = self.tables.get(&degree) else {
            if degree == 1 {
                return Ok(1);
            }
            return Err(AgentError::HorizonExceeded {
                degree,
                index: visit,
                horizon: 0,
            });
        };
        let len = table.len() as u64;
        let idx = match self.extension {
            Extension::Cycle => (visit - 1) % len,
            Extension::Fail if visit <= len => visit - 1,
            Extension::Fail => {
                return Err(AgentError::HorizonExceeded {
                    degree,
                    index: visit,
                    horizon: len,
                })
            }
        };
        Ok(table[idx as usize])
    }

    fn horizon(&self, degree: usize) -> Option<u64> {
        match (self.tables.get(&degree), self.extension) {
            (None, _) if degree == 1 => None,
            (None, _) => Some(0),
            (Some(_), Extension::Cycle) => None,
            (Some(t), Extension::Fail) => Some(t.len() as u64),
        }
    }

    fn name(&self) -> String {
        self.name.clone()
    }
}

pub fn scripted_port_function(
    tables: BTreeMap<usize, Vec<Port>>,
    extension: Extension,
) -> Result<ScriptedAgent, AgentError> {
    ScriptedAgent::new(tables, extension)
}

/// Node state; wide enough to stand in for unlimited memory.
pub type NodeState = u64;

type Transition = dyn Fn(NodeState, usize) -> (NodeState, Port) + Send + Sync;
type MemoryBudget = dyn Fn(usize) -> Option<u32> + Send + Sync;

/// The raw model: `f(s_w, d) = (s'_w, p)` applied at the occupied node, all
/// nodes starting in the same initial state.
#[derive(Clone)]
pub struct WhiteboardAgent {
    name: String,
    initial_state: NodeState,
    memory_bits: Arc<MemoryBudget>,
    transition: Arc<Transition>,
}

impl fmt::Debug for WhiteboardAgent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WhiteboardAgent")
            .field("name", &self.name)
            .field("initial_state", &self.initial_state)
            .finish_non_exhaustive()
    }
}

impl WhiteboardAgent {
    /// `memory_bits(d)` is the per-node budget at degree `d`, `None` meaning
    /// unlimited.
    pub fn new<F, M>(name: impl Into<String>, initial_state: NodeState, memory_bits: M, transition: F) -> Self
    where
        F: Fn(NodeState, usize) -> (NodeState, Port) + Send + Sync + 'static,
        M: Fn(usize) -> Option<u32> + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            initial_state,
            memory_bits: Arc::new(memory_bits),
            transition: Arc::new(transition),
        }
    }

    /// Whiteboard holds `w`; exit via `w + 1`, store `(w + 1) mod d`.
    /// Uses `ceil(log2 d)` bits.
    pub fn rotor_router() -> Self {
        Self::new(
            "whiteboard-rotor-router",
            0,
            |d| Some(usize::BITS - (d.max(1) - 1).leading_zeros()),
            |s, d| ((s + 1) % d as NodeState, s as Port + 1),
        )
    }

    /// Ignores its memory and always exits through `port`.
    pub fn constant(port: Port) -> Self {
        Self::new(format!("constant-{port}"), 0, |_| Some(0), move |s, _| (s, port))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn memory_bits(&self, degree: usize) -> Option<u32> {
        (self.memory_bits)(degree)
    }

    pub fn initial_state(&self) -> NodeState {
        self.initial_state
    }

    pub fn apply(&self, state: NodeState, degree: usize) -> (NodeState, Port) {
        (self.transition)(state, degree)
    }

    /// Reduces to a port function valid up to `horizon` visits at each listed
    /// degree; queries beyond fail with horizon-exceeded.
    pub fn to_port_function(&self, horizons: &[(usize, usize)]) -> Result<ScriptedAgent, AgentError> {
        let mut tables = BTreeMap::new();
        for &(d, k) in horizons {
            tables.insert(d, derive_port_function(self, d, k)?);
        }
        Ok(ScriptedAgent::new(tables, Extension::Fail)?.with_name(self.name.clone()))
    }
}

fn fits(state: NodeState, bits: Option<u32>) -> bool {
    match bits {
        None => true,
        Some(b) if b >= NodeState::BITS => true,
        Some(b) => state < (1 as NodeState) << b,
    }
}

/// Runs `f` from the initial state `k` times at a virtual degree-`d` node and
/// returns the emitted ports, which are exactly `port_d(1..=k)`.
pub fn derive_port_function(agent: &WhiteboardAgent, d: usize, k: usize) -> Result<Vec<Port>, AgentError> {
    if d == 0 {
        return Err(AgentError::AgentViolation("degree 0 has no ports".into()));
    }
    let bits = agent.memory_bits(d);
    let mut state = agent.initial_state;
    let mut out = Vec::with_capacity(k);
    for i in 1..=k {
        if !fits(state, bits) {
            return Err(AgentError::AgentViolation(format!(
                "state {state} before visit {i} exceeds {} bits at degree {d}",
                bits.unwrap_or(0)
            )));
        }
        let (next, p) = agent.apply(state, d);
        if p == 0 || p > d {
            return Err(AgentError::AgentViolation(format!(
                "emitted port {p} at degree {d} on visit {i}"
            )));
        }
        out.push(p);
        state = next;
    }
    if !fits(state, bits) {
        return Err(AgentError::AgentViolation(format!(
            "state {state} after visit {k} exceeds {} bits at degree {d}",
            bits.unwrap_or(0)
        )));
    }
    Ok(out)
}

/// Whether `memory_bits` bits per node give the `d` distinct states needed to
/// use every port at a degree-`d` node: `2^memory_bits >= d`.
pub fn memory_lower_bound_check(memory_bits: u32, d: u64) -> bool {
    match 1u64.checked_shl(memory_bits) {
        Some(states) => states >= d,
        None => true,
    }
}
