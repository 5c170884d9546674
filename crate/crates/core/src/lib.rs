//! Exploration of anonymous port-labeled graphs by oblivious agents.
//!
//! An oblivious agent carries no memory and does not learn the port it arrived
//! through; its only inputs are the degree of the current node and that node's
//! whiteboard. Such an agent is characterized by the outport it takes on its
//! `i`-th visit to a node of degree `d`.
//!
//! - [`graph`]: port-labeled graphs, builders, validation, JSON format.
//! - [`agent`]: rotor-router, scripted and whiteboard agents.
//! - [`sim`]: deterministic simulation with full traces.
//! - [`adversary`]: worst-case path and clique-path instances for any agent.
//! - [`experiments`]: brute-force oracles, sweeps and reports.

pub mod adversary;
pub mod agent;
pub mod experiments;
pub mod graph;
pub mod sim;

pub use adversary::{AdversarialInstance, Verdict};
pub use agent::{BuiltinAgent, PortFunction, ScriptedAgent, WhiteboardAgent};
pub use graph::{NodeId, PathLabeling, Port, PortLabeledGraph};
pub use sim::{SimulationTrace, StopCondition};
