//! Application and architecture model.

mod arch;
mod doc;
mod mesh;
mod taskgraph;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use arch::{
    Architecture, EnergyModel, Pe, PeId, ResourceType, ResourceTypeId, DEFAULT_FLIT_BITS, DEFAULT_ROUTER_CYCLE,
};
pub use doc::{architecture_to_toml, load_architecture, load_taskgraph, taskgraph_to_toml};
pub use mesh::{hop_count, route_hops, xy_route, xy_routers, Coord, Endpoint, Link};
pub use taskgraph::{Edge, Message, MessageSpec, MsgIdx, Task, TaskGraph, TaskGraphBuilder, TaskIdx, Vertex};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("duplicate vertex id `{0}`")]
    DuplicateId(String),
    #[error("edge references unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("edge `{from}` -> `{to}` is not between a task and a message")]
    NonBipartite { from: String, to: String },
    #[error("message `{message}` has {count} producers, expected 1")]
    Producers { message: String, count: usize },
    #[error("message `{message}` has {count} consumers, expected 1")]
    Consumers { message: String, count: usize },
    #[error("task graph contains a cycle through `{0}`")]
    Cycle(String),
}

impl ModelError {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ModelError::Invalid { field: field.into(), reason: reason.into() }
    }
}

/// Parameters of the composable time-slot scheduler on every PE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulingParams {
    /// Slot length in µs.
    pub snt: f64,
    /// OS overhead per slot in µs.
    pub sios: f64,
    /// Additional tasks admitted on a PE beyond a cluster's own.
    pub k_extra: u32,
}

impl Default for SchedulingParams {
    fn default() -> Self {
        Self { snt: 50.0, sios: 10.0, k_extra: 4 }
    }
}

impl SchedulingParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.snt.is_finite() && self.snt > 0.0) {
            return Err(ModelError::invalid("snt", "must be > 0"));
        }
        if !(self.sios.is_finite() && self.sios >= 0.0) {
            return Err(ModelError::invalid("sios", "must be >= 0"));
        }
        Ok(())
    }

    /// Scheduling slots a task of the given WCET occupies per period.
    pub fn slots(&self, wcet: f64) -> u64 {
        ceil_tolerant(wcet / self.snt)
    }
}

/// `ceil` that treats values within 1e-9 of an integer as that integer,
/// so 100.0 / 50.0 style quotients never round up through float noise.
pub(crate) fn ceil_tolerant(v: f64) -> u64 {
    let r = v.round();
    if (v - r).abs() < 1e-9 {
        r.max(0.0) as u64
    } else {
        v.ceil().max(0.0) as u64
    }
}
