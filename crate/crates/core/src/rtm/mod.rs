//! Run-time manager: system occupancy, the mapping constraints, the
//! backtracking solver and first-fit operating-point admission.
//!
//! The constraints a placement of a constraint graph must satisfy:
//!
//! * C.1 each message cluster gets a connected route no longer than its
//!   hop budget,
//! * C.2 no link carries more than `sl_max` slots,
//! * C.3 each task cluster lands on an available PE of its type,
//! * C.4 no PE is loaded beyond 100 %,
//! * C.5 no PE hosts more tasks than the smallest `K_max` among the
//!   clusters sharing it.

mod constraints;
mod solver;
mod state;
mod verify;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Link, PeId};

pub use constraints::{check_c1, check_c2, check_c3, check_c4, check_c5, shift_priorities};
pub use solver::{admit, backtrack, AdmitOutcome, AttemptOutcome, AttemptRecord, SolveOutcome, SolverOptions};
pub use state::{AppId, Resident, SystemState};
pub use verify::verify;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RtmError {
    #[error("application {0} is already mapped")]
    AlreadyMapped(AppId),
    #[error("application {0} is not mapped")]
    UnknownApp(AppId),
    #[error("assignment is incomplete: {0}")]
    Incomplete(String),
    #[error("state invariant violated: {0}")]
    Invariant(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IsolationMode {
    /// Clusters of different applications may share a PE within C.4/C.5.
    Temporal,
    /// A PE hosts the tasks of at most one cluster at a time.
    Spatial,
}

impl fmt::Display for IsolationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IsolationMode::Temporal => "ti",
            IsolationMode::Spatial => "spi",
        })
    }
}

impl std::str::FromStr for IsolationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ti" | "temporal" => Ok(IsolationMode::Temporal),
            "spi" | "spatial" => Ok(IsolationMode::Spatial),
            _ => Err(format!("unknown isolation mode `{s}` (expected ti or spi)")),
        }
    }
}

/// Placement of one constraint graph, indexed by cluster id.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Assignment {
    pub bind: Vec<Option<PeId>>,
    /// Route per message cluster; empty when both ends share a PE.
    pub routes: Vec<Option<Vec<Link>>>,
    /// Shifted priority levels per task cluster, in member order.
    pub prios: Vec<Vec<u32>>,
}

impl Assignment {
    pub fn empty(task_clusters: usize, message_clusters: usize) -> Self {
        Self {
            bind: vec![None; task_clusters],
            routes: vec![None; message_clusters],
            prios: vec![Vec::new(); task_clusters],
        }
    }

    pub fn is_complete(&self) -> bool {
        self.bind.iter().all(Option::is_some) && self.routes.iter().all(Option::is_some)
    }

    pub fn pe(&self, tc: u8) -> Option<PeId> {
        self.bind.get(usize::from(tc)).copied().flatten()
    }
}
