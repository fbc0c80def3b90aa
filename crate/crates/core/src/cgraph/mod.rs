//! Constraint graphs: the compact, placement-independent form of a
//! design-time mapping handed to the run-time manager.
//!
//! Tasks sharing a PE collapse into a task cluster carrying its resource
//! type, load, `K_max` and the relative priorities of its members.
//! Non-local messages between the same pair of PEs collapse into a
//! message cluster carrying the accumulated slot count and the hop
//! distance analysed at design time. Any placement that respects these
//! annotations inherits the analysed timing guarantees.

mod codec;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{task_load, AnalysisError, Mapping};
use crate::dse::ObjectiveVector;
use crate::model::{hop_count, Architecture, MsgIdx, PeId, ResourceTypeId, SchedulingParams, TaskGraph, TaskIdx};

pub use codec::{
    deserialize_op, read_container, serialize_op, size_cg, size_op, write_container, CONTAINER_MAGIC, EDGE_RECORD,
    MESSAGE_CLUSTER_RECORD, OBJECTIVE_RECORD, TASK_CLUSTER_RECORD,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CgError {
    #[error("input truncated: need {needed} bytes, {available} available")]
    Truncated { needed: usize, available: usize },
    #[error("edge references unknown {kind} cluster {id}")]
    UnknownCluster { kind: &'static str, id: u8 },
    #[error("field `{field}` value {value} does not fit its record")]
    FieldOverflow { field: &'static str, value: u64 },
    #[error("malformed operating point: {0}")]
    Malformed(String),
    #[error("not an operating-point container")]
    BadMagic,
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

/// Load as unsigned Q1.15 fixed point: 32768 units make 100 %.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Load(pub u16);

impl Load {
    pub const ONE: u32 = 1 << 15;

    /// Quantize upwards so the stored load never underestimates.
    pub fn from_fraction(f: f64) -> Result<Self, CgError> {
        let units = (f * f64::from(Self::ONE) - 1e-9).ceil().max(0.0);
        if units > f64::from(u16::MAX) {
            return Err(CgError::FieldOverflow { field: "load", value: units as u64 });
        }
        Ok(Load(units as u16))
    }

    pub fn units(self) -> u32 {
        u32::from(self.0)
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.0) / f64::from(Self::ONE)
    }
}

impl fmt::Display for Load {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.4}", self.as_f64())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskCluster {
    pub id: u8,
    /// Design-time task indices, highest priority first. Not part of the
    /// binary form.
    pub members: Vec<TaskIdx>,
    pub rtype: ResourceTypeId,
    pub load: Load,
    pub k_max: u32,
    /// Priority of each member slot; smaller is higher.
    pub prios: Vec<u32>,
}

impl TaskCluster {
    pub fn size(&self) -> usize {
        self.prios.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageCluster {
    pub id: u8,
    pub src: u8,
    pub dst: u8,
    pub sl: u32,
    pub hop: u32,
    /// Design-time message indices. Not part of the binary form.
    pub members: Vec<MsgIdx>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CgEdge {
    TaskToMessage(u8, u8),
    MessageToTask(u8, u8),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConstraintGraph {
    pub task_clusters: Vec<TaskCluster>,
    pub message_clusters: Vec<MessageCluster>,
    pub edges: Vec<CgEdge>,
}

impl ConstraintGraph {
    /// Structural invariants: sequential ids, bipartite edges, exactly
    /// one sender and one receiver per message cluster, consistent
    /// annotations.
    pub fn validate(&self, sl_max: u32) -> Result<(), CgError> {
        for (i, tc) in self.task_clusters.iter().enumerate() {
            if usize::from(tc.id) != i {
                return Err(CgError::Malformed(format!("task cluster {i} has id {}", tc.id)));
            }
            if (tc.k_max as usize) < tc.size() {
                return Err(CgError::Malformed(format!("task cluster {i}: k_max below cluster size")));
            }
            let mut p = tc.prios.clone();
            p.sort_unstable();
            p.dedup();
            if p.len() != tc.prios.len() {
                return Err(CgError::Malformed(format!("task cluster {i}: duplicate priorities")));
            }
        }
        let ntc = self.task_clusters.len();
        for (i, mc) in self.message_clusters.iter().enumerate() {
            if usize::from(mc.id) != i {
                return Err(CgError::Malformed(format!("message cluster {i} has id {}", mc.id)));
            }
            if usize::from(mc.src) >= ntc || usize::from(mc.dst) >= ntc {
                return Err(CgError::UnknownCluster { kind: "task", id: mc.src.max(mc.dst) });
            }
            if mc.sl == 0 || mc.sl > sl_max {
                return Err(CgError::Malformed(format!("message cluster {i}: sl {} outside 1..={sl_max}", mc.sl)));
            }
            if mc.hop < 2 {
                return Err(CgError::Malformed(format!("message cluster {i}: hop budget below 2")));
            }
            let out = self.edges.iter().filter(|e| matches!(e, CgEdge::TaskToMessage(_, m) if *m == mc.id));
            let inc = self.edges.iter().filter(|e| matches!(e, CgEdge::MessageToTask(m, _) if *m == mc.id));
            let senders: Vec<_> = out.collect();
            let receivers: Vec<_> = inc.collect();
            if senders != [&CgEdge::TaskToMessage(mc.src, mc.id)]
                || receivers != [&CgEdge::MessageToTask(mc.id, mc.dst)]
            {
                return Err(CgError::Malformed(format!(
                    "message cluster {i} must have exactly one sender and one receiver edge"
                )));
            }
        }
        if self.edges.len() != 2 * self.message_clusters.len() {
            return Err(CgError::Malformed("edges do not match message clusters".into()));
        }
        Ok(())
    }

    /// Message clusters incident to a task cluster.
    pub fn incident(&self, tc: u8) -> impl Iterator<Item = &MessageCluster> {
        self.message_clusters.iter().filter(move |mc| mc.src == tc || mc.dst == tc)
    }

    pub fn total_load_units(&self) -> u32 {
        self.task_clusters.iter().map(|tc| tc.load.units()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub cg: ConstraintGraph,
    pub objectives: ObjectiveVector,
}

/// Exact load of a set of co-bound tasks.
pub fn cluster_load(
    members: &[TaskIdx],
    params: &SchedulingParams,
    g: &TaskGraph,
    m: &Mapping,
    arch: &Architecture,
) -> Result<f64, CgError> {
    members
        .iter()
        .map(|&t| {
            let pe = m.bind[t];
            let rtype = arch.type_name(arch.pe(pe).rtype);
            let wcet = g.tasks()[t].wcet_on(rtype).ok_or_else(|| AnalysisError::MissingWcet {
                task: g.tasks()[t].id.clone(),
                rtype: rtype.to_string(),
            })?;
            Ok(task_load(params, wcet, g.period()))
        })
        .sum()
}

/// Build the constraint graph of a design-time mapping.
///
/// Task clusters are numbered in row-major order of their PE, message
/// clusters by (sender, receiver) cluster id, so any translation of the
/// whole mapping produces the same graph.
pub fn extract(
    g: &TaskGraph,
    m: &Mapping,
    params: &SchedulingParams,
    arch: &Architecture,
) -> Result<ConstraintGraph, CgError> {
    m.check(g, arch)?;
    let mut per_pe: BTreeMap<PeId, Vec<TaskIdx>> = BTreeMap::new();
    for (t, &pe) in m.bind.iter().enumerate() {
        per_pe.entry(pe).or_default().push(t);
    }
    let mut cluster_of_pe: BTreeMap<PeId, u8> = BTreeMap::new();
    let mut task_clusters = Vec::with_capacity(per_pe.len());
    for (i, (pe, mut members)) in per_pe.into_iter().enumerate() {
        let id = u8::try_from(i).map_err(|_| CgError::FieldOverflow { field: "task cluster id", value: i as u64 })?;
        members.sort_by_key(|&t| (m.prio[t], t));
        let load = Load::from_fraction(cluster_load(&members, params, g, m, arch)?)?;
        task_clusters.push(TaskCluster {
            id,
            rtype: arch.pe(pe).rtype,
            load,
            k_max: members.len() as u32 + params.k_extra,
            prios: (0..members.len() as u32).collect(),
            members,
        });
        cluster_of_pe.insert(pe, id);
    }

    let mut groups: BTreeMap<(u8, u8), Vec<MsgIdx>> = BTreeMap::new();
    for (mi, msg) in g.messages().iter().enumerate() {
        let (a, b) = (m.bind[msg.src], m.bind[msg.dst]);
        if a != b {
            groups.entry((cluster_of_pe[&a], cluster_of_pe[&b])).or_default().push(mi);
        }
    }
    let mut message_clusters = Vec::with_capacity(groups.len());
    let mut edges = Vec::with_capacity(2 * groups.len());
    for (i, ((src, dst), members)) in groups.into_iter().enumerate() {
        let id =
            u8::try_from(i).map_err(|_| CgError::FieldOverflow { field: "message cluster id", value: i as u64 })?;
        let msg = &g.messages()[members[0]];
        let hop = hop_count(arch.coord(m.bind[msg.src]), arch.coord(m.bind[msg.dst]));
        let sl = members.iter().map(|&mi| m.sl[mi]).sum();
        message_clusters.push(MessageCluster { id, src, dst, sl, hop, members });
        edges.push(CgEdge::TaskToMessage(src, id));
        edges.push(CgEdge::MessageToTask(id, dst));
    }
    Ok(ConstraintGraph { task_clusters, message_clusters, edges })
}
