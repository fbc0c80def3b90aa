//! Evolutionary multi-objective design-space exploration.
//!
//! A genome fixes, per task, a PE out of the PEs able to run it and a
//! priority gene, and per message a slot count inside its exploration
//! interval. Routing is implied by the bindings through xy-routing.

mod archive;
mod nsga;
mod objectives;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{self, FeasibilityReport, Mapping};
use crate::model::{hop_count, Architecture, PeId, SchedulingParams, TaskGraph, TaskIdx};

pub use archive::{ArchiveEntry, ParetoArchive};
pub use nsga::{explore, EaConfig};
pub use objectives::{dominates, ObjectiveVector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DseError {
    #[error("task `{0}` cannot run on any PE of the architecture")]
    NoCandidate(String),
    #[error("objective vectors have different dimensions ({left} vs {right})")]
    DimensionMismatch { left: usize, right: usize },
    #[error("invalid EA configuration: {0}")]
    Config(String),
}

/// Gene domains of one application on one architecture.
#[derive(Debug, Clone)]
pub struct SearchSpace {
    /// PEs able to run each task (a WCET entry exists for their type).
    pub candidates: Vec<Vec<PeId>>,
    /// Inclusive slot range per message. Messages too large for any link
    /// get `(sl_max, sl_max)` and are only feasible when kept local.
    pub slot_ranges: Vec<(u32, u32)>,
}

impl SearchSpace {
    pub fn new(g: &TaskGraph, arch: &Architecture) -> Result<Self, DseError> {
        let candidates = g
            .tasks()
            .iter()
            .map(|t| {
                let pes: Vec<PeId> =
                    arch.pe_ids().filter(|&p| t.wcet_on(arch.type_name(arch.pe(p).rtype)).is_some()).collect();
                if pes.is_empty() {
                    Err(DseError::NoCandidate(t.id.clone()))
                } else {
                    Ok(pes)
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        let slot_ranges = (0..g.messages().len())
            .map(|m| analysis::slots_interval(g, m, arch).unwrap_or((arch.sl_max(), arch.sl_max())))
            .collect();
        Ok(Self { candidates, slot_ranges })
    }

    pub fn genome_len(&self) -> usize {
        2 * self.candidates.len() + self.slot_ranges.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Genome {
    /// Index into the task's candidate list.
    pub pe: Vec<u32>,
    pub prio: Vec<u32>,
    /// Absolute slot count.
    pub sl: Vec<u32>,
}

impl Genome {
    pub fn is_valid(&self, space: &SearchSpace) -> bool {
        self.pe.len() == space.candidates.len()
            && self.prio.len() == space.candidates.len()
            && self.sl.len() == space.slot_ranges.len()
            && self.pe.iter().zip(&space.candidates).all(|(&g, c)| (g as usize) < c.len())
            && self.sl.iter().zip(&space.slot_ranges).all(|(&s, &(lo, hi))| lo <= s && s <= hi)
    }
}

/// Translate a genome into a mapping. Priorities on each PE are the
/// stable rank of the priority genes, ties broken by task index.
pub fn decode(genome: &Genome, g: &TaskGraph, arch: &Architecture, space: &SearchSpace) -> Mapping {
    let bind: Vec<PeId> = genome.pe.iter().zip(&space.candidates).map(|(&gene, cands)| cands[gene as usize]).collect();
    let mut per_pe: BTreeMap<PeId, Vec<TaskIdx>> = BTreeMap::new();
    for (t, &pe) in bind.iter().enumerate() {
        per_pe.entry(pe).or_default().push(t);
    }
    let mut prio = vec![0u32; bind.len()];
    for tasks in per_pe.values_mut() {
        tasks.sort_by_key(|&t| (genome.prio[t], t));
        for (rank, &t) in tasks.iter().enumerate() {
            prio[t] = rank as u32;
        }
    }
    Mapping::new(g, arch, bind, prio, genome.sl.clone())
}

/// Make every task outrank its transitive successors on the same PE.
///
/// The priority levels already used on a PE are kept; the tasks are
/// re-ordered by a topological sort of the precedence relation that
/// always picks the ready task with the best current priority. A
/// consistent assignment is left unchanged.
pub fn repair_priorities(g: &TaskGraph, m: &Mapping) -> Mapping {
    let reach = g.reachability();
    let mut out = m.clone();
    let mut per_pe: BTreeMap<PeId, Vec<TaskIdx>> = BTreeMap::new();
    for (t, &pe) in m.bind.iter().enumerate() {
        per_pe.entry(pe).or_default().push(t);
    }
    for tasks in per_pe.values() {
        if tasks.len() < 2 {
            continue;
        }
        let mut levels: Vec<u32> = tasks.iter().map(|&t| m.prio[t]).collect();
        levels.sort_unstable();
        let mut remaining = tasks.clone();
        let mut order = Vec::with_capacity(tasks.len());
        while !remaining.is_empty() {
            let (pos, _) = remaining
                .iter()
                .enumerate()
                .filter(|(_, &t)| !remaining.iter().any(|&o| o != t && reach[o][t]))
                .min_by_key(|(_, &t)| (m.prio[t], t))
                .expect("precedence among tasks is acyclic");
            order.push(remaining.remove(pos));
        }
        for (t, level) in order.into_iter().zip(levels) {
            out.prio[t] = level;
        }
    }
    out
}

/// Feasibility and objective vector of a mapping.
pub fn evaluate(
    g: &TaskGraph,
    m: &Mapping,
    params: &SchedulingParams,
    arch: &Architecture,
) -> (FeasibilityReport, ObjectiveVector) {
    let report = analysis::is_feasible(g, m, params, arch);
    let energy = analysis::energy(g, m, arch).map(|e| e.total()).unwrap_or(f64::INFINITY);

    let hops: Vec<u32> = g
        .messages()
        .iter()
        .map(|msg| hop_count(arch.coord(m.bind[msg.src]), arch.coord(m.bind[msg.dst])))
        .filter(|&h| h > 0)
        .collect();
    let msg_count = hops.len() as u32;
    let avg_hop = if hops.is_empty() { 0.0 } else { f64::from(hops.iter().sum::<u32>()) / hops.len() as f64 };
    let min_hop = hops.iter().copied().min().unwrap_or(0);

    let mut used: Vec<PeId> = m.bind.clone();
    used.sort_unstable();
    used.dedup();
    let mut alloc_per_type = vec![0u32; arch.types().len()];
    for pe in used {
        alloc_per_type[arch.pe(pe).rtype.index()] += 1;
    }
    (report, ObjectiveVector { energy, msg_count, avg_hop, min_hop, alloc_per_type })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Coord, TaskGraphBuilder};

    fn arch() -> Architecture {
        Architecture::homogeneous(2, 2, 1.0, 10).unwrap()
    }

    fn chain() -> TaskGraph {
        TaskGraphBuilder::new("c", 10_000.0, 10_000.0)
            .task("t1", [("pe", 100.0)])
            .task("t2", [("pe", 100.0)])
            .message("m", 64, "t1", "t2")
            .build()
            .unwrap()
    }

    #[test]
    fn decode_single_task() {
        let g = TaskGraphBuilder::new("s", 1000.0, 1000.0).task("t", [("pe", 10.0)]).build().unwrap();
        let a = arch();
        let space = SearchSpace::new(&g, &a).unwrap();
        let m = decode(&Genome { pe: vec![3], prio: vec![7], sl: vec![] }, &g, &a, &space);
        assert_eq!(m.bind, vec![PeId(3)]);
        assert_eq!(m.prio, vec![0]);
    }

    #[test]
    fn decode_ties_and_local_messages() {
        let g = chain();
        let a = arch();
        let space = SearchSpace::new(&g, &a).unwrap();
        let m = decode(&Genome { pe: vec![1, 1], prio: vec![5, 5], sl: vec![4] }, &g, &a, &space);
        assert_eq!(m.prio, vec![0, 1]);
        assert!(m.route[0].is_empty());
        let m = decode(&Genome { pe: vec![0, 1], prio: vec![0, 0], sl: vec![4] }, &g, &a, &space);
        assert_eq!(m.route[0].len(), 3);
        assert_eq!(m.sl, vec![4]);
    }

    #[test]
    fn no_candidate_error() {
        let g = TaskGraphBuilder::new("s", 1000.0, 1000.0).task("t", [("dsp", 10.0)]).build().unwrap();
        assert!(matches!(SearchSpace::new(&g, &arch()), Err(DseError::NoCandidate(_))));
    }

    #[test]
    fn repair_swaps_inverted_chain() {
        let g = chain();
        let a = arch();
        let m = Mapping::new(&g, &a, vec![PeId(0), PeId(0)], vec![1, 0], vec![1]);
        let r = repair_priorities(&g, &m);
        assert_eq!(r.prio, vec![0, 1]);
        assert_eq!(repair_priorities(&g, &r), r);
    }

    #[test]
    fn repair_leaves_independent_tasks() {
        let g = TaskGraphBuilder::new("i", 1000.0, 1000.0)
            .task("a", [("pe", 1.0)])
            .task("b", [("pe", 1.0)])
            .build()
            .unwrap();
        let a = arch();
        let m = Mapping::new(&g, &a, vec![PeId(0), PeId(0)], vec![1, 0], vec![]);
        assert_eq!(repair_priorities(&g, &m), m);
    }

    #[test]
    fn repair_transitive_predecessor() {
        // t1 -> t2 -> t3 with t2 elsewhere: t1 must still outrank t3.
        let g = TaskGraphBuilder::new("t", 10_000.0, 10_000.0)
            .task("t1", [("pe", 1.0)])
            .task("t2", [("pe", 1.0)])
            .task("t3", [("pe", 1.0)])
            .message("m1", 8, "t1", "t2")
            .message("m2", 8, "t2", "t3")
            .build()
            .unwrap();
        let a = arch();
        let m = Mapping::new(&g, &a, vec![PeId(0), PeId(1), PeId(0)], vec![4, 0, 2], vec![1, 1]);
        let r = repair_priorities(&g, &m);
        assert_eq!(r.prio, vec![2, 0, 4]);
    }

    #[test]
    fn evaluate_examples() {
        let g = chain();
        let a = arch();
        let local = Mapping::new(&g, &a, vec![PeId(2), PeId(2)], vec![0, 1], vec![1]);
        let (_, ov) = evaluate(&g, &local, &SchedulingParams::default(), &a);
        assert_eq!(ov.msg_count, 0);
        assert_eq!(ov.alloc_per_type, vec![1]);

        let p0 = a.pe_at(Coord::new(0, 0)).unwrap();
        let p1 = a.pe_at(Coord::new(1, 0)).unwrap();
        let adj = Mapping::new(&g, &a, vec![p0, p1], vec![0, 0], vec![10]);
        let (report, ov) = evaluate(&g, &adj, &SchedulingParams::default(), &a);
        assert!(report.is_feasible());
        assert_eq!(ov.min_hop, 2);
        assert_eq!(ov.avg_hop, 2.0);
        assert_eq!(ov.alloc_per_type, vec![2]);

        let tight = TaskGraphBuilder::new("x", 100.0, 100.0).task("t", [("pe", 100.0)]).build().unwrap();
        let m = Mapping::new(&tight, &a, vec![PeId(0)], vec![0], vec![]);
        let (report, ov) = evaluate(&tight, &m, &SchedulingParams::default(), &a);
        assert!(!report.is_feasible());
        assert_eq!(ov.energy, 100_000.0);
    }
}
