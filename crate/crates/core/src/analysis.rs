//! Composable timing and energy analysis of a design-time mapping.
//!
//! All functions here look at one application in isolation. Interference
//! from co-mapped applications is bounded by the declared budgets
//! (`sl_max` slots per link, `K_max` tasks per PE), which is what makes
//! the results valid regardless of what else runs on the chip.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    ceil_tolerant, hop_count, xy_route, Architecture, Link, MsgIdx, PeId, SchedulingParams, TaskGraph, TaskIdx, Vertex,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("task `{task}` has no WCET for resource type `{rtype}`")]
    MissingWcet { task: String, rtype: String },
    #[error("mapping is incomplete: {0}")]
    Incomplete(String),
    #[error("message `{message}` needs {demand:.3} of a link, more than its full capacity")]
    Unroutable { message: String, demand: f64 },
}

/// A concrete design-time binding, routing, priority and slot assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mapping {
    pub bind: Vec<PeId>,
    pub route: Vec<Vec<Link>>,
    /// Smaller value means higher priority; unique among tasks on one PE.
    pub prio: Vec<u32>,
    pub sl: Vec<u32>,
}

impl Mapping {
    /// Build a mapping with xy routes derived from the bindings.
    pub fn new(g: &TaskGraph, arch: &Architecture, bind: Vec<PeId>, prio: Vec<u32>, sl: Vec<u32>) -> Self {
        let route = g
            .messages()
            .iter()
            .map(|m| match (bind.get(m.src), bind.get(m.dst)) {
                (Some(&a), Some(&b)) => xy_route(arch.coord(a), arch.coord(b)),
                _ => Vec::new(),
            })
            .collect();
        Self { bind, route, prio, sl }
    }

    pub fn hop(&self, g: &TaskGraph, arch: &Architecture, m: MsgIdx) -> u32 {
        let msg = &g.messages()[m];
        hop_count(arch.coord(self.bind[msg.src]), arch.coord(self.bind[msg.dst]))
    }

    pub fn is_local(&self, g: &TaskGraph, m: MsgIdx) -> bool {
        let msg = &g.messages()[m];
        self.bind[msg.src] == self.bind[msg.dst]
    }

    pub fn tasks_on(&self, pe: PeId) -> impl Iterator<Item = TaskIdx> + '_ {
        self.bind.iter().enumerate().filter(move |(_, &p)| p == pe).map(|(t, _)| t)
    }

    /// Structural checks: completeness, WCET availability, xy routes and
    /// per-PE priority uniqueness.
    pub fn check(&self, g: &TaskGraph, arch: &Architecture) -> Result<(), AnalysisError> {
        let nt = g.tasks().len();
        let nm = g.messages().len();
        if self.bind.len() != nt || self.prio.len() != nt {
            return Err(AnalysisError::Incomplete(format!(
                "{} bindings / {} priorities for {nt} tasks",
                self.bind.len(),
                self.prio.len()
            )));
        }
        if self.route.len() != nm || self.sl.len() != nm {
            return Err(AnalysisError::Incomplete(format!(
                "{} routes / {} slot counts for {nm} messages",
                self.route.len(),
                self.sl.len()
            )));
        }
        for (t, &pe) in self.bind.iter().enumerate() {
            if pe.index() >= arch.pes().len() {
                return Err(AnalysisError::Incomplete(format!("task {t} bound to unknown {pe}")));
            }
            wcet_of(g, arch, t, pe)?;
        }
        for (mi, m) in g.messages().iter().enumerate() {
            let expected = xy_route(arch.coord(self.bind[m.src]), arch.coord(self.bind[m.dst]));
            if self.route[mi] != expected {
                return Err(AnalysisError::Incomplete(format!("message `{}` is not xy-routed", m.id)));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for (t, &pe) in self.bind.iter().enumerate() {
            if !seen.insert((pe, self.prio[t])) {
                return Err(AnalysisError::Incomplete(format!("priority {} used twice on {pe}", self.prio[t])));
            }
        }
        Ok(())
    }
}

fn wcet_of(g: &TaskGraph, arch: &Architecture, t: TaskIdx, pe: PeId) -> Result<f64, AnalysisError> {
    let task = &g.tasks()[t];
    let rtype = arch.type_name(arch.pe(pe).rtype);
    task.wcet_on(rtype).ok_or_else(|| AnalysisError::MissingWcet { task: task.id.clone(), rtype: rtype.to_string() })
}

/// Time share of one scheduling period the task reserves on its PE.
pub(crate) fn task_load(params: &SchedulingParams, wcet: f64, period: f64) -> f64 {
    params.slots(wcet) as f64 * (params.snt + params.sios) / period
}

/// Utilization of `pe` induced by the tasks of `g` bound to it.
pub fn pe_utilization(
    g: &TaskGraph,
    m: &Mapping,
    params: &SchedulingParams,
    arch: &Architecture,
    pe: PeId,
) -> Result<f64, AnalysisError> {
    m.tasks_on(pe).map(|t| Ok(task_load(params, wcet_of(g, arch, t, pe)?, g.period()))).sum()
}

/// Exploration interval `[min, max]` of the slot count of a message.
pub fn slots_interval(g: &TaskGraph, msg: MsgIdx, arch: &Architecture) -> Result<(u32, u32), AnalysisError> {
    let demand = g.bandwidth(msg) / arch.link_capacity();
    let min = ceil_tolerant(demand * f64::from(arch.sl_max()));
    if min > u64::from(arch.sl_max()) {
        return Err(AnalysisError::Unroutable { message: g.messages()[msg].id.clone(), demand });
    }
    Ok((min.max(1) as u32, arch.sl_max()))
}

/// Accumulated slots per route (grouped by source and target PE).
#[derive(Debug, Clone, PartialEq)]
pub struct LinkSlotReport {
    pub sums: BTreeMap<(PeId, PeId), u32>,
    pub overloaded: Vec<(PeId, PeId)>,
}

impl LinkSlotReport {
    pub fn feasible(&self) -> bool {
        self.overloaded.is_empty()
    }
}

pub fn link_slots_feasible(g: &TaskGraph, m: &Mapping, arch: &Architecture) -> LinkSlotReport {
    let mut sums: BTreeMap<(PeId, PeId), u32> = BTreeMap::new();
    for (mi, msg) in g.messages().iter().enumerate() {
        let (a, b) = (m.bind[msg.src], m.bind[msg.dst]);
        if a != b {
            *sums.entry((a, b)).or_default() += m.sl[mi];
        }
    }
    let overloaded = sums.iter().filter(|(_, &s)| s > arch.sl_max()).map(|(&k, _)| k).collect();
    LinkSlotReport { sums, overloaded }
}

/// Slots per directed physical link when every non-local message takes
/// its xy route. Only links carrying traffic appear.
pub fn physical_link_slots(g: &TaskGraph, m: &Mapping, arch: &Architecture) -> BTreeMap<usize, u32> {
    let mut used: BTreeMap<usize, u32> = BTreeMap::new();
    for (mi, msg) in g.messages().iter().enumerate() {
        let (a, b) = (m.bind[msg.src], m.bind[msg.dst]);
        if a != b {
            for l in arch.route_link_ids(a, b) {
                *used.entry(l).or_default() += m.sl[mi];
            }
        }
    }
    used
}

/// Conservative worst-case end-to-end latency in µs.
///
/// Task term: every required scheduling slot of a task may wait for the
/// slots of all other tasks the PE admits, so a task costs
/// `ceil(wcet / snt) * K_max * (snt + sios)` with `K_max` the number of
/// co-bound tasks of this application plus `k_extra`.
///
/// Message term: `hop * router_cycle + ceil(size / flit_bits) *
/// (sl_max / sl) * snt`, i.e. every flit waits a full TDM round scaled by
/// the reserved share. Local messages cost nothing.
///
/// The bound is the longest source-to-sink path over the task graph.
pub fn worst_case_latency(
    g: &TaskGraph,
    m: &Mapping,
    params: &SchedulingParams,
    arch: &Architecture,
) -> Result<f64, AnalysisError> {
    if m.bind.len() != g.tasks().len() {
        return Err(AnalysisError::Incomplete("unbound task".into()));
    }
    if m.sl.len() != g.messages().len() {
        return Err(AnalysisError::Incomplete("unrouted message".into()));
    }
    let mut on_pe: BTreeMap<PeId, u32> = BTreeMap::new();
    for &pe in &m.bind {
        *on_pe.entry(pe).or_default() += 1;
    }

    let mut task_finish = vec![0.0f64; g.tasks().len()];
    let mut msg_finish = vec![0.0f64; g.messages().len()];
    let mut task_ready = vec![0.0f64; g.tasks().len()];
    let mut worst = 0.0f64;
    for &v in g.topological() {
        match v {
            Vertex::Task(t) => {
                let pe = m.bind[t];
                let k_max = on_pe[&pe] + params.k_extra;
                let wcet = wcet_of(g, arch, t, pe)?;
                let term = params.slots(wcet) as f64 * f64::from(k_max) * (params.snt + params.sios);
                task_finish[t] = task_ready[t] + term;
                worst = worst.max(task_finish[t]);
            }
            Vertex::Message(mi) => {
                let msg = &g.messages()[mi];
                let term = if m.is_local(g, mi) {
                    0.0
                } else {
                    let sl = m.sl[mi];
                    if sl == 0 {
                        return Err(AnalysisError::Incomplete(format!("message `{}` has no slots", msg.id)));
                    }
                    let flits = msg.size.div_ceil(u64::from(arch.flit_bits()));
                    f64::from(m.hop(g, arch, mi)) * arch.router_cycle()
                        + flits as f64 * (f64::from(arch.sl_max()) / f64::from(sl)) * params.snt
                };
                msg_finish[mi] = task_finish[msg.src] + term;
                task_ready[msg.dst] = task_ready[msg.dst].max(msg_finish[mi]);
            }
        }
    }
    Ok(worst)
}

/// Energy split into processing and communication parts, in nJ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Energy {
    pub pe: f64,
    pub noc: f64,
}

impl Energy {
    pub fn total(&self) -> f64 {
        self.pe + self.noc
    }
}

/// Per-bit NoC energy of a route with `hop` routers, nJ.
pub fn noc_energy_per_bit(arch: &Architecture, hop: u32) -> f64 {
    if hop == 0 {
        return 0.0;
    }
    let e = arch.energy();
    f64::from(hop) * e.e_sbit + f64::from(hop - 1) * e.e_lbit
}

/// Maximal energy per activation. Power in W times WCET in µs gives µJ,
/// scaled here to nJ to match the NoC coefficients.
pub fn energy(g: &TaskGraph, m: &Mapping, arch: &Architecture) -> Result<Energy, AnalysisError> {
    let mut pe_energy = 0.0;
    for (t, &pe) in m.bind.iter().enumerate() {
        pe_energy += arch.pe(pe).power * wcet_of(g, arch, t, pe)? * 1e3;
    }
    let noc = g
        .messages()
        .iter()
        .enumerate()
        .map(|(mi, msg)| noc_energy_per_bit(arch, m.hop(g, arch, mi)) * msg.size as f64)
        .sum();
    Ok(Energy { pe: pe_energy, noc })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    Deadline { latency: f64, deadline: f64 },
    Overutilized { pe: PeId, utilization: f64 },
    LinkSlots { src: PeId, dst: PeId, slots: u32 },
    PhysicalLink { link: usize, slots: u32 },
    SlotInterval { message: String, sl: u32, min: u32, max: u32 },
    Unroutable { message: String },
    Malformed(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Deadline { latency, deadline } => {
                write!(f, "deadline: latency bound {latency:.1} us exceeds {deadline:.1} us")
            }
            Violation::Overutilized { pe, utilization } => {
                write!(f, "utilization: {pe} loaded to {utilization:.3}")
            }
            Violation::LinkSlots { src, dst, slots } => {
                write!(f, "slots: route {src}->{dst} needs {slots} slots")
            }
            Violation::PhysicalLink { link, slots } => {
                write!(f, "slots: link {link} carries {slots} slots")
            }
            Violation::SlotInterval { message, sl, min, max } => {
                write!(f, "slots: message `{message}` has {sl} slots outside [{min}, {max}]")
            }
            Violation::Unroutable { message } => write!(f, "bandwidth: message `{message}` cannot be routed"),
            Violation::Malformed(why) => write!(f, "mapping: {why}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub latency: Option<f64>,
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check deadline, PE utilization and link slot budgets; every violated
/// condition is reported.
pub fn is_feasible(g: &TaskGraph, m: &Mapping, params: &SchedulingParams, arch: &Architecture) -> FeasibilityReport {
    let mut report = FeasibilityReport::default();
    if let Err(e) = m.check(g, arch) {
        report.violations.push(Violation::Malformed(e.to_string()));
        return report;
    }

    for (mi, msg) in g.messages().iter().enumerate() {
        if m.is_local(g, mi) {
            continue;
        }
        match slots_interval(g, mi, arch) {
            Ok((min, max)) => {
                let sl = m.sl[mi];
                if sl < min || sl > max {
                    report.violations.push(Violation::SlotInterval { message: msg.id.clone(), sl, min, max });
                }
            }
            Err(_) => report.violations.push(Violation::Unroutable { message: msg.id.clone() }),
        }
    }

    let mut pes: Vec<PeId> = m.bind.clone();
    pes.sort_unstable();
    pes.dedup();
    for pe in pes {
        let u = pe_utilization(g, m, params, arch, pe).expect("checked above");
        if u > 1.0 + 1e-12 {
            report.violations.push(Violation::Overutilized { pe, utilization: u });
        }
    }

    let slots = link_slots_feasible(g, m, arch);
    for (src, dst) in slots.overloaded {
        report.violations.push(Violation::LinkSlots { src, dst, slots: slots.sums[&(src, dst)] });
    }
    for (link, slots) in physical_link_slots(g, m, arch) {
        if slots > arch.sl_max() {
            report.violations.push(Violation::PhysicalLink { link, slots });
        }
    }

    match worst_case_latency(g, m, params, arch) {
        Ok(latency) => {
            report.latency = Some(latency);
            if latency > g.deadline() {
                report.violations.push(Violation::Deadline { latency, deadline: g.deadline() });
            }
        }
        Err(e) => report.violations.push(Violation::Malformed(e.to_string())),
    }
    report
}
