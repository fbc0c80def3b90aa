use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Assignment, RtmError};
use crate::cgraph::{ConstraintGraph, Load};
use crate::model::{Architecture, PeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AppId(pub u32);

impl fmt::Display for AppId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "app{}", self.0)
    }
}

/// One task cluster bound to a PE.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Resident {
    pub app: AppId,
    pub cluster: u8,
    /// Load in Q1.15 units.
    pub load: u32,
    pub tasks: u32,
    pub k_max: u32,
    pub prios: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Placement {
    assignment: Assignment,
    /// (link index, slots) per routed message cluster hop.
    slots: Vec<(usize, u32)>,
}

/// Occupancy of the whole system.
///
/// Sums are never cached: every query walks the residents, so removing an
/// application restores the previous state exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    arch: Arc<Architecture>,
    available: Vec<bool>,
    residents: Vec<Vec<Resident>>,
    link_slots: Vec<u32>,
    apps: BTreeMap<AppId, Placement>,
}

impl SystemState {
    pub fn new(arch: Arc<Architecture>) -> Self {
        let available = arch.pes().iter().map(|p| p.available).collect();
        let residents = vec![Vec::new(); arch.pes().len()];
        let link_slots = vec![0; arch.num_links()];
        Self { arch, available, residents, link_slots, apps: BTreeMap::new() }
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn shared_arch(&self) -> Arc<Architecture> {
        Arc::clone(&self.arch)
    }

    pub fn is_available(&self, pe: PeId) -> bool {
        self.available[pe.index()]
    }

    /// Mark a PE (un)available for new placements. Residents stay.
    pub fn set_available(&mut self, pe: PeId, available: bool) {
        self.available[pe.index()] = available;
    }

    pub fn residents(&self, pe: PeId) -> &[Resident] {
        &self.residents[pe.index()]
    }

    pub fn load_units(&self, pe: PeId) -> u32 {
        self.residents(pe).iter().map(|r| r.load).sum()
    }

    pub fn task_count(&self, pe: PeId) -> u32 {
        self.residents(pe).iter().map(|r| r.tasks).sum()
    }

    /// Smallest `K_max` among the residents, `None` on an empty PE.
    pub fn task_cap(&self, pe: PeId) -> Option<u32> {
        self.residents(pe).iter().map(|r| r.k_max).min()
    }

    pub fn occupied_levels(&self, pe: PeId) -> BTreeSet<u32> {
        self.residents(pe).iter().flat_map(|r| r.prios.iter().copied()).collect()
    }

    pub fn link_used(&self, link: usize) -> u32 {
        self.link_slots[link]
    }

    pub fn apps(&self) -> impl Iterator<Item = AppId> + '_ {
        self.apps.keys().copied()
    }

    pub fn assignment(&self, app: AppId) -> Option<&Assignment> {
        self.apps.get(&app).map(|p| &p.assignment)
    }

    /// PEs hosting at least one cluster.
    pub fn occupied_pes(&self) -> usize {
        self.residents.iter().filter(|r| !r.is_empty()).count()
    }

    pub(crate) fn push_resident(&mut self, pe: PeId, r: Resident) {
        self.residents[pe.index()].push(r);
    }

    pub(crate) fn pop_resident(&mut self, pe: PeId) {
        self.residents[pe.index()].pop();
    }

    pub(crate) fn add_slots(&mut self, link: usize, sl: u32) {
        self.link_slots[link] += sl;
    }

    pub(crate) fn sub_slots(&mut self, link: usize, sl: u32) {
        self.link_slots[link] -= sl;
    }

    /// Apply an assignment atomically. Fails, leaving the state untouched,
    /// if the assignment is incomplete, references unknown links, or would
    /// break a state invariant.
    pub fn commit(&mut self, app: AppId, cg: &ConstraintGraph, asg: &Assignment) -> Result<(), RtmError> {
        if self.apps.contains_key(&app) {
            return Err(RtmError::AlreadyMapped(app));
        }
        if asg.bind.len() != cg.task_clusters.len()
            || asg.routes.len() != cg.message_clusters.len()
            || asg.prios.len() != cg.task_clusters.len()
            || !asg.is_complete()
        {
            return Err(RtmError::Incomplete(format!("{app}: assignment does not cover the constraint graph")));
        }
        let mut next = self.clone();
        for (tc, pe) in cg.task_clusters.iter().zip(&asg.bind) {
            let pe = pe.expect("complete");
            if pe.index() >= next.residents.len() {
                return Err(RtmError::Incomplete(format!("{app}: unknown {pe}")));
            }
            let prios = &asg.prios[usize::from(tc.id)];
            if prios.len() != tc.size() {
                return Err(RtmError::Incomplete(format!("{app}: cluster {} priority count", tc.id)));
            }
            next.push_resident(
                pe,
                Resident {
                    app,
                    cluster: tc.id,
                    load: tc.load.units(),
                    tasks: tc.size() as u32,
                    k_max: tc.k_max,
                    prios: prios.clone(),
                },
            );
        }
        let mut slots = Vec::new();
        for (mc, route) in cg.message_clusters.iter().zip(&asg.routes) {
            for link in route.as_ref().expect("complete") {
                let l = next
                    .arch
                    .link_index(link)
                    .ok_or_else(|| RtmError::Incomplete(format!("{app}: link {link} outside the mesh")))?;
                next.add_slots(l, mc.sl);
                slots.push((l, mc.sl));
            }
        }
        next.apps.insert(app, Placement { assignment: asg.clone(), slots });
        next.check_invariants()?;
        *self = next;
        Ok(())
    }

    /// Release every cluster, route and priority level of an application.
    pub fn remove(&mut self, app: AppId) -> Result<Assignment, RtmError> {
        let placement = self.apps.remove(&app).ok_or(RtmError::UnknownApp(app))?;
        for r in &mut self.residents {
            r.retain(|x| x.app != app);
        }
        for &(l, sl) in &placement.slots {
            self.sub_slots(l, sl);
        }
        Ok(placement.assignment)
    }

    pub fn check_invariants(&self) -> Result<(), RtmError> {
        let err = |s: String| Err(RtmError::Invariant(s));
        for pe in self.arch.pe_ids() {
            if self.load_units(pe) > Load::ONE {
                return err(format!("{pe} loaded beyond 100 %"));
            }
            if let Some(cap) = self.task_cap(pe) {
                if self.task_count(pe) > cap {
                    return err(format!("{pe} hosts {} tasks, cap {cap}", self.task_count(pe)));
                }
            }
            let levels: usize = self.residents(pe).iter().map(|r| r.prios.len()).sum();
            if self.occupied_levels(pe).len() != levels {
                return err(format!("{pe} has duplicate priority levels"));
            }
            for r in self.residents(pe) {
                if r.prios.len() != r.tasks as usize {
                    return err(format!("{pe}: {} cluster {} priority count", r.app, r.cluster));
                }
                if !self.apps.contains_key(&r.app) {
                    return err(format!("{pe}: resident of unmapped {}", r.app));
                }
            }
        }
        let mut expected = vec![0u32; self.link_slots.len()];
        for p in self.apps.values() {
            for &(l, sl) in &p.slots {
                expected[l] += sl;
            }
        }
        if expected != self.link_slots {
            return err("link slot totals disagree with the routed clusters".into());
        }
        let sl_max = self.arch.sl_max();
        if let Some(l) = self.link_slots.iter().position(|&s| s > sl_max) {
            return err(format!("link {l} carries more than {sl_max} slots"));
        }
        Ok(())
    }
}
