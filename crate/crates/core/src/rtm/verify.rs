use std::collections::{BTreeMap, BTreeSet};

use super::{Assignment, IsolationMode, SolverOptions, SystemState};
use crate::cgraph::{ConstraintGraph, Load};
use crate::model::{Architecture, Coord, Endpoint, Link, PeId};

/// Re-check a complete assignment of `cg` against the state it was
/// computed on, from scratch and without the solver's incremental
/// bookkeeping. Returns the first problem found.
pub fn verify(cg: &ConstraintGraph, state: &SystemState, asg: &Assignment, opts: &SolverOptions) -> Result<(), String> {
    let arch = state.arch();
    if asg.bind.len() != cg.task_clusters.len()
        || asg.prios.len() != cg.task_clusters.len()
        || asg.routes.len() != cg.message_clusters.len()
    {
        return Err("assignment shape does not match the constraint graph".into());
    }
    let mut per_pe: BTreeMap<PeId, Vec<usize>> = BTreeMap::new();
    for (i, tc) in cg.task_clusters.iter().enumerate() {
        let pe = asg.bind[i].ok_or_else(|| format!("task cluster {i} unbound"))?;
        if pe.index() >= arch.pes().len() {
            return Err(format!("task cluster {i} bound to unknown {pe}"));
        }
        if !state.is_available(pe) {
            return Err(format!("task cluster {i} on unavailable {pe}"));
        }
        if arch.pe(pe).rtype != tc.rtype {
            return Err(format!("task cluster {i} on {pe} of the wrong type"));
        }
        let p = &asg.prios[i];
        if p.len() != tc.size() {
            return Err(format!("task cluster {i} has {} priorities for {} tasks", p.len(), tc.size()));
        }
        for a in 0..p.len() {
            for b in 0..p.len() {
                if (tc.prios[a] < tc.prios[b]) != (p[a] < p[b]) {
                    return Err(format!("task cluster {i} priority order changed"));
                }
            }
        }
        per_pe.entry(pe).or_default().push(i);
    }

    for (&pe, clusters) in &per_pe {
        let residents = state.residents(pe);
        if opts.mode == IsolationMode::Spatial && (!residents.is_empty() || clusters.len() > 1) {
            return Err(format!("{pe} is shared under spatial isolation"));
        }
        let mut levels: Vec<u32> = residents.iter().flat_map(|r| r.prios.iter().copied()).collect();
        levels.extend(clusters.iter().flat_map(|&i| asg.prios[i].iter().copied()));
        if levels.iter().collect::<BTreeSet<_>>().len() != levels.len() {
            return Err(format!("{pe} has colliding priority levels"));
        }
        if opts.mode == IsolationMode::Temporal {
            let load: u32 = residents.iter().map(|r| r.load).sum::<u32>()
                + clusters.iter().map(|&i| cg.task_clusters[i].load.units()).sum::<u32>();
            if load > Load::ONE {
                return Err(format!("{pe} overloaded"));
            }
            let tasks: u32 = residents.iter().map(|r| r.tasks).sum::<u32>()
                + clusters.iter().map(|&i| cg.task_clusters[i].size() as u32).sum::<u32>();
            let cap = residents
                .iter()
                .map(|r| r.k_max)
                .chain(clusters.iter().map(|&i| cg.task_clusters[i].k_max))
                .min()
                .expect("at least one cluster");
            if tasks > cap {
                return Err(format!("{pe} hosts {tasks} tasks above cap {cap}"));
            }
        }
    }

    if !opts.communication {
        return Ok(());
    }
    let mut extra: BTreeMap<Link, u32> = BTreeMap::new();
    for (i, mc) in cg.message_clusters.iter().enumerate() {
        let route = asg.routes[i].as_ref().ok_or_else(|| format!("message cluster {i} unrouted"))?;
        let a = arch.coord(asg.bind[usize::from(mc.src)].ok_or("unbound sender")?);
        let b = arch.coord(asg.bind[usize::from(mc.dst)].ok_or("unbound receiver")?);
        let hops = walk(arch, route, a, b).ok_or_else(|| format!("message cluster {i} route is not connected"))?;
        if hops > mc.hop {
            return Err(format!("message cluster {i} uses {hops} hops, budget {}", mc.hop));
        }
        for l in route {
            *extra.entry(*l).or_default() += mc.sl;
        }
    }
    for (link, sl) in extra {
        let used = arch.link_index(&link).map(|i| state.link_used(i)).ok_or("link outside the mesh")?;
        if used + sl > arch.sl_max() {
            return Err(format!("{link} needs {} slots, budget {}", used + sl, arch.sl_max()));
        }
    }
    Ok(())
}

/// Routers traversed from `a` to `b`, or `None` if the route is broken.
fn walk(arch: &Architecture, route: &[Link], a: Coord, b: Coord) -> Option<u32> {
    if route.is_empty() {
        return (a == b).then_some(0);
    }
    let mut at = Endpoint::Pe(a);
    let mut routers = 0;
    for l in route {
        if l.from != at {
            return None;
        }
        match (l.from, l.to) {
            (Endpoint::Pe(p), Endpoint::Router(r)) if p == r => {}
            (Endpoint::Router(r), Endpoint::Pe(p)) if p == r => {}
            (Endpoint::Router(p), Endpoint::Router(r)) if p.manhattan(r) == 1 && arch.contains(r) => {}
            _ => return None,
        }
        if let Endpoint::Router(_) = l.to {
            routers += 1;
        }
        at = l.to;
    }
    (at == Endpoint::Pe(b) && a != b).then_some(routers)
}
