//! Shared generators and brute-force oracles for the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use hamap::analysis::Mapping;
use hamap::cgraph::{CgEdge, ConstraintGraph, Load, MessageCluster, TaskCluster};
use hamap::dse::{decode, evaluate, repair_priorities, ArchiveEntry, Genome, SearchSpace};
use hamap::model::{hop_count, Architecture, PeId, ResourceType, ResourceTypeId, SchedulingParams, TaskGraph};
use hamap::rtm::{backtrack, AppId, IsolationMode, RtmError, SolveOutcome, SolverOptions, SystemState};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SL_MAX: u32 = 10;

pub fn random_arch<R: Rng>(rng: &mut R, max_side: u16, max_types: usize) -> Architecture {
    let w = rng.gen_range(1..=max_side);
    let h = rng.gen_range(1..=max_side);
    let ntypes = rng.gen_range(1..=max_types);
    let types: Vec<ResourceType> =
        (0..ntypes).map(|i| ResourceType { name: format!("r{i}"), power: 1.0 + i as f64 }).collect();
    let layout: Vec<ResourceTypeId> =
        (0..usize::from(w * h)).map(|_| ResourceTypeId(rng.gen_range(0..ntypes) as u8)).collect();
    Architecture::new(w, h, types, &layout, 1.0e9, SL_MAX, Default::default()).unwrap()
}

/// A valid constraint graph with the given cluster counts.
pub fn random_cg<R: Rng>(rng: &mut R, ntypes: usize, ntc: usize, nmc: usize) -> ConstraintGraph {
    let task_clusters: Vec<TaskCluster> = (0..ntc)
        .map(|i| {
            let size = rng.gen_range(1..=3u32);
            let mut levels: Vec<u32> = (0..6).collect();
            levels.shuffle(rng);
            TaskCluster {
                id: i as u8,
                members: vec![],
                rtype: ResourceTypeId(rng.gen_range(0..ntypes) as u8),
                load: Load(rng.gen_range(1000..=20000)),
                k_max: size + rng.gen_range(0..=3),
                prios: levels[..size as usize].to_vec(),
            }
        })
        .collect();
    let mut cg = ConstraintGraph { task_clusters, ..Default::default() };
    if ntc >= 2 {
        for id in 0..nmc {
            let src = rng.gen_range(0..ntc) as u8;
            let mut dst = rng.gen_range(0..ntc - 1) as u8;
            if dst >= src {
                dst += 1;
            }
            cg.message_clusters.push(MessageCluster {
                id: id as u8,
                src,
                dst,
                sl: rng.gen_range(1..=SL_MAX),
                hop: rng.gen_range(2..=4),
                members: vec![],
            });
            cg.edges.push(CgEdge::TaskToMessage(src, id as u8));
            cg.edges.push(CgEdge::MessageToTask(id as u8, dst));
        }
    }
    cg.validate(SL_MAX).unwrap();
    cg
}

/// A state with a few committed background applications and some PEs
/// switched off.
pub fn random_state<R: Rng>(rng: &mut R, arch: Architecture) -> SystemState {
    let ntypes = arch.types().len();
    let mut state = SystemState::new(Arc::new(arch));
    for k in 0..rng.gen_range(0..=3u32) {
        let ntc = rng.gen_range(1..=3);
        let nmc = rng.gen_range(0..=2);
        let cg = random_cg(rng, ntypes, ntc, nmc);
        if let SolveOutcome::Found(a) = backtrack(&cg, &state, SolverOptions::new(IsolationMode::Temporal)) {
            state.commit(AppId(k), &cg, &a).unwrap();
        }
    }
    for pe in state.arch().pe_ids().collect::<Vec<_>>() {
        if rng.gen_bool(0.15) {
            state.set_available(pe, false);
        }
    }
    state
}

/// Small oracle instance: mesh up to 3x3, up to 4 task clusters and 3
/// message clusters.
pub fn small_instance<R: Rng>(rng: &mut R) -> (SystemState, ConstraintGraph) {
    let arch = random_arch(rng, 3, 2);
    let ntypes = arch.types().len();
    let state = random_state(rng, arch);
    let ntc = rng.gen_range(1..=4);
    let nmc = if ntc >= 2 { rng.gen_range(0..=3) } else { 0 };
    (state, random_cg(rng, ntypes, ntc, nmc))
}

/// Whether some binding of all task clusters with xy routes satisfies
/// every run-time constraint. Enumerates the full cartesian product of
/// PEs; aggregates are recomputed from scratch for each candidate.
pub fn brute_force(cg: &ConstraintGraph, state: &SystemState, mode: IsolationMode, communication: bool) -> bool {
    let arch = state.arch();
    let npe = arch.pes().len();
    let ntc = cg.task_clusters.len();
    let mut bind = vec![0usize; ntc];
    loop {
        if admissible(cg, state, mode, communication, &bind) {
            return true;
        }
        let mut i = 0;
        loop {
            if i == ntc {
                return false;
            }
            bind[i] += 1;
            if bind[i] < npe {
                break;
            }
            bind[i] = 0;
            i += 1;
        }
    }
}

fn admissible(
    cg: &ConstraintGraph,
    state: &SystemState,
    mode: IsolationMode,
    communication: bool,
    bind: &[usize],
) -> bool {
    let arch = state.arch();
    let mut per_pe: BTreeMap<usize, Vec<&TaskCluster>> = BTreeMap::new();
    for (tc, &pe) in cg.task_clusters.iter().zip(bind) {
        if !state.is_available(PeId(pe)) || arch.pe(PeId(pe)).rtype != tc.rtype {
            return false;
        }
        per_pe.entry(pe).or_default().push(tc);
    }
    for (&pe, own) in &per_pe {
        let residents = state.residents(PeId(pe));
        match mode {
            IsolationMode::Spatial => {
                if !residents.is_empty() || own.len() > 1 {
                    return false;
                }
            }
            IsolationMode::Temporal => {
                let load: u32 = residents.iter().map(|r| r.load).sum::<u32>()
                    + own.iter().map(|tc| u32::from(tc.load.0)).sum::<u32>();
                if load > Load::ONE {
                    return false;
                }
                let tasks: u32 = residents.iter().map(|r| r.tasks).sum::<u32>()
                    + own.iter().map(|tc| tc.prios.len() as u32).sum::<u32>();
                let cap = residents.iter().map(|r| r.k_max).chain(own.iter().map(|tc| tc.k_max)).min().unwrap();
                if tasks > cap {
                    return false;
                }
            }
        }
    }
    if !communication {
        return true;
    }
    let mut used: BTreeMap<usize, u32> = BTreeMap::new();
    for mc in &cg.message_clusters {
        let (a, b) = (PeId(bind[usize::from(mc.src)]), PeId(bind[usize::from(mc.dst)]));
        if hop_count(arch.coord(a), arch.coord(b)) > mc.hop {
            return false;
        }
        if a != b {
            for l in arch.route_link_ids(a, b) {
                *used.entry(l).or_default() += mc.sl;
            }
        }
    }
    used.iter().all(|(&l, &s)| state.link_used(l) + s <= arch.sl_max())
}

/// Every genome of a tiny application, decoded and repaired exactly as
/// the exploration does, with its evaluation.
pub fn all_decodings(g: &TaskGraph, arch: &Architecture, params: &SchedulingParams) -> Vec<ArchiveEntry> {
    let space = SearchSpace::new(g, arch).unwrap();
    let nt = space.candidates.len();
    let mut out = Vec::new();
    let binds = product(&space.candidates.iter().map(|c| c.len() as u32).collect::<Vec<_>>());
    let prios = product(&vec![nt as u32; nt]);
    let sls: Vec<Vec<u32>> = product(&space.slot_ranges.iter().map(|&(lo, hi)| hi - lo + 1).collect::<Vec<_>>())
        .into_iter()
        .map(|v| v.iter().zip(&space.slot_ranges).map(|(&d, &(lo, _))| lo + d).collect())
        .collect();
    for pe in &binds {
        for prio in &prios {
            for sl in &sls {
                let genome = Genome { pe: pe.clone(), prio: prio.clone(), sl: sl.clone() };
                let mapping: Mapping = repair_priorities(g, &decode(&genome, g, arch, &space));
                let (report, objectives) = evaluate(g, &mapping, params, arch);
                out.push(ArchiveEntry { mapping, objectives, report });
            }
        }
    }
    out
}

/// All vectors `v` with `v[i] < radix[i]`.
pub fn product(radix: &[u32]) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new()];
    for &r in radix {
        out = out.into_iter().flat_map(|v| (0..r).map(move |d| [v.clone(), vec![d]].concat())).collect();
    }
    out
}

/// Run `steps` random commits and removals, checking the invariants and
/// the commit-then-remove identity along the way.
pub fn run_sequence(seed: u64, steps: usize) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arch = random_arch(&mut rng, 3, 2);
    let ntypes = arch.types().len();
    let mut state = SystemState::new(Arc::new(arch));
    let mut mapped: Vec<AppId> = Vec::new();
    let mut next = 0u32;
    for _ in 0..steps {
        if !mapped.is_empty() && rng.gen_bool(0.4) {
            let app = mapped.swap_remove(rng.gen_range(0..mapped.len()));
            state.remove(app).map_err(|e| e.to_string())?;
        } else {
            let ntc = rng.gen_range(1..=3);
            let nmc = rng.gen_range(0..=2);
            let cg = random_cg(&mut rng, ntypes, ntc, nmc);
            let mode = if rng.gen_bool(0.5) { IsolationMode::Temporal } else { IsolationMode::Spatial };
            if let SolveOutcome::Found(asg) = backtrack(&cg, &state, SolverOptions::new(mode)) {
                let before = state.clone();
                let app = AppId(next);
                next += 1;
                state.commit(app, &cg, &asg).map_err(|e| e.to_string())?;
                if state.commit(app, &cg, &asg) != Err(RtmError::AlreadyMapped(app)) {
                    return Err("double commit accepted".into());
                }
                if rng.gen_bool(0.3) {
                    state.remove(app).map_err(|e| e.to_string())?;
                    if state != before {
                        return Err(format!("seed {seed}: remove did not restore the state"));
                    }
                } else {
                    mapped.push(app);
                }
            }
        }
        state.check_invariants().map_err(|e| format!("seed {seed}: {e}"))?;
    }
    for app in mapped {
        state.remove(app).map_err(|e| e.to_string())?;
    }
    if state != SystemState::new(state.shared_arch()) {
        return Err(format!("seed {seed}: emptied state differs from a fresh one"));
    }
    Ok(())
}
