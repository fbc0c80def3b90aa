use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::constraints::{check_c1, check_c2, check_c3, check_c4, check_c5, shift_priorities};
use super::{AppId, Assignment, IsolationMode, Resident, SystemState};
use crate::cgraph::{ConstraintGraph, OperatingPoint};
use crate::model::{hop_count, xy_route, PeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolverOptions {
    pub mode: IsolationMode,
    /// When false only the computing constraints (C.3 to C.5) are
    /// checked; routes are still produced but neither hop budgets nor
    /// link slots are enforced.
    pub communication: bool,
    pub timeout: Option<Duration>,
    /// Deterministic alternative to the timeout: give up after this many
    /// search nodes.
    pub max_nodes: Option<u64>,
}

impl SolverOptions {
    pub fn new(mode: IsolationMode) -> Self {
        Self { mode, communication: true, timeout: None, max_nodes: None }
    }

    pub fn with_timeout(mut self, timeout: Option<Duration>) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn with_node_limit(mut self, max_nodes: Option<u64>) -> Self {
        self.max_nodes = max_nodes;
        self
    }

    pub fn availability_only(mut self) -> Self {
        self.communication = false;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveOutcome {
    Found(Assignment),
    /// The whole search space was explored without a solution.
    Exhausted,
    TimedOut,
    NodeLimit,
}

impl SolveOutcome {
    pub fn assignment(&self) -> Option<&Assignment> {
        match self {
            SolveOutcome::Found(a) => Some(a),
            _ => None,
        }
    }

    pub fn kind(&self) -> AttemptOutcome {
        match self {
            SolveOutcome::Found(_) => AttemptOutcome::Found,
            SolveOutcome::Exhausted => AttemptOutcome::Exhausted,
            SolveOutcome::TimedOut => AttemptOutcome::TimedOut,
            SolveOutcome::NodeLimit => AttemptOutcome::NodeLimit,
        }
    }
}

enum Abort {
    Time,
    Nodes,
}

const SCRATCH: AppId = AppId(u32::MAX);

struct Search<'a> {
    cg: &'a ConstraintGraph,
    opts: SolverOptions,
    state: SystemState,
    order: Vec<u8>,
    asg: Assignment,
    deadline: Option<Instant>,
    nodes: u64,
}

impl Search<'_> {
    fn run(&mut self, depth: usize) -> Result<bool, Abort> {
        if depth == self.order.len() {
            return Ok(true);
        }
        if self.deadline.is_some_and(|d| Instant::now() >= d) {
            return Err(Abort::Time);
        }
        self.nodes += 1;
        if self.opts.max_nodes.is_some_and(|n| self.nodes > n) {
            return Err(Abort::Nodes);
        }
        let cg = self.cg;
        let tc = &cg.task_clusters[usize::from(self.order[depth])];
        for pe in self.domain(tc.id) {
            if self.opts.mode == IsolationMode::Temporal
                && !(check_c4(&self.state, pe, tc) && check_c5(&self.state, pe, tc))
            {
                continue;
            }
            let prios = shift_priorities(&self.state, pe, tc);
            self.state.push_resident(
                pe,
                Resident {
                    app: SCRATCH,
                    cluster: tc.id,
                    load: tc.load.units(),
                    tasks: tc.size() as u32,
                    k_max: tc.k_max,
                    prios: prios.clone(),
                },
            );
            self.asg.bind[usize::from(tc.id)] = Some(pe);
            self.asg.prios[usize::from(tc.id)] = prios;

            let mut routed = Vec::new();
            let ok = self.route_closed(tc.id, &mut routed);
            if ok && self.run(depth + 1)? {
                return Ok(true);
            }
            self.unroute(&routed);
            self.asg.bind[usize::from(tc.id)] = None;
            self.asg.prios[usize::from(tc.id)].clear();
            self.state.pop_resident(pe);
        }
        Ok(false)
    }

    /// Candidate PEs for a cluster: C.3, hop budgets towards bound
    /// partners, and emptiness under spatial isolation. Least loaded first.
    fn domain(&self, id: u8) -> Vec<PeId> {
        let tc = &self.cg.task_clusters[usize::from(id)];
        let arch = self.state.arch();
        let mut d: Vec<PeId> = arch
            .pe_ids()
            .filter(|&pe| check_c3(&self.state, pe, tc))
            .filter(|&pe| self.opts.mode == IsolationMode::Temporal || self.state.residents(pe).is_empty())
            .filter(|&pe| {
                !self.opts.communication
                    || self.cg.incident(id).all(|mc| {
                        let partner = if mc.src == id { mc.dst } else { mc.src };
                        match self.asg.pe(partner) {
                            Some(p) => hop_count(arch.coord(pe), arch.coord(p)) <= mc.hop,
                            None => true,
                        }
                    })
            })
            .collect();
        d.sort_by_key(|&pe| (self.state.load_units(pe), pe));
        d
    }

    /// Route every message cluster of `id` whose other end is bound.
    fn route_closed(&mut self, id: u8, routed: &mut Vec<usize>) -> bool {
        let cg = self.cg;
        for mc in cg.incident(id) {
            let ci = usize::from(mc.id);
            if self.asg.routes[ci].is_some() {
                continue;
            }
            let (Some(a), Some(b)) = (self.asg.pe(mc.src), self.asg.pe(mc.dst)) else {
                continue;
            };
            let arch = self.state.arch();
            let route = xy_route(arch.coord(a), arch.coord(b));
            if self.opts.communication && !(check_c1(arch, &route, mc, &self.asg) && check_c2(&self.state, &route, mc))
            {
                return false;
            }
            if self.opts.communication {
                for l in &route {
                    let i = self.state.arch().link_index(l).expect("xy route inside mesh");
                    self.state.add_slots(i, mc.sl);
                }
            }
            self.asg.routes[ci] = Some(route);
            routed.push(ci);
        }
        true
    }

    fn unroute(&mut self, routed: &[usize]) {
        for &ci in routed {
            let route = self.asg.routes[ci].take().expect("routed");
            if self.opts.communication {
                let sl = self.cg.message_clusters[ci].sl;
                for l in &route {
                    let i = self.state.arch().link_index(l).expect("xy route inside mesh");
                    self.state.sub_slots(i, sl);
                }
            }
        }
    }
}

/// Search a placement of `cg` on top of `state`. The state itself is not
/// modified; apply a found assignment with [`SystemState::commit`].
pub fn backtrack(cg: &ConstraintGraph, state: &SystemState, opts: SolverOptions) -> SolveOutcome {
    let deadline = opts.timeout.map(|t| Instant::now() + t);
    let mut order: Vec<u8> = cg.task_clusters.iter().map(|tc| tc.id).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (&cg.task_clusters[usize::from(a)], &cg.task_clusters[usize::from(b)]);
        y.load.cmp(&x.load).then(y.size().cmp(&x.size())).then(a.cmp(&b))
    });
    let mut search = Search {
        cg,
        opts,
        state: state.clone(),
        order,
        asg: Assignment::empty(cg.task_clusters.len(), cg.message_clusters.len()),
        deadline,
        nodes: 0,
    };
    match search.run(0) {
        Ok(true) => SolveOutcome::Found(search.asg),
        Ok(false) => SolveOutcome::Exhausted,
        Err(Abort::Time) => SolveOutcome::TimedOut,
        Err(Abort::Nodes) => SolveOutcome::NodeLimit,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttemptOutcome {
    Found,
    Exhausted,
    TimedOut,
    NodeLimit,
}

/// One solver call made while admitting an application.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub app: AppId,
    /// Index of the operating point in the caller's list.
    pub op: usize,
    pub outcome: AttemptOutcome,
    pub micros: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmitOutcome {
    /// Index of the chosen operating point and its placement.
    pub chosen: Option<(usize, Assignment)>,
    pub attempts: Vec<AttemptRecord>,
}

/// First fit over the operating points in ascending energy order.
pub fn admit(app: AppId, ops: &[OperatingPoint], state: &SystemState, opts: SolverOptions) -> AdmitOutcome {
    let mut order: Vec<usize> = (0..ops.len()).collect();
    order.sort_by(|&a, &b| ops[a].objectives.energy.total_cmp(&ops[b].objectives.energy));
    let mut attempts = Vec::new();
    for i in order {
        let start = Instant::now();
        let outcome = backtrack(&ops[i].cg, state, opts);
        let record = AttemptRecord {
            app,
            op: i,
            outcome: outcome.kind(),
            micros: start.elapsed().as_micros().try_into().unwrap_or(u64::MAX),
        };
        log::info!("admit app={} op={} outcome={:?} wall_us={}", record.app, record.op, record.outcome, record.micros);
        attempts.push(record);
        if let SolveOutcome::Found(asg) = outcome {
            return AdmitOutcome { chosen: Some((i, asg)), attempts };
        }
    }
    AdmitOutcome { chosen: None, attempts }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::cgraph::{CgEdge, Load, MessageCluster, TaskCluster};
    use crate::dse::ObjectiveVector;
    use crate::model::{Architecture, Coord, ResourceType, ResourceTypeId};
    use crate::rtm::verify;

    fn tc(id: u8, rtype: u8, load: u16, size: u32, k_max: u32) -> TaskCluster {
        TaskCluster {
            id,
            members: vec![],
            rtype: ResourceTypeId(rtype),
            load: Load(load),
            k_max,
            prios: (0..size).collect(),
        }
    }

    fn link(cg: &mut ConstraintGraph, src: u8, dst: u8, sl: u32, hop: u32) {
        let id = cg.message_clusters.len() as u8;
        cg.message_clusters.push(MessageCluster { id, src, dst, sl, hop, members: vec![] });
        cg.edges.push(CgEdge::TaskToMessage(src, id));
        cg.edges.push(CgEdge::MessageToTask(id, dst));
    }

    fn homogeneous(w: u16, h: u16) -> SystemState {
        SystemState::new(Arc::new(Architecture::homogeneous(w, h, 1.0, 10).unwrap()))
    }

    fn temporal() -> SolverOptions {
        SolverOptions::new(IsolationMode::Temporal)
    }

    #[test]
    fn empty_graph_is_complete() {
        let s = homogeneous(2, 2);
        let out = backtrack(&ConstraintGraph::default(), &s, temporal());
        assert_eq!(out, SolveOutcome::Found(Assignment::default()));
    }

    #[test]
    fn single_cluster_single_match() {
        let types =
            vec![ResourceType { name: "white".into(), power: 1.0 }, ResourceType { name: "gray".into(), power: 1.0 }];
        let layout = [ResourceTypeId(0), ResourceTypeId(0), ResourceTypeId(0), ResourceTypeId(1)];
        let arch = Architecture::new(2, 2, types, &layout, 1e9, 10, Default::default()).unwrap();
        let s = SystemState::new(Arc::new(arch));
        let cg = ConstraintGraph { task_clusters: vec![tc(0, 1, 100, 1, 5)], ..Default::default() };
        let asg = backtrack(&cg, &s, temporal()).assignment().cloned().unwrap();
        assert_eq!(asg.bind, vec![Some(PeId(3))]);
    }

    // Cluster 0 is placed first (highest load) on the least loaded PE.
    // Only one PE keeps its heavy partner within reach over an unsaturated
    // link, so the first choice has to be revised.
    #[test]
    fn revises_greedy_choice() {
        let mut s = homogeneous(2, 2);
        let arch = s.shared_arch();
        let pe = |x, y| arch.pe_at(Coord::new(x, y)).unwrap();
        // load (1,1) so (0,0) ranks first; saturate the link (0,0)->(1,0)
        let mut filler = ConstraintGraph {
            task_clusters: vec![tc(0, 0, 8000, 1, 5), tc(1, 0, 8000, 1, 5), tc(2, 0, 100, 1, 5)],
            ..Default::default()
        };
        link(&mut filler, 0, 1, 10, 2);
        let route = xy_route(arch.coord(pe(0, 0)), arch.coord(pe(1, 0)));
        let asg = Assignment {
            bind: vec![Some(pe(0, 0)), Some(pe(1, 0)), Some(pe(1, 1))],
            routes: vec![Some(route)],
            prios: vec![vec![0], vec![0], vec![0]],
        };
        s.commit(AppId(0), &filler, &asg).unwrap();

        let mut cg =
            ConstraintGraph { task_clusters: vec![tc(0, 0, 20000, 1, 5), tc(1, 0, 20000, 1, 5)], ..Default::default() };
        link(&mut cg, 0, 1, 5, 2);
        let out = backtrack(&cg, &s, temporal());
        let found = out.assignment().expect("solution exists");
        verify(&cg, &s, found, &temporal()).unwrap();
        // the two heavy clusters cannot share a PE (20000+20000 > 32768)
        assert_ne!(found.bind[0], found.bind[1]);
    }

    #[test]
    fn spatial_needs_empty_pes() {
        let s = homogeneous(1, 1);
        let cg =
            ConstraintGraph { task_clusters: vec![tc(0, 0, 100, 1, 4), tc(1, 0, 100, 1, 4)], ..Default::default() };
        assert!(backtrack(&cg, &s, temporal()).assignment().is_some());
        assert_eq!(backtrack(&cg, &s, SolverOptions::new(IsolationMode::Spatial)), SolveOutcome::Exhausted);
    }

    #[test]
    fn timeout_reported() {
        let s = homogeneous(3, 3);
        // ten clusters of 60 % on nine PEs: infeasible, factorial search
        let cg =
            ConstraintGraph { task_clusters: (0..10).map(|i| tc(i, 0, 19661, 1, 5)).collect(), ..Default::default() };
        let opts = temporal().with_timeout(Some(Duration::from_millis(5)));
        let start = Instant::now();
        assert_eq!(backtrack(&cg, &s, opts), SolveOutcome::TimedOut);
        assert!(start.elapsed() < Duration::from_millis(50));
    }

    fn op(energy: f64, cg: ConstraintGraph) -> OperatingPoint {
        OperatingPoint {
            cg,
            objectives: ObjectiveVector { energy, msg_count: 0, avg_hop: 0.0, min_hop: 0, alloc_per_type: vec![1] },
        }
    }

    #[test]
    fn first_fit_by_energy() {
        let s = homogeneous(1, 1);
        let fits = ConstraintGraph { task_clusters: vec![tc(0, 0, 100, 1, 4)], ..Default::default() };
        let too_big =
            ConstraintGraph { task_clusters: vec![tc(0, 0, 100, 9, 9), tc(1, 0, 100, 1, 9)], ..Default::default() };
        let opts = temporal();

        let out = admit(AppId(1), &[op(5.0, fits.clone()), op(1.0, fits.clone())], &s, opts);
        assert_eq!(out.chosen.map(|c| c.0), Some(1));

        let out = admit(AppId(1), &[op(9.0, fits.clone()), op(1.0, too_big.clone())], &s, opts);
        assert_eq!(out.chosen.map(|c| c.0), Some(0));
        assert_eq!(out.attempts.len(), 2);
        assert_eq!(out.attempts[0].outcome, AttemptOutcome::Exhausted);

        let out = admit(AppId(1), &[op(1.0, too_big)], &s, opts);
        assert!(out.chosen.is_none());
    }
}
