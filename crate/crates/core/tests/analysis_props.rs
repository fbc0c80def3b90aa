use hamap::analysis::{energy, is_feasible, pe_utilization, worst_case_latency, Mapping};
use hamap::bench::{gen_benchmark, BenchmarkSpec};
use hamap::cgraph::{extract, serialize_op, size_op, Load, OperatingPoint};
use hamap::dse::{decode, evaluate, repair_priorities, Genome, SearchSpace};
use hamap::model::{
    architecture_to_toml, load_architecture, load_taskgraph, taskgraph_to_toml, Architecture, Coord, PeId,
    SchedulingParams, TaskGraph,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn params() -> SchedulingParams {
    SchedulingParams::default()
}

fn mesh() -> Architecture {
    Architecture::homogeneous(4, 4, 1.0, 10).unwrap()
}

fn app(seed: u64, tasks: [usize; 2]) -> TaskGraph {
    let spec = BenchmarkSpec { apps: 1, tasks, types: vec!["pe".into()], seed, ..Default::default() };
    gen_benchmark(&spec, &params()).unwrap().remove(0)
}

/// A random repaired mapping confined to the lower-left `side` x `side`
/// corner of the mesh.
fn corner_mapping(g: &TaskGraph, arch: &Architecture, side: u16, seed: u64) -> Mapping {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = SearchSpace::new(g, arch).unwrap();
    let corner: Vec<u32> =
        arch.pe_ids().filter(|&p| arch.coord(p).x < side && arch.coord(p).y < side).map(|p| p.index() as u32).collect();
    let genome = Genome {
        pe: (0..g.tasks().len()).map(|_| corner[rng.gen_range(0..corner.len())]).collect(),
        prio: (0..g.tasks().len()).map(|_| rng.gen_range(0..8)).collect(),
        sl: space.slot_ranges.iter().map(|&(lo, hi)| rng.gen_range(lo..=hi)).collect(),
    };
    repair_priorities(g, &decode(&genome, g, arch, &space))
}

fn translate(g: &TaskGraph, arch: &Architecture, m: &Mapping, dx: u16, dy: u16) -> Mapping {
    let bind = m
        .bind
        .iter()
        .map(|&p| {
            let c = arch.coord(p);
            arch.pe_at(Coord::new(c.x + dx, c.y + dy)).unwrap()
        })
        .collect();
    Mapping::new(g, arch, bind, m.prio.clone(), m.sl.clone())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn relocation_preserves_analysis_and_constraint_graph(seed in any::<u64>(), dx in 0u16..=2, dy in 0u16..=2) {
        let arch = mesh();
        let g = app(seed, [2, 8]);
        let m = corner_mapping(&g, &arch, 2, seed);
        let moved = translate(&g, &arch, &m, dx, dy);
        let e0 = energy(&g, &m, &arch).unwrap();
        let e1 = energy(&g, &moved, &arch).unwrap();
        prop_assert_eq!(e0, e1);
        prop_assert_eq!(
            worst_case_latency(&g, &m, &params(), &arch).unwrap(),
            worst_case_latency(&g, &moved, &params(), &arch).unwrap()
        );
        prop_assert_eq!(is_feasible(&g, &m, &params(), &arch).is_feasible(), is_feasible(&g, &moved, &params(), &arch).is_feasible());
        prop_assert_eq!(
            extract(&g, &m, &params(), &arch).unwrap(),
            extract(&g, &moved, &params(), &arch).unwrap()
        );
    }

    #[test]
    fn latency_monotone_in_slots_and_k_extra(seed in any::<u64>(), bump in 0usize..16, extra in 0u32..4) {
        let arch = mesh();
        let g = app(seed, [2, 8]);
        let m = corner_mapping(&g, &arch, 3, seed);
        let base = worst_case_latency(&g, &m, &params(), &arch).unwrap();
        if !g.messages().is_empty() {
            let mut more = m.clone();
            let i = bump % g.messages().len();
            more.sl[i] = (more.sl[i] + 1).min(arch.sl_max());
            prop_assert!(worst_case_latency(&g, &more, &params(), &arch).unwrap() <= base);
        }
        let p = SchedulingParams { k_extra: params().k_extra + extra, ..params() };
        prop_assert!(worst_case_latency(&g, &m, &p, &arch).unwrap() >= base);
    }

    #[test]
    fn removing_a_task_never_raises_utilization(seed in any::<u64>()) {
        let arch = mesh();
        let g = app(seed, [2, 8]);
        let m = corner_mapping(&g, &arch, 2, seed);
        let pe = m.bind[0];
        let full = pe_utilization(&g, &m, &params(), &arch, pe).unwrap();
        let mut less = m.clone();
        less.bind[0] = arch.pe_at(Coord::new(3, 3)).unwrap();
        prop_assert!(pe_utilization(&g, &less, &params(), &arch, pe).unwrap() <= full);
    }

    #[test]
    fn cluster_loads_cover_pe_utilization(seed in any::<u64>()) {
        let arch = mesh();
        let g = app(seed, [2, 10]);
        let m = corner_mapping(&g, &arch, 2, seed);
        let cg = extract(&g, &m, &params(), &arch).unwrap();
        let mut pes: Vec<PeId> = m.bind.clone();
        pes.sort_unstable();
        pes.dedup();
        let exact: f64 = pes.iter().map(|&p| pe_utilization(&g, &m, &params(), &arch, p).unwrap()).sum();
        let quantized: f64 = cg.task_clusters.iter().map(|tc| tc.load.as_f64()).sum();
        let slack = cg.task_clusters.len() as f64 / f64::from(Load::ONE);
        prop_assert!(quantized >= exact - 1e-12 && quantized <= exact + slack + 1e-12);
    }

    #[test]
    fn serialized_length_matches_size_formula(seed in any::<u64>()) {
        let arch = mesh();
        let g = app(seed, [2, 12]);
        let m = corner_mapping(&g, &arch, 3, seed);
        let cg = extract(&g, &m, &params(), &arch).unwrap();
        let (_, objectives) = evaluate(&g, &m, &params(), &arch);
        let n_obj = objectives.dim();
        let op = OperatingPoint { cg, objectives };
        let bytes = serialize_op(&op).unwrap();
        prop_assert_eq!(
            bytes.len(),
            size_op(op.cg.task_clusters.len(), op.cg.message_clusters.len(), op.cg.edges.len(), n_obj)
        );
    }

    #[test]
    fn documents_round_trip(seed in any::<u64>()) {
        let g = app(seed, [1, 18]);
        prop_assert_eq!(load_taskgraph(&taskgraph_to_toml(&g)).unwrap(), g);
    }
}

#[test]
fn feasibility_ignores_run_time_occupancy() {
    let arch = mesh();
    let g = app(3, [4, 6]);
    let m = corner_mapping(&g, &arch, 2, 3);
    let mut busy = arch.clone();
    for pe in arch.pe_ids() {
        busy.set_available(pe, false);
    }
    assert_eq!(is_feasible(&g, &m, &params(), &busy), is_feasible(&g, &m, &params(), &arch));
}

#[test]
fn shipped_architectures_round_trip() {
    for path in ["arch_6x6.toml", "arch_2x2.toml"] {
        let text = std::fs::read_to_string(format!("{}/../../data/{path}", env!("CARGO_MANIFEST_DIR"))).unwrap();
        let arch = load_architecture(&text).unwrap();
        assert_eq!(load_architecture(&architecture_to_toml(&arch)).unwrap(), arch);
    }
}
