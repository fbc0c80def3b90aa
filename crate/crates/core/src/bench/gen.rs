use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::model::{MessageSpec, SchedulingParams, Task, TaskGraph};

/// Parameters of the synthetic task-graph generator. Defaults follow the
/// scale of the automotive/telecom/consumer/networking suites: 7 to 18
/// tasks per application.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkSpec {
    pub apps: usize,
    /// Inclusive task-count range.
    pub tasks: [usize; 2],
    /// Base WCET range in µs before per-type scaling.
    pub wcet_us: [f64; 2],
    /// Per-type speed factor range, drawn once per application and type.
    pub type_factor: [f64; 2],
    /// Probability that a task can run on a given type; every task keeps
    /// at least one type.
    pub type_coverage: f64,
    /// Inclusive message-size range in bits.
    pub size_bits: [u64; 2],
    /// Deadline as a multiple of the critical path with every task alone
    /// on its PE and all messages local.
    pub deadline_slack: [f64; 2],
    /// Period as a multiple of the deadline.
    pub period_factor: [f64; 2],
    /// Resource-type names; empty means "take them from the architecture".
    pub types: Vec<String>,
    pub seed: u64,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        Self {
            apps: 8,
            tasks: [7, 18],
            wcet_us: [50.0, 400.0],
            type_factor: [0.6, 1.6],
            type_coverage: 0.8,
            size_bits: [64, 1024],
            deadline_slack: [2.5, 4.0],
            period_factor: [1.0, 1.5],
            types: Vec::new(),
            seed: 1,
        }
    }
}

impl BenchmarkSpec {
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |s: &str| Err(BenchError::Spec(s.to_string()));
        let ordered = |r: [f64; 2]| r[0].is_finite() && r[1].is_finite() && r[0] > 0.0 && r[0] <= r[1];
        if self.tasks[0] == 0 || self.tasks[0] > self.tasks[1] {
            return bad("tasks must be a non-empty range of positive counts");
        }
        if !ordered(self.wcet_us) || !ordered(self.type_factor) {
            return bad("wcet_us and type_factor must be positive ranges");
        }
        if !ordered(self.deadline_slack) || !ordered(self.period_factor) || self.period_factor[0] < 1.0 {
            return bad("deadline_slack must be a positive range and period_factor start at 1");
        }
        if self.size_bits[0] == 0 || self.size_bits[0] > self.size_bits[1] {
            return bad("size_bits must be a non-empty range of positive sizes");
        }
        if !(0.0..=1.0).contains(&self.type_coverage) {
            return bad("type_coverage must be in [0, 1]");
        }
        if self.types.is_empty() {
            return bad("no resource types to generate WCETs for");
        }
        Ok(())
    }
}

/// Generate `spec.apps` random acyclic task graphs. Every task after the
/// first consumes one or two messages from earlier tasks.
pub fn gen_benchmark(spec: &BenchmarkSpec, params: &SchedulingParams) -> Result<Vec<TaskGraph>, BenchError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    (0..spec.apps).map(|k| gen_app(spec, params, k, &mut rng)).collect()
}

fn gen_app(
    spec: &BenchmarkSpec,
    params: &SchedulingParams,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<TaskGraph, BenchError> {
    let n = rng.gen_range(spec.tasks[0]..=spec.tasks[1]);
    let factors: Vec<f64> =
        spec.types.iter().map(|_| rng.gen_range(spec.type_factor[0]..=spec.type_factor[1])).collect();

    let mut tasks = Vec::with_capacity(n);
    for i in 0..n {
        let base = rng.gen_range(spec.wcet_us[0]..=spec.wcet_us[1]);
        let mut wcet = std::collections::BTreeMap::new();
        for (r, name) in spec.types.iter().enumerate() {
            if rng.gen_bool(spec.type_coverage) {
                wcet.insert(name.clone(), (base * factors[r]).round().max(1.0));
            }
        }
        if wcet.is_empty() {
            let r = rng.gen_range(0..spec.types.len());
            wcet.insert(spec.types[r].clone(), (base * factors[r]).round().max(1.0));
        }
        tasks.push(Task { id: format!("t{i}"), wcet });
    }

    let mut messages = Vec::new();
    let mut edges = Vec::new();
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, pred) in preds.iter_mut().enumerate().skip(1) {
        let count = if i >= 2 && rng.gen_bool(0.3) { 2 } else { 1 };
        for p in sample(rng, i, count).into_iter() {
            let id = format!("m{}", messages.len());
            let size = rng.gen_range(spec.size_bits[0]..=spec.size_bits[1]);
            edges.push((format!("t{p}"), id.clone()));
            edges.push((id.clone(), format!("t{i}")));
            messages.push(MessageSpec { id, size });
            pred.push(p);
        }
    }

    // critical path with every task at its fastest and K = 1 + k_extra
    let mut finish = vec![0.0f64; n];
    for i in 0..n {
        let fastest = tasks[i].wcet.values().copied().fold(f64::INFINITY, f64::min);
        let term = params.slots(fastest) as f64 * f64::from(1 + params.k_extra) * (params.snt + params.sios);
        let ready = preds[i].iter().map(|&p| finish[p]).fold(0.0, f64::max);
        finish[i] = ready + term;
    }
    let critical = finish.iter().copied().fold(0.0, f64::max);
    let deadline = (critical * rng.gen_range(spec.deadline_slack[0]..=spec.deadline_slack[1])).ceil();
    let period = (deadline * rng.gen_range(spec.period_factor[0]..=spec.period_factor[1])).ceil();

    Ok(TaskGraph::new(format!("app{k}"), period, deadline, tasks, messages, &edges)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{load_taskgraph, taskgraph_to_toml};

    fn spec() -> BenchmarkSpec {
        BenchmarkSpec { apps: 6, types: vec!["a".into(), "b".into()], seed: 11, ..Default::default() }
    }

    #[test]
    fn deterministic_per_seed() {
        let p = SchedulingParams::default();
        assert_eq!(gen_benchmark(&spec(), &p).unwrap(), gen_benchmark(&spec(), &p).unwrap());
        let other = BenchmarkSpec { seed: 12, ..spec() };
        assert_ne!(gen_benchmark(&spec(), &p).unwrap(), gen_benchmark(&other, &p).unwrap());
    }

    #[test]
    fn fixed_task_count() {
        let s = BenchmarkSpec { tasks: [7, 7], ..spec() };
        for g in gen_benchmark(&s, &SchedulingParams::default()).unwrap() {
            assert_eq!(g.tasks().len(), 7);
            assert!(g.messages().len() >= 6);
            assert!(g.deadline() <= g.period());
        }
    }

    #[test]
    fn graphs_survive_the_file_format() {
        for g in gen_benchmark(&spec(), &SchedulingParams::default()).unwrap() {
            let back = load_taskgraph(&taskgraph_to_toml(&g)).unwrap();
            assert_eq!(back, g);
        }
    }

    #[test]
    fn rejects_bad_spec() {
        let p = SchedulingParams::default();
        assert!(gen_benchmark(&BenchmarkSpec { tasks: [5, 2], ..spec() }, &p).is_err());
        assert!(gen_benchmark(&BenchmarkSpec { types: vec![], ..spec() }, &p).is_err());
    }
}
