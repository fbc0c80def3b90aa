use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::cgraph::OperatingPoint;
use crate::model::{Architecture, PeId};
use crate::rtm::{
    admit, backtrack, verify, AdmitOutcome, AppId, AttemptOutcome, IsolationMode, SolveOutcome, SolverOptions,
    SystemState,
};

/// Result of admitting one application.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Admission {
    Mapped,
    Rejected,
    /// At least one operating point hit the search budget, so the
    /// rejection is not conclusive.
    Budget,
}

impl Admission {
    fn of(out: &AdmitOutcome) -> Self {
        if out.chosen.is_some() {
            Admission::Mapped
        } else if out.attempts.iter().any(|a| matches!(a.outcome, AttemptOutcome::NodeLimit | AttemptOutcome::TimedOut))
        {
            Admission::Budget
        } else {
            Admission::Rejected
        }
    }
}

fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Admit and re-verify the chosen placement without applying it.
fn admit_verified(
    app: AppId,
    ops: &[OperatingPoint],
    state: &SystemState,
    opts: SolverOptions,
) -> Result<Admission, BenchError> {
    let out = admit(app, ops, state, opts);
    if let Some((i, asg)) = &out.chosen {
        verify(&ops[*i].cg, state, asg, &opts).map_err(|e| BenchError::Unsound(format!("{app}: {e}")))?;
    }
    Ok(Admission::of(&out))
}

/// Admit, re-verify and commit. Returns the chosen point's energy.
fn admit_and_commit(
    app: AppId,
    ops: &[OperatingPoint],
    state: &mut SystemState,
    opts: SolverOptions,
) -> Result<(Admission, Option<f64>), BenchError> {
    let out = admit(app, ops, state, opts);
    let verdict = Admission::of(&out);
    let Some((i, asg)) = out.chosen else {
        return Ok((verdict, None));
    };
    verify(&ops[i].cg, state, &asg, &opts).map_err(|e| BenchError::Unsound(format!("{app}: {e}")))?;
    state.commit(app, &ops[i].cg, &asg)?;
    Ok((verdict, Some(ops[i].objectives.energy)))
}

/// Admit randomly drawn applications until the share of occupied PEs
/// reaches `target` or admissions keep failing. Returns the next free id.
fn preoccupy(
    pool: &[Vec<OperatingPoint>],
    state: &mut SystemState,
    target: f64,
    opts: SolverOptions,
    rng: &mut ChaCha8Rng,
) -> Result<u32, BenchError> {
    let n = state.arch().pes().len() as f64;
    let mut next = 0;
    let mut failures = 0;
    while (state.occupied_pes() as f64) / n < target && failures < 8 {
        let k = rng.gen_range(0..pool.len());
        let (verdict, _) = admit_and_commit(AppId(next), &pool[k], state, opts)?;
        next += 1;
        if verdict == Admission::Mapped {
            failures = 0;
        } else {
            failures += 1;
        }
    }
    Ok(next)
}

/// Utilization class of an occupancy: 0 for an empty system, otherwise
/// the upper end of the 10 % band the share of occupied PEs falls into.
pub fn utilization_class(occupied: usize, total: usize) -> u32 {
    if occupied == 0 {
        return 0;
    }
    let pct = occupied as f64 * 100.0 / total as f64;
    ((pct / 10.0).ceil() as u32 * 10).clamp(10, 100)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilizationKnobs {
    pub trials: usize,
    /// Upper end of the random pre-occupation target, as a PE share.
    pub max_occupancy: f64,
    pub max_nodes: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilizationRecord {
    pub trial: usize,
    pub class: u32,
    pub occupied_pes: usize,
    pub app: usize,
    /// Only C.3 to C.5 checked.
    pub availability: Admission,
    /// All constraints checked.
    pub full: Admission,
    pub energy: Option<f64>,
}

/// Pre-occupy the system to a random share of PEs, then try to admit one
/// more application with and without the communication constraints.
pub fn exp_utilization(
    pool: &[Vec<OperatingPoint>],
    arch: Arc<Architecture>,
    knobs: &UtilizationKnobs,
    seed: u64,
) -> Result<Vec<UtilizationRecord>, BenchError> {
    if pool.is_empty() {
        return Err(BenchError::Spec("no applications to admit".into()));
    }
    let full = SolverOptions::new(IsolationMode::Temporal).with_node_limit(knobs.max_nodes);
    (0..knobs.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, trial as u64);
            let mut state = SystemState::new(Arc::clone(&arch));
            let target = rng.gen_range(0.0..=knobs.max_occupancy);
            let id = preoccupy(pool, &mut state, target, full, &mut rng)?;
            let app = rng.gen_range(0..pool.len());
            let availability = admit_verified(AppId(id), &pool[app], &state, full.availability_only())?;
            let (verdict, energy) = admit_and_commit(AppId(id), &pool[app], &mut state.clone(), full)?;
            Ok(UtilizationRecord {
                trial,
                class: utilization_class(state.occupied_pes(), state.arch().pes().len()),
                occupied_pes: state.occupied_pes(),
                app,
                availability,
                full: verdict,
                energy,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilizationRow {
    pub class: u32,
    /// Trials where neither measure hit the search budget.
    pub trials: usize,
    pub availability_success: f64,
    pub full_success: f64,
    pub gap: f64,
}

pub fn summarize_utilization(records: &[UtilizationRecord]) -> Vec<UtilizationRow> {
    let mut bins: BTreeMap<u32, (usize, usize, usize)> = BTreeMap::new();
    for r in records {
        if r.availability == Admission::Budget || r.full == Admission::Budget {
            continue;
        }
        let b = bins.entry(r.class).or_default();
        b.0 += 1;
        b.1 += usize::from(r.availability == Admission::Mapped);
        b.2 += usize::from(r.full == Admission::Mapped);
    }
    bins.into_iter()
        .map(|(class, (n, a, f))| {
            let (a, f) = (a as f64 / n as f64, f as f64 / n as f64);
            UtilizationRow { class, trials: n, availability_success: a, full_success: f, gap: a - f }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationKnobs {
    pub sequences: usize,
    /// PE availability levels in percent, e.g. 100 down to 40.
    pub levels: Vec<u32>,
    pub max_nodes: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationRecord {
    pub mix: usize,
    pub sequence: usize,
    pub availability: u32,
    pub mode: String,
    pub apps: usize,
    pub mapped: usize,
    pub budget_hits: usize,
    /// Sum of the chosen operating points' energies over mapped apps.
    pub energy: f64,
}

/// Make PEs unavailable along random sequences and admit a mix of
/// applications one after another under both isolation modes.
pub fn exp_isolation(
    mix_id: usize,
    mix: &[Vec<OperatingPoint>],
    arch: Arc<Architecture>,
    knobs: &IsolationKnobs,
    seed: u64,
) -> Result<Vec<IsolationRecord>, BenchError> {
    let pes: Vec<PeId> = arch.pe_ids().collect();
    let nested: Vec<Vec<IsolationRecord>> = (0..knobs.sequences)
        .into_par_iter()
        .map(|sequence| {
            let mut order = pes.clone();
            order.shuffle(&mut trial_rng(seed, sequence as u64));
            let mut out = Vec::new();
            for &level in &knobs.levels {
                let available = (pes.len() as f64 * f64::from(level) / 100.0).round() as usize;
                for mode in [IsolationMode::Temporal, IsolationMode::Spatial] {
                    let mut state = SystemState::new(Arc::clone(&arch));
                    for &pe in &order[..pes.len() - available.min(pes.len())] {
                        state.set_available(pe, false);
                    }
                    let opts = SolverOptions::new(mode).with_node_limit(knobs.max_nodes);
                    let (mut mapped, mut budget_hits, mut energy) = (0, 0, 0.0);
                    for (k, ops) in mix.iter().enumerate() {
                        let (verdict, e) = admit_and_commit(AppId(k as u32), ops, &mut state, opts)?;
                        mapped += usize::from(verdict == Admission::Mapped);
                        budget_hits += usize::from(verdict == Admission::Budget);
                        energy += e.unwrap_or(0.0);
                    }
                    out.push(IsolationRecord {
                        mix: mix_id,
                        sequence,
                        availability: level,
                        mode: mode.to_string(),
                        apps: mix.len(),
                        mapped,
                        budget_hits,
                        energy,
                    });
                }
            }
            Ok(out)
        })
        .collect::<Result<_, BenchError>>()?;
    Ok(nested.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationRow {
    pub mix: usize,
    pub availability: u32,
    pub mode: String,
    pub sequences: usize,
    pub success_rate: f64,
    /// Mean energy over sequences where every application was mapped.
    pub mean_energy_all_mapped: Option<f64>,
}

/// One row per (mix, availability, mode), highest availability first.
pub fn summarize_isolation(records: &[IsolationRecord]) -> Vec<IsolationRow> {
    let mut bins: BTreeMap<(usize, std::cmp::Reverse<u32>, String), Vec<&IsolationRecord>> = BTreeMap::new();
    for r in records {
        bins.entry((r.mix, std::cmp::Reverse(r.availability), r.mode.clone())).or_default().push(r);
    }
    bins.into_iter()
        .map(|((mix, level, mode), rs)| {
            let rate = rs.iter().map(|r| r.mapped as f64 / r.apps.max(1) as f64).sum::<f64>() / rs.len() as f64;
            let full: Vec<f64> = rs.iter().filter(|r| r.mapped == r.apps).map(|r| r.energy).collect();
            IsolationRow {
                mix,
                availability: level.0,
                mode,
                sequences: rs.len(),
                success_rate: rate,
                mean_energy_all_mapped: (!full.is_empty()).then(|| full.iter().sum::<f64>() / full.len() as f64),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingKnobs {
    pub instances: usize,
    /// Timeouts to measure; each instance also gets an oracle run
    /// without a timeout.
    pub timeouts_ms: Vec<u64>,
    /// Node budget of the oracle run; instances it cannot settle are
    /// left out of the false-negative rate.
    pub oracle_nodes: u64,
    pub max_occupancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub instance: usize,
    /// Empty for the oracle run.
    pub timeout_ms: Option<u64>,
    pub outcome: AttemptOutcome,
    pub oracle: AttemptOutcome,
    pub micros: u64,
}

/// Time the solver on constraint graphs drawn from the pool against
/// randomly pre-occupied systems. Wall-clock based, so not bit-for-bit
/// reproducible; the instances themselves are.
pub fn exp_timing(
    pool: &[Vec<OperatingPoint>],
    arch: Arc<Architecture>,
    knobs: &TimingKnobs,
    seed: u64,
) -> Result<Vec<TimingRecord>, BenchError> {
    let candidates: Vec<usize> = (0..pool.len()).filter(|&k| !pool[k].is_empty()).collect();
    if candidates.is_empty() {
        return Err(BenchError::Spec("no operating points to time".into()));
    }
    let fill = SolverOptions::new(IsolationMode::Temporal).with_node_limit(Some(100_000));
    let mut out = Vec::new();
    for instance in 0..knobs.instances {
        let mut rng = trial_rng(seed, instance as u64);
        let mut state = SystemState::new(Arc::clone(&arch));
        let target = rng.gen_range(0.0..=knobs.max_occupancy);
        preoccupy(pool, &mut state, target, fill, &mut rng)?;
        let app = candidates[rng.gen_range(0..candidates.len())];
        let cg = &pool[app][rng.gen_range(0..pool[app].len())].cg;

        let oracle_opts = SolverOptions::new(IsolationMode::Temporal).with_node_limit(Some(knobs.oracle_nodes));
        let start = Instant::now();
        let oracle = backtrack(cg, &state, oracle_opts);
        let micros = elapsed_micros(start);
        if let SolveOutcome::Found(asg) = &oracle {
            verify(cg, &state, asg, &oracle_opts)
                .map_err(|e| BenchError::Unsound(format!("instance {instance}: {e}")))?;
        }
        out.push(TimingRecord { instance, timeout_ms: None, outcome: oracle.kind(), oracle: oracle.kind(), micros });

        for &ms in &knobs.timeouts_ms {
            let opts = SolverOptions::new(IsolationMode::Temporal).with_timeout(Some(Duration::from_millis(ms)));
            let start = Instant::now();
            let got = backtrack(cg, &state, opts);
            let micros = elapsed_micros(start);
            out.push(TimingRecord {
                instance,
                timeout_ms: Some(ms),
                outcome: got.kind(),
                oracle: oracle.kind(),
                micros,
            });
        }
    }
    Ok(out)
}

fn elapsed_micros(start: Instant) -> u64 {
    start.elapsed().as_micros().try_into().unwrap_or(u64::MAX)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub timeout_ms: Option<u64>,
    pub attempts: usize,
    pub found: usize,
    pub timed_out: usize,
    /// Share of oracle-feasible instances this timeout rejected.
    pub false_negative_rate: f64,
    pub max_micros: u64,
}

pub fn summarize_timing(records: &[TimingRecord]) -> Vec<TimingRow> {
    let mut bins: BTreeMap<Option<u64>, Vec<&TimingRecord>> = BTreeMap::new();
    for r in records {
        bins.entry(r.timeout_ms).or_default().push(r);
    }
    bins.into_iter()
        .map(|(timeout_ms, rs)| {
            let feasible = rs.iter().filter(|r| r.oracle == AttemptOutcome::Found).count();
            let missed =
                rs.iter().filter(|r| r.oracle == AttemptOutcome::Found && r.outcome != AttemptOutcome::Found).count();
            TimingRow {
                timeout_ms,
                attempts: rs.len(),
                found: rs.iter().filter(|r| r.outcome == AttemptOutcome::Found).count(),
                timed_out: rs.iter().filter(|r| r.outcome == AttemptOutcome::TimedOut).count(),
                false_negative_rate: if feasible == 0 { 0.0 } else { missed as f64 / feasible as f64 },
                max_micros: rs.iter().map(|r| r.micros).max().unwrap_or(0),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfRow {
    pub timeout_ms: Option<u64>,
    /// `found` or `failed`, by the outcome of the run itself.
    pub class: String,
    pub micros: u64,
    pub fraction: f64,
}

/// Empirical CDF of wall times per timeout, split by success.
pub fn timing_cdf(records: &[TimingRecord]) -> Vec<CdfRow> {
    let mut bins: BTreeMap<(Option<u64>, &str), Vec<u64>> = BTreeMap::new();
    for r in records {
        let class = if r.outcome == AttemptOutcome::Found { "found" } else { "failed" };
        bins.entry((r.timeout_ms, class)).or_default().push(r.micros);
    }
    let mut rows = Vec::new();
    for ((timeout_ms, class), mut times) in bins {
        times.sort_unstable();
        let n = times.len() as f64;
        for (i, micros) in times.into_iter().enumerate() {
            rows.push(CdfRow { timeout_ms, class: class.to_string(), micros, fraction: (i + 1) as f64 / n });
        }
    }
    rows
}
