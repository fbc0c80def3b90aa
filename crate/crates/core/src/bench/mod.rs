//! Synthetic benchmarks and the experiment drivers behind the CLI.

mod experiments;
mod gen;

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cgraph::{extract, CgError, OperatingPoint};
use crate::dse::{explore, DseError, EaConfig};
use crate::model::{Architecture, ModelError, SchedulingParams, TaskGraph};
use crate::rtm::RtmError;

pub use experiments::{
    exp_isolation, exp_timing, exp_utilization, summarize_isolation, summarize_timing, summarize_utilization,
    timing_cdf, utilization_class, Admission, CdfRow, IsolationKnobs, IsolationRecord, IsolationRow, TimingKnobs,
    TimingRecord, TimingRow, UtilizationKnobs, UtilizationRecord, UtilizationRow,
};
pub use gen::{gen_benchmark, BenchmarkSpec};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    Spec(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dse(#[from] DseError),
    #[error(transparent)]
    Cgraph(#[from] CgError),
    #[error(transparent)]
    Rtm(#[from] RtmError),
    #[error("solver returned an assignment that fails re-verification: {0}")]
    Unsound(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Knobs of the three experiment families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub util_trials: usize,
    pub max_occupancy: f64,
    pub iso_sequences: usize,
    pub iso_levels: Vec<u32>,
    /// Application mixes as indices into the benchmark list.
    pub mixes: Vec<Vec<usize>>,
    pub timing_instances: usize,
    pub timing_timeouts_ms: Vec<u64>,
    /// Search-node budget per solver call in the utilization and
    /// isolation experiments. Keeps them deterministic.
    pub node_budget: Option<u64>,
    pub oracle_nodes: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            util_trials: 600,
            max_occupancy: 0.8,
            iso_sequences: 100,
            iso_levels: vec![100, 90, 80, 70, 60, 50, 40],
            mixes: vec![vec![0, 1, 2], vec![1, 3, 4, 5, 6], vec![2, 3, 5, 6, 7, 0]],
            timing_instances: 200,
            timing_timeouts_ms: vec![1, 10, 100],
            node_budget: Some(200_000),
            oracle_nodes: 5_000_000,
        }
    }
}

impl ExperimentConfig {
    pub fn utilization(&self) -> UtilizationKnobs {
        UtilizationKnobs { trials: self.util_trials, max_occupancy: self.max_occupancy, max_nodes: self.node_budget }
    }

    pub fn isolation(&self) -> IsolationKnobs {
        IsolationKnobs { sequences: self.iso_sequences, levels: self.iso_levels.clone(), max_nodes: self.node_budget }
    }

    pub fn timing(&self) -> TimingKnobs {
        TimingKnobs {
            instances: self.timing_instances,
            timeouts_ms: self.timing_timeouts_ms.clone(),
            oracle_nodes: self.oracle_nodes,
            max_occupancy: self.max_occupancy,
        }
    }
}

/// Contents of a configuration file. Every section is optional.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub scheduling: SchedulingParams,
    pub ea: EaConfig,
    pub benchmark: BenchmarkSpec,
    pub experiments: ExperimentConfig,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        let cfg: Config = toml::from_str(text).map_err(|e| BenchError::Spec(e.to_string()))?;
        cfg.scheduling.validate()?;
        cfg.ea.validate()?;
        if !(0.0..=1.0).contains(&cfg.experiments.max_occupancy) {
            return Err(BenchError::Spec("max_occupancy must be in [0, 1]".into()));
        }
        if cfg.experiments.iso_levels.iter().any(|&l| l > 100) {
            return Err(BenchError::Spec("iso_levels are percentages".into()));
        }
        Ok(cfg)
    }
}

/// Explore an application and turn every archived mapping into an
/// operating point, in archive order.
pub fn design_points(
    g: &TaskGraph,
    arch: &Architecture,
    params: &SchedulingParams,
    ea: &EaConfig,
    seed: u64,
) -> Result<Vec<OperatingPoint>, BenchError> {
    let archive = explore(g, arch, params, ea, seed)?;
    archive
        .entries()
        .iter()
        .map(|e| Ok(OperatingPoint { cg: extract(g, &e.mapping, params, arch)?, objectives: e.objectives.clone() }))
        .collect()
}

/// Write serializable rows as CSV with a header line.
pub fn write_csv<W: Write, T: Serialize>(out: W, rows: &[T]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
