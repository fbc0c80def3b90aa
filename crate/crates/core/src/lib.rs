//! Hybrid design-time/run-time application mapping for mesh NoC MPSoCs.
//!
//! Design time: [`dse`] explores bindings, priorities and TDM slot
//! reservations per application and keeps a Pareto archive of mappings
//! verified by [`analysis`]. Each mapping is compacted by [`cgraph`] into a
//! constraint graph, an operating point that stands for every symmetric
//! placement of the same mapping.
//!
//! Run time: [`rtm`] admits applications by binding constraint graphs onto
//! the current system state with a backtracking solver under temporal or
//! spatial isolation. [`bench`] drives the experiments behind the CLI.

pub mod analysis;
pub mod bench;
pub mod cgraph;
pub mod dse;
pub mod model;
pub mod rtm;
