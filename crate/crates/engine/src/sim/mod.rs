//! Outcome-blind simulation: declare data-generating processes, compute
//! the true causal contrast they imply, generate study datasets, and
//! benchmark candidate designs before any real data is analyzed.
//!
//! The pieces compose in that order: [`parse_dgp`] reads the DGP DSL,
//! [`true_estimand`] computes the exact truth by enumeration (with
//! [`true_estimand_mc`] as the large-sample fallback),
//! [`simulate_dataset`] realizes one replication of a [`DesignSpec`],
//! and [`evaluate`] sweeps designs × estimators × worlds into a
//! [`SimulationReport`].

mod evaluate;
mod generate;
mod parse;
mod truth;

pub use evaluate::{
    evaluate, DesignEstimatorSummary, SimulationCell, SimulationReport, WorldMetrics,
    MAX_FAILURE_FRACTION, MIN_REPLICATIONS,
};
pub use generate::{
    simulate_dataset, DesignKind, DesignSpec, DEFAULT_ALPHA, DEFAULT_DELTA_GRID,
    EXTERNAL_SOURCE_COLUMN,
};
pub use parse::{parse_dgp, DgpNode, DgpSpec, Distribution, Term, TermNodes};
pub use truth::{true_estimand, true_estimand_mc, MC_FALLBACK_DRAWS};
