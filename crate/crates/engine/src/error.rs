//! Error type shared by every engine module.
//!
//! One flat enum keeps cross-module plumbing simple (estimation calls into
//! the learner and data layers, the CLI calls into everything). The CLI
//! maps [`EngineError::is_syntax`] to its usage/parse exit code; everything
//! else is a domain failure.

use thiserror::Error;

use crate::graph::PathWitness;

pub type Result<T> = std::result::Result<T, EngineError>;

#[derive(Debug, Error)]
pub enum EngineError {
    // ── causal graph ──
    #[error("syntax error at line {line}, column {col}: {message}")]
    GraphSyntax { line: usize, col: usize, message: String },

    #[error("duplicate node `{id}`")]
    DuplicateNode { id: String },

    #[error("duplicate edge `{from} -> {to}`")]
    DuplicateEdge { from: String, to: String },

    #[error("self-loop on node `{id}`")]
    SelfLoop { id: String },

    #[error("unknown node `{id}` in {context}")]
    UnknownNode { id: String, context: String },

    #[error("graph contains a cycle: {}", path.join(" -> "))]
    Cycle { path: Vec<String> },

    #[error("more than one node with role `{role}`: {}", ids.join(", "))]
    RoleCardinality { role: String, ids: Vec<String> },

    #[error("latent node `{id}` cannot carry role `{role}`")]
    LatentSpecialRole { id: String, role: String },

    #[error("graph has no node with role `{role}`")]
    MissingRole { role: String },

    #[error("invalid d-separation query: {message}")]
    InvalidQuery { message: String },

    #[error("adjustment-set candidate pool has {size} nodes, exceeding the exhaustive-search cap of {cap}")]
    PoolTooLarge { size: usize, cap: usize },

    // ── estimand ──
    #[error("estimand is not identified from the causal model{}", render_witness_suffix(witnesses))]
    NotIdentified { witnesses: Vec<PathWitness> },

    #[error("adjustment-set choice {choice} is out of range ({available} sets available)")]
    AdjustmentChoice { choice: usize, available: usize },

    // ── dataset ──
    #[error("i/o error reading `{path}`: {source}")]
    Io { path: String, source: std::io::Error },

    #[error("malformed delimited text{}: {message}", at_row(*row))]
    DataSyntax { row: Option<usize>, message: String },

    #[error("required column `{name}` not present in the data file")]
    MissingColumn { name: String },

    #[error("column `{column}` must be binary 0/1 but row {row} holds {value}")]
    NonBinaryColumn { column: String, row: usize, value: f64 },

    #[error("missing value in column `{column}` at row {row}; only the outcome column may contain missing values")]
    UnexpectedMissing { column: String, row: usize },

    #[error("data file contains a header but no rows")]
    EmptyDataset,

    // ── estimation ──
    #[error("invalid estimator configuration: {message}")]
    InvalidEstimatorConfig { message: String },

    #[error("no uncensored rows in the {arm} arm; contrast is not estimable")]
    EmptyArm { arm: String },

    #[error("learner weights must be non-negative with a positive sum")]
    BadWeights,

    #[error("every learner in the library failed to fit: {message}")]
    AllLearnersFailed { message: String },

    #[error("targeting step did not converge after {iterations} iterations")]
    FluctuationDiverged { iterations: usize },

    // ── sensitivity ──
    #[error("operation requires a risk-difference estimate but got scale `{got}`")]
    ScaleMismatch { got: String },

    #[error("invalid causal-gap bounds: lo={lo} exceeds hi={hi}")]
    InvalidGap { lo: f64, hi: f64 },

    #[error("arm risks must be positive to form a risk ratio (treated={treated}, control={control})")]
    NonPositiveArmRisk { treated: f64, control: f64 },

    #[error("negative-control column `{column}` is unusable: {reason}")]
    BadNegativeControl { column: String, reason: String },

    // ── simulation ──
    #[error("DGP syntax error at line {line}, column {col}: {message}")]
    DgpSyntax { line: usize, col: usize, message: String },

    #[error("node `{name}` references `{referenced}` before it is defined (line {line})")]
    ForwardReference { name: String, referenced: String, line: usize },

    #[error("constant probability {value} for node `{name}` lies outside (0, 1)")]
    ProbabilityOutOfRange { name: String, value: f64 },

    #[error("unknown role `{role}` at line {line}; expected covariate, treatment, censoring, outcome, or none")]
    UnknownDgpRole { role: String, line: usize },

    #[error("DGP has no node with role `{role}`; annotate one with role={role}")]
    DgpMissingRole { role: String },

    #[error("exact enumeration supports binary nodes only (node `{name}`); set the large-sample fallback flag to approximate by Monte Carlo")]
    EnumerationUnsupported { name: String },

    #[error("invalid design `{name}`: {message}")]
    InvalidDesign { name: String, message: String },

    #[error("simulation study needs at least {min} replications, got {got}")]
    TooFewReplications { got: usize, min: usize },

    // ── config / report ──
    #[error("study config is not valid TOML: {message}")]
    ConfigSyntax { message: String },

    #[error("invalid study config: {message}")]
    ConfigInvalid { message: String },

    #[error("report section ordering violated: {message}")]
    SectionOrder { message: String },

    #[error("pre-specification violated: {message}")]
    PreSpecification { message: String },
}

impl EngineError {
    /// True for errors caused by text that fails its format grammar — the
    /// CLI reports those with the usage/parse exit code. Semantically
    /// invalid but well-formed inputs (cycles, non-binary treatment, an
    /// unidentified estimand) are domain errors instead.
    pub fn is_syntax(&self) -> bool {
        matches!(
            self,
            EngineError::GraphSyntax { .. }
                | EngineError::DgpSyntax { .. }
                | EngineError::DataSyntax { .. }
                | EngineError::ConfigSyntax { .. }
        )
    }
}

fn render_witness_suffix(witnesses: &[PathWitness]) -> String {
    match witnesses.first() {
        Some(w) => format!("; open path: {}", w.render()),
        None => String::new(),
    }
}

fn at_row(row: Option<usize>) -> String {
    match row {
        Some(r) => format!(" at row {r}"),
        None => String::new(),
    }
}
