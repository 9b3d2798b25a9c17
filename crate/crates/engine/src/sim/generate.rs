//! Study designs and simulated dataset generation.
//!
//! A [`DesignSpec`] describes how a study would collect data from a DGP:
//! as-is (`observational`), with randomized treatment (`rct`), or as a
//! trial augmented by external controls whose outcome model drifts by Δ
//! on the logit scale (`hybrid`). [`simulate_dataset`] realizes one
//! replication of a design.
//!
//! Determinism contract: replication `r` draws from the stream derived
//! from `(master_seed, SIM_DATA, r)`, and every node consumes exactly one
//! uniform per row whether or not its value is forced. Sweeping Δ under
//! a fixed seed therefore changes only the external rows' outcome column
//! — every other cell is bit-identical across the grid.

use crate::data::{Dataset, DatasetSchema};
use crate::error::{EngineError, Result};
use crate::estimate::Method;
use crate::graph::Role;
use crate::seeding::{purpose, stream};
use crate::sim::parse::{DgpSpec, Distribution};

use rand::Rng;
use serde::Serialize;

/// Logit-scale drift values swept by default for hybrid designs.
pub const DEFAULT_DELTA_GRID: [f64; 4] = [0.0, 0.25, 0.5, 1.0];

/// Two-sided test size used when rejecting the null from a 95% CI.
pub const DEFAULT_ALPHA: f64 = 0.05;

/// Indicator column appended to hybrid datasets: 0 for trial rows, 1 for
/// external controls. Reserved — a DGP node may not use this name in a
/// hybrid design.
pub const EXTERNAL_SOURCE_COLUMN: &str = "S";

/// How a design collects data from the DGP.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DesignKind {
    /// Treatment re-randomized 1:1, everything else as declared.
    Rct { n: usize },
    /// The DGP as declared, treatment mechanism included.
    Observational { n: usize },
    /// A trial of `n_rct` plus `n_external` external controls (treatment
    /// forced to 0) whose outcome intercept is shifted by Δ; the design
    /// is evaluated at every Δ in `deltas`.
    Hybrid { n_rct: usize, n_external: usize, deltas: Vec<f64> },
}

/// One candidate study design for simulation-based benchmarking.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignSpec {
    pub name: String,
    pub kind: DesignKind,
    /// Estimators run on every replication.
    pub estimators: Vec<Method>,
    pub alpha: f64,
}

impl DesignSpec {
    pub fn new(name: impl Into<String>, kind: DesignKind, estimators: Vec<Method>) -> DesignSpec {
        DesignSpec { name: name.into(), kind, estimators, alpha: DEFAULT_ALPHA }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |message: String| {
            Err(EngineError::InvalidDesign { name: self.name.clone(), message })
        };
        if self.name.trim().is_empty() {
            return fail("design name must be nonempty".into());
        }
        if self.estimators.is_empty() {
            return fail("at least one estimator is required".into());
        }
        for (i, m) in self.estimators.iter().enumerate() {
            if self.estimators[..i].contains(m) {
                return fail(format!("estimator `{}` listed twice", m.name()));
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return fail(format!("alpha must be in (0, 1), got {}", self.alpha));
        }
        match &self.kind {
            DesignKind::Rct { n } | DesignKind::Observational { n } => {
                if *n < 2 {
                    return fail(format!("sample size must be at least 2, got {n}"));
                }
            }
            DesignKind::Hybrid { n_rct, n_external, deltas } => {
                if *n_rct < 2 {
                    return fail(format!("n_rct must be at least 2, got {n_rct}"));
                }
                if *n_external < 1 {
                    return fail("n_external must be at least 1".into());
                }
                if deltas.is_empty() {
                    return fail("the Δ grid must be nonempty".into());
                }
                if let Some(d) = deltas.iter().find(|d| !d.is_finite()) {
                    return fail(format!("Δ values must be finite, got {d}"));
                }
            }
        }
        Ok(())
    }

    /// The (design, Δ) evaluation cells: one per grid value for hybrid
    /// designs, a single Δ-free cell otherwise.
    pub fn delta_cells(&self) -> Vec<Option<f64>> {
        match &self.kind {
            DesignKind::Hybrid { deltas, .. } => deltas.iter().copied().map(Some).collect(),
            _ => vec![None],
        }
    }

    /// Total rows one replication collects.
    pub fn total_n(&self) -> usize {
        match &self.kind {
            DesignKind::Rct { n } | DesignKind::Observational { n } => *n,
            DesignKind::Hybrid { n_rct, n_external, .. } => n_rct + n_external,
        }
    }
}

/// How one block of rows realizes the DGP.
struct Block {
    rows: usize,
    /// Re-randomize treatment as Bernoulli(1/2) instead of its mechanism.
    randomize_treatment: bool,
    /// Force treatment to this value (external controls).
    forced_treatment: Option<f64>,
    /// Logit shift applied to the outcome node.
    outcome_shift: f64,
    /// Value for the appended source column, when one exists.
    source: Option<f64>,
}

/// Generate replication `rep` of `design` from `dgp`.
///
/// `delta` must be `Some` exactly for hybrid designs (the Δ at which the
/// replication is generated) and `None` otherwise. Rows where the
/// censoring node is 1 carry `NA` in the outcome column, mirroring what a
/// real study would record.
pub fn simulate_dataset(
    dgp: &DgpSpec,
    design: &DesignSpec,
    delta: Option<f64>,
    rep: u64,
    master_seed: u64,
) -> Result<Dataset> {
    design.validate()?;
    let fail = |message: String| {
        Err(EngineError::InvalidDesign { name: design.name.clone(), message })
    };

    let t = dgp.require_role(Role::Treatment)?;
    let y = dgp.require_role(Role::Outcome)?;
    let c = dgp.role_index(Role::Censoring);
    let nodes = dgp.nodes();

    let blocks: Vec<Block> = match (&design.kind, delta) {
        (DesignKind::Hybrid { .. }, None) => {
            return fail("hybrid generation needs a Δ from the design's delta grid".into())
        }
        (DesignKind::Rct { .. } | DesignKind::Observational { .. }, Some(d)) => {
            return fail(format!("Δ={d} given, but Δ applies to hybrid designs only"))
        }
        (DesignKind::Rct { n }, None) => vec![Block {
            rows: *n,
            randomize_treatment: true,
            forced_treatment: None,
            outcome_shift: 0.0,
            source: None,
        }],
        (DesignKind::Observational { n }, None) => vec![Block {
            rows: *n,
            randomize_treatment: false,
            forced_treatment: None,
            outcome_shift: 0.0,
            source: None,
        }],
        (DesignKind::Hybrid { n_rct, n_external, .. }, Some(d)) => {
            if !d.is_finite() {
                return fail(format!("Δ must be finite, got {d}"));
            }
            if !matches!(nodes[y].dist, Distribution::Logistic { .. }) {
                return fail("the hybrid Δ shift needs a logistic outcome node".into());
            }
            if dgp.node_index(EXTERNAL_SOURCE_COLUMN).is_some() {
                return fail(format!(
                    "node name `{EXTERNAL_SOURCE_COLUMN}` is reserved for the appended source column"
                ));
            }
            vec![
                Block {
                    rows: *n_rct,
                    randomize_treatment: true,
                    forced_treatment: None,
                    outcome_shift: 0.0,
                    source: Some(0.0),
                },
                Block {
                    rows: *n_external,
                    randomize_treatment: false,
                    forced_treatment: Some(0.0),
                    outcome_shift: d,
                    source: Some(1.0),
                },
            ]
        }
    };

    let total: usize = blocks.iter().map(|b| b.rows).sum();
    let mut rng = stream(master_seed, &[purpose::SIM_DATA, rep]);
    let mut cols: Vec<Vec<Option<f64>>> = vec![Vec::with_capacity(total); nodes.len()];
    let hybrid = matches!(design.kind, DesignKind::Hybrid { .. });
    let mut source_col: Vec<Option<f64>> = Vec::with_capacity(if hybrid { total } else { 0 });

    let mut values = vec![0.0; nodes.len()];
    for block in &blocks {
        for _ in 0..block.rows {
            for ix in 0..nodes.len() {
                // One uniform per node per row, forced or not — see the
                // module docs for why the draw is always consumed.
                let u: f64 = rng.gen();
                values[ix] = if ix == t && block.randomize_treatment {
                    (u < 0.5) as u8 as f64
                } else if ix == t && block.forced_treatment.is_some() {
                    block.forced_treatment.unwrap()
                } else {
                    let p = if ix == y && block.outcome_shift != 0.0 {
                        dgp.shifted_probability(ix, &values, block.outcome_shift)
                            .expect("validated logistic outcome")
                    } else {
                        dgp.probability(ix, &values)
                    };
                    (u < p) as u8 as f64
                };
            }
            let censored = c.map_or(false, |cix| values[cix] == 1.0);
            for ix in 0..nodes.len() {
                let cell = if ix == y && censored { None } else { Some(values[ix]) };
                cols[ix].push(cell);
            }
            if hybrid {
                source_col.push(block.source);
            }
        }
    }

    let mut names: Vec<String> = nodes.iter().map(|n| n.name.clone()).collect();
    if hybrid {
        names.push(EXTERNAL_SOURCE_COLUMN.to_string());
        cols.push(source_col);
    }
    let schema = DatasetSchema {
        treatment: nodes[t].name.clone(),
        outcome: nodes[y].name.clone(),
        censoring: c.map(|ix| nodes[ix].name.clone()),
        // Only covariate-role nodes: auxiliary (`role=none`) nodes and the
        // source column stay out of adjustment sets but remain columns.
        covariates: nodes
            .iter()
            .filter(|n| n.role == Role::Covariate)
            .map(|n| n.name.clone())
            .collect(),
    };
    Dataset::from_parts(names, cols, &schema)
}
