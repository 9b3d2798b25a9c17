//! Causal and statistical estimands.
//!
//! The causal estimand is fixed by the study class: the difference (or
//! ratio) of counterfactual outcome risks under "treat and prevent
//! censoring" versus "do not treat and prevent censoring",
//!
//! ```text
//! ψ = P(Y(a=1, c=0) = 1) − P(Y(a=0, c=0) = 1)
//! ```
//!
//! [`check_identification`] asks the graph whether ψ is expressible in
//! observed-data quantities via covariate adjustment; on success,
//! [`compile_statistical_estimand`] fixes one adjustment set Z and emits
//! the statistical target
//!
//! ```text
//! Ψ = E_Z( P[Y=1 | C=0, A=1, Z] − P[Y=1 | C=0, A=0, Z] )
//! ```
//!
//! which is what the estimation layer actually computes. The difference
//! ψ − Ψ — the causal gap — is what the sensitivity layer reasons about.

use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};
use crate::graph::{d_separated, find_adjustment_sets, CausalGraph, PathWitness, Role};

/// Scale of the reported contrast between arm risks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Contrast {
    RiskDifference,
    RiskRatio,
}

impl Contrast {
    pub fn as_str(self) -> &'static str {
        match self {
            Contrast::RiskDifference => "risk_difference",
            Contrast::RiskRatio => "risk_ratio",
        }
    }

    /// The no-effect value on this scale (0 for differences, 1 for ratios).
    pub fn null_value(self) -> f64 {
        match self {
            Contrast::RiskDifference => 0.0,
            Contrast::RiskRatio => 1.0,
        }
    }
}

/// One static intervention arm: set treatment to `treatment_level` and
/// prevent censoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreatmentStrategy {
    pub treatment_level: u8,
    /// Always 0: both strategies eliminate censoring.
    pub censoring_level: u8,
}

/// The causal question, stated independently of any data.
///
/// Constructed via [`CausalEstimand::new`], which pins the two strategies
/// to (a=1, c=0) and (a=0, c=0) — the strategies always differ in
/// treatment level and always prevent censoring, by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalEstimand {
    /// Free-text description of the target population.
    pub population: String,
    pub strategy_treated: TreatmentStrategy,
    pub strategy_control: TreatmentStrategy,
    /// Node id of the outcome in the causal graph (and column in the data).
    pub outcome_node: String,
    /// Free-text description of the outcome measure.
    pub outcome_description: String,
    pub contrast: Contrast,
}

impl CausalEstimand {
    pub fn new(
        population: impl Into<String>,
        outcome_node: impl Into<String>,
        outcome_description: impl Into<String>,
        contrast: Contrast,
    ) -> CausalEstimand {
        CausalEstimand {
            population: population.into(),
            strategy_treated: TreatmentStrategy { treatment_level: 1, censoring_level: 0 },
            strategy_control: TreatmentStrategy { treatment_level: 0, censoring_level: 0 },
            outcome_node: outcome_node.into(),
            outcome_description: outcome_description.into(),
            contrast,
        }
    }

    /// Counterfactual expression, e.g.
    /// `P(Y(a=1,c=0)=1) - P(Y(a=0,c=0)=1)`.
    pub fn expression(&self) -> String {
        let y = &self.outcome_node;
        let t = format!("P({y}(a=1,c=0)=1)");
        let c = format!("P({y}(a=0,c=0)=1)");
        match self.contrast {
            Contrast::RiskDifference => format!("{t} - {c}"),
            Contrast::RiskRatio => format!("{t} / {c}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentificationStatus {
    Identified,
    NotIdentified,
}

/// One identification assumption with its graph-derived verdict.
///
/// `holds` is `None` when the assumption cannot be settled by the graph at
/// all (positivity), in which case `evidence` points at the empirical
/// diagnostics instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionVerdict {
    pub assumption: String,
    pub holds: Option<bool>,
    pub evidence: String,
    pub witnesses: Vec<PathWitness>,
}

/// Outcome of checking the causal estimand against a graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentificationResult {
    pub status: IdentificationStatus,
    /// Minimal valid adjustment sets, ordered by size then
    /// lexicographically. Non-empty exactly when `status` is identified.
    pub adjustment_sets: Vec<Vec<String>>,
    pub assumptions: Vec<AssumptionVerdict>,
    pub treatment_node: String,
    pub outcome_node: String,
    pub censoring_node: Option<String>,
}

/// Check whether `ce` is identified from `g` by covariate adjustment.
///
/// Deterministic in its inputs. When nothing identifies the estimand, the
/// assumption verdicts carry one open path as evidence (an unblockable
/// backdoor path, or an open censoring path).
pub fn check_identification(g: &CausalGraph, ce: &CausalEstimand) -> Result<IdentificationResult> {
    let t_ix = g
        .treatment()
        .ok_or_else(|| EngineError::MissingRole { role: Role::Treatment.as_str().into() })?;
    let y_ix = g
        .outcome()
        .ok_or_else(|| EngineError::MissingRole { role: Role::Outcome.as_str().into() })?;
    if g.node_id(y_ix) != ce.outcome_node {
        return Err(EngineError::UnknownNode {
            id: ce.outcome_node.clone(),
            context: format!(
                "causal estimand outcome (graph outcome node is `{}`)",
                g.node_id(y_ix)
            ),
        });
    }
    let treatment = g.node_id(t_ix).to_string();
    let outcome = g.node_id(y_ix).to_string();
    let censoring = g.censoring().map(|c| g.node_id(c).to_string());

    let sets = find_adjustment_sets(g)?;
    let identified = !sets.is_empty();

    let mut assumptions = Vec::with_capacity(3);
    if identified {
        let shown = render_set(&sets[0]);
        assumptions.push(AssumptionVerdict {
            assumption: "exchangeability for treatment".into(),
            holds: Some(true),
            evidence: format!("every backdoor path from {treatment} to {outcome} is blocked by measured set {shown}"),
            witnesses: Vec::new(),
        });
        assumptions.push(AssumptionVerdict {
            assumption: "exchangeability for censoring".into(),
            holds: Some(true),
            evidence: match &censoring {
                Some(c) => format!(
                    "{c} is d-separated from {outcome} given {shown} and {treatment} once edges out of {c} are removed"
                ),
                None => "no censoring node in the graph; assumption holds vacuously".into(),
            },
            witnesses: Vec::new(),
        });
    } else {
        // Evidence: test the empty set. Were the empty set to pass both
        // conditions it would itself be a valid adjustment set, so at
        // least one condition fails and yields an open path.
        let g_backdoor = g.without_outgoing(t_ix);
        let bd = d_separated(&g_backdoor, &treatment, &outcome, &[])?;
        let (bd_holds, bd_evidence, bd_witnesses) = if bd.separated {
            (Some(true), "no open backdoor path with the empty set".to_string(), Vec::new())
        } else {
            let w = &bd.witnesses[0];
            (
                Some(false),
                format!("open backdoor path not blockable by any measured set: {}", w.render()),
                bd.witnesses.clone(),
            )
        };
        assumptions.push(AssumptionVerdict {
            assumption: "exchangeability for treatment".into(),
            holds: bd_holds,
            evidence: bd_evidence,
            witnesses: bd_witnesses,
        });

        let (c_holds, c_evidence, c_witnesses) = match (&censoring, g.censoring()) {
            (Some(c), Some(c_ix)) => {
                let g_cens = g.without_outgoing(c_ix);
                let r = d_separated(&g_cens, c, &outcome, &[treatment.as_str()])?;
                if r.separated {
                    (Some(true), format!("{c} separated from {outcome} given {treatment} alone"), Vec::new())
                } else {
                    let w = &r.witnesses[0];
                    (Some(false), format!("open censoring path: {}", w.render()), r.witnesses.clone())
                }
            }
            _ => (Some(true), "no censoring node in the graph; assumption holds vacuously".into(), Vec::new()),
        };
        assumptions.push(AssumptionVerdict {
            assumption: "exchangeability for censoring".into(),
            holds: c_holds,
            evidence: c_evidence,
            witnesses: c_witnesses,
        });
    }

    // Positivity can never be settled by the graph.
    assumptions.push(AssumptionVerdict {
        assumption: "positivity".into(),
        holds: None,
        evidence: "empirical — see diagnostics".into(),
        witnesses: Vec::new(),
    });

    Ok(IdentificationResult {
        status: if identified { IdentificationStatus::Identified } else { IdentificationStatus::NotIdentified },
        adjustment_sets: sets,
        assumptions,
        treatment_node: treatment,
        outcome_node: outcome,
        censoring_node: censoring,
    })
}

/// The statistical target for estimation: adjustment set, conditioning
/// structure, and contrast scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatisticalEstimand {
    pub adjustment_set: Vec<String>,
    pub treatment: String,
    pub outcome: String,
    pub censoring: Option<String>,
    /// Symbolic arm means, e.g. `E(Y | C=0, A=1, W)`.
    pub arm_mean_treated: String,
    pub arm_mean_control: String,
    /// Full expression for the report, e.g.
    /// `E_W( E(Y | C=0, A=1, W) - E(Y | C=0, A=0, W) )`.
    pub expression: String,
    pub contrast: Contrast,
}

/// Fix adjustment set number `choice` (0-based index into
/// `ir.adjustment_sets`) and compile the statistical estimand.
pub fn compile_statistical_estimand(
    ce: &CausalEstimand,
    ir: &IdentificationResult,
    choice: usize,
) -> Result<StatisticalEstimand> {
    if ir.status != IdentificationStatus::Identified {
        let witnesses = ir.assumptions.iter().flat_map(|a| a.witnesses.iter().cloned()).collect();
        return Err(EngineError::NotIdentified { witnesses });
    }
    if choice >= ir.adjustment_sets.len() {
        return Err(EngineError::AdjustmentChoice { choice, available: ir.adjustment_sets.len() });
    }
    let z = ir.adjustment_sets[choice].clone();
    let y = &ce.outcome_node;
    let a = &ir.treatment_node;

    let cond = |level: u8| -> String {
        let mut parts = Vec::new();
        if let Some(c) = &ir.censoring_node {
            parts.push(format!("{c}=0"));
        }
        parts.push(format!("{a}={level}"));
        if !z.is_empty() {
            parts.push(z.join(", "));
        }
        format!("E({y} | {})", parts.join(", "))
    };
    let treated = cond(1);
    let control = cond(0);

    let subscript = if z.is_empty() { String::new() } else { format!("_{{{}}}", z.join(", ")) };
    let inner = match ce.contrast {
        Contrast::RiskDifference => format!("{treated} - {control}"),
        Contrast::RiskRatio => format!("{treated} / {control}"),
    };
    let expression = if z.is_empty() { inner.clone() } else { format!("E{subscript}( {inner} )") };

    Ok(StatisticalEstimand {
        adjustment_set: z,
        treatment: a.clone(),
        outcome: y.clone(),
        censoring: ir.censoring_node.clone(),
        arm_mean_treated: treated,
        arm_mean_control: control,
        expression,
        contrast: ce.contrast,
    })
}

fn render_set(z: &[String]) -> String {
    if z.is_empty() {
        "{} (empty set)".to_string()
    } else {
        format!("{{{}}}", z.join(", "))
    }
}
