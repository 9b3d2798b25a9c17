//! `roadmap-engine` — the Causal Roadmap for a single time-point
//! treatment with right-censoring, as a command-line pipeline.
//!
//! Each subcommand runs one Roadmap step and records its result as a JSON
//! artifact in the `--out` directory; later steps read the artifacts of
//! earlier ones and refuse to run out of order. `report` assembles
//! everything into `study_report.json`.
//!
//! Exit codes: 0 success; 1 domain failure (not identified, positivity
//! violation, pre-specification violation, …); 2 malformed input (DSL,
//! TOML, CSV, or command-line syntax). Every error message names the
//! Roadmap step it arose in.

mod artifacts;
mod config;
mod report;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use roadmap_engine::data::{missingness_summary, positivity_diagnostics, Dataset};
use roadmap_engine::estimand::{
    check_identification, compile_statistical_estimand, Contrast, IdentificationResult,
    IdentificationStatus, StatisticalEstimand,
};
use roadmap_engine::estimate::{estimate_with_options, EstimateResult};
use roadmap_engine::graph::{parse_graph, CausalGraph};
use roadmap_engine::sensitivity::{negative_control_check, sensitivity_report};
use roadmap_engine::sim::{evaluate, parse_dgp, SimulationReport};
use roadmap_engine::EngineError;

use artifacts::{field, mtime_seconds, ArtifactStore};
use config::StudyConfig;

const STEP_1A: &str = "Step 1a (causal model)";
const STEP_1B: &str = "Step 1b (causal estimand)";
const STEP_2: &str = "Step 2 (observed data)";
const STEP_3: &str = "Step 3 (identification)";
const STEP_4: &str = "Step 4 (statistical estimand)";
const STEP_5: &str = "Step 5 (estimation)";
const STEP_6: &str = "Step 6 (sensitivity analysis)";
const STEP_7: &str = "Step 7 (design benchmarking)";
const STEP_REPORT: &str = "Study report (Steps 1a–7)";

#[derive(Parser)]
#[command(
    name = "roadmap-engine",
    version,
    about = "Causal Roadmap pipeline: model, identify, diagnose, estimate, \
             stress-test, and benchmark a single time-point treatment effect"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Step 1a: parse the causal DAG and validate roles and acyclicity.
    ValidateDag {
        /// Graph file in the node/edge DSL.
        #[arg(long)]
        graph: PathBuf,
        /// Directory step artifacts are written to.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Steps 1b and 3: state the causal estimand, check identification,
    /// and compile the statistical estimand under the chosen adjustment set.
    Identify {
        #[arg(long)]
        graph: PathBuf,
        /// Study configuration (TOML).
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Steps 2 and 4 diagnostics: missingness structure and positivity.
    Diagnose {
        #[arg(long)]
        config: PathBuf,
        /// Observed data (CSV).
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Step 5: run the pre-specified estimator on the data.
    Estimate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Super-learner seed when the config does not pin one.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Step 6: causal-gap shift, E-values, and negative-control checks.
    Sensitivity {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Step 7: simulate candidate designs under null and alternative worlds.
    Simulate {
        /// Data-generating process for the null world (DSL).
        #[arg(long)]
        dgp_null: PathBuf,
        /// Data-generating process for the alternative world (DSL).
        #[arg(long)]
        dgp_alt: PathBuf,
        /// Candidate designs (TOML).
        #[arg(long)]
        designs: PathBuf,
        /// Monte-Carlo replications per world.
        #[arg(long, default_value_t = 1000)]
        reps: usize,
        /// Master seed for the whole simulation.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Step 7: simulate and rank the candidate designs.
    CompareDesigns {
        #[arg(long)]
        dgp_null: PathBuf,
        #[arg(long)]
        dgp_alt: PathBuf,
        #[arg(long)]
        designs: PathBuf,
        #[arg(long, default_value_t = 1000)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Assemble `study_report.json` from the step artifacts.
    Report {
        /// Study configuration; when given, its hash is checked against
        /// the recorded steps and its attestations are echoed.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

/// An engine error tagged with the Roadmap step it arose in.
#[derive(Debug)]
struct StepError {
    step: &'static str,
    source: EngineError,
}

impl fmt::Display for StepError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.step, self.source)
    }
}

type CmdResult = std::result::Result<String, StepError>;

trait WithStep<T> {
    fn step(self, label: &'static str) -> std::result::Result<T, StepError>;
}

impl<T> WithStep<T> for roadmap_engine::Result<T> {
    fn step(self, label: &'static str) -> std::result::Result<T, StepError> {
        self.map_err(|source| StepError { step: label, source })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.source.is_syntax() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn run(command: Command) -> CmdResult {
    match command {
        Command::ValidateDag { graph, out } => cmd_validate_dag(&graph, &out),
        Command::Identify { graph, config, out } => cmd_identify(&graph, &config, &out),
        Command::Diagnose { config, data, out } => cmd_diagnose(&config, &data, &out),
        Command::Estimate { config, data, out, seed } => cmd_estimate(&config, &data, &out, seed),
        Command::Sensitivity { config, data, out } => cmd_sensitivity(&config, &data, &out),
        Command::Simulate { dgp_null, dgp_alt, designs, reps, seed, out } => {
            cmd_simulate(&dgp_null, &dgp_alt, &designs, reps, seed, &out, false)
        }
        Command::CompareDesigns { dgp_null, dgp_alt, designs, reps, seed, out } => {
            cmd_simulate(&dgp_null, &dgp_alt, &designs, reps, seed, &out, true)
        }
        Command::Report { config, out } => cmd_report(config.as_deref(), &out),
    }
}

fn read_text(path: &Path) -> roadmap_engine::Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| EngineError::Io { path: path.display().to_string(), source: e })
}

fn role_id(g: &CausalGraph, ix: Option<usize>) -> String {
    ix.map_or_else(|| "—".to_string(), |i| g.node_id(i).to_string())
}

// ── Step 1a ──────────────────────────────────────────────────────────

fn graph_content(g: &CausalGraph) -> Value {
    let edges: Vec<Value> =
        g.edges().iter().map(|&(a, b)| json!([g.node_id(a), g.node_id(b)])).collect();
    json!({
        "name": g.name(),
        "node_count": g.node_count(),
        "edge_count": g.edge_count(),
        "nodes": g.nodes(),
        "edges": edges,
        "canonical": g.render(),
    })
}

fn cmd_validate_dag(graph: &Path, out: &Path) -> CmdResult {
    let store = ArtifactStore::new(out).step(STEP_1A)?;
    let input = store.input("graph", graph).step(STEP_1A)?;
    let g = parse_graph(&read_text(graph).step(STEP_1A)?).step(STEP_1A)?;
    let path = store.write("validate_dag", "validate-dag", &[input], graph_content(&g)).step(STEP_1A)?;
    Ok(format!(
        "{STEP_1A}: `{}` is a valid DAG with {} nodes and {} edges.\n  \
         treatment: {}  outcome: {}  censoring: {}\n  artifact: {}\n",
        g.name(),
        g.node_count(),
        g.edge_count(),
        role_id(&g, g.treatment()),
        role_id(&g, g.outcome()),
        role_id(&g, g.censoring()),
        path.display(),
    ))
}

// ── Steps 1b + 3 ─────────────────────────────────────────────────────

/// The graph's special nodes must be the config's data columns — the
/// causal model and the analysis plan have to describe the same study.
fn bind_graph_to_config(g: &CausalGraph, cfg: &StudyConfig) -> roadmap_engine::Result<()> {
    let pairs = [
        (g.treatment(), Some(&cfg.data.treatment), "treatment"),
        (g.outcome(), Some(&cfg.data.outcome), "outcome"),
        (g.censoring(), cfg.data.censoring.as_ref(), "censoring"),
    ];
    for (node, column, role) in pairs {
        match (node.map(|ix| g.node_id(ix)), column) {
            (Some(id), Some(col)) if id != col => {
                return Err(EngineError::ConfigInvalid {
                    message: format!(
                        "graph {role} node `{id}` does not match data.{role} column `{col}`"
                    ),
                });
            }
            (Some(id), None) => {
                return Err(EngineError::ConfigInvalid {
                    message: format!(
                        "graph declares a {role} node `{id}` but the study config names no \
                         data.{role} column"
                    ),
                });
            }
            (None, Some(col)) if role == "censoring" => {
                return Err(EngineError::ConfigInvalid {
                    message: format!(
                        "study config names data.censoring column `{col}` but the graph has \
                         no censoring node"
                    ),
                });
            }
            _ => {}
        }
    }
    Ok(())
}

fn not_identified_error(ir: &IdentificationResult) -> EngineError {
    let witnesses =
        ir.assumptions.iter().flat_map(|a| a.witnesses.iter().cloned()).collect();
    EngineError::NotIdentified { witnesses }
}

fn cmd_identify(graph: &Path, config: &Path, out: &Path) -> CmdResult {
    let store = ArtifactStore::new(out).step(STEP_3)?;
    let graph_input = store.input("graph", graph).step(STEP_3)?;
    let config_input = store.input("study_config", config).step(STEP_3)?;

    let g = parse_graph(&read_text(graph).step(STEP_1A)?).step(STEP_1A)?;
    let cfg = StudyConfig::load(config).step(STEP_1B)?;
    bind_graph_to_config(&g, &cfg).step(STEP_1B)?;
    let ce = cfg.causal_estimand().step(STEP_1B)?;

    let ir = check_identification(&g, &ce).step(STEP_3)?;
    let choice = cfg.identification.adjustment_set_index;
    let se = if ir.status == IdentificationStatus::Identified {
        let se = compile_statistical_estimand(&ce, &ir, choice).step(STEP_3)?;
        // The chosen set must be measured: every node in it has to be a
        // declared data column, or estimation can never run.
        for z in &se.adjustment_set {
            if !cfg.data.covariates.contains(z) {
                return Err(EngineError::ConfigInvalid {
                    message: format!(
                        "chosen adjustment set {:?} needs `{z}`, which is not among \
                         data.covariates — pick another set or measure it",
                        se.adjustment_set
                    ),
                })
                .step(STEP_4);
            }
        }
        Some(se)
    } else {
        None
    };

    let content = json!({
        "estimand": ce,
        "expression": ce.expression(),
        "result": ir,
        "adjustment_set_index": choice,
        "chosen_adjustment_set": se.as_ref().map(|s| s.adjustment_set.clone()),
        "statistical_estimand": se,
    });
    // Written even when identification fails: the negative verdict is a
    // Roadmap result worth keeping, and downstream steps check `status`.
    let path = store
        .write("identify", "identify", &[graph_input, config_input], content)
        .step(STEP_3)?;

    if ir.status != IdentificationStatus::Identified {
        return Err(not_identified_error(&ir)).step(STEP_3);
    }
    let se = se.expect("identified implies compiled estimand");
    Ok(format!(
        "{STEP_1B}: ψ = {}\n{STEP_3}: identified — {} minimal adjustment set(s); \
         chosen index {} = {:?}\n{STEP_4}: {}\n  artifact: {}\n",
        ce.expression(),
        ir.adjustment_sets.len(),
        choice,
        se.adjustment_set,
        se.expression,
        path.display(),
    ))
}

// ── Steps 2 + 4 diagnostics ──────────────────────────────────────────

fn cmd_diagnose(config: &Path, data: &Path, out: &Path) -> CmdResult {
    let store = ArtifactStore::new(out).step(STEP_2)?;
    let config_input = store.input("study_config", config).step(STEP_2)?;
    let data_input = store.input("data", data).step(STEP_2)?;

    let cfg = StudyConfig::load(config).step(STEP_2)?;
    let schema = cfg.schema();
    let d = Dataset::load(data, &schema).step(STEP_2)?;
    let miss = missingness_summary(&d).step(STEP_2)?;

    // Positivity is checked within the APPLIED adjustment set when
    // identification has run; otherwise over every declared covariate.
    let z: Vec<String> = match store.read("identify").step(STEP_2)? {
        Some(a) => a
            .pointer("/content/chosen_adjustment_set")
            .and_then(Value::as_array)
            .map(|v| {
                v.iter().filter_map(Value::as_str).map(str::to_string).collect()
            })
            .unwrap_or_else(|| cfg.data.covariates.clone()),
        None => cfg.data.covariates.clone(),
    };
    let pos = positivity_diagnostics(&d, &z, cfg.tau()).step(STEP_4)?;

    let content = json!({
        "schema": schema,
        "adjustment_set": z,
        "missingness": miss,
        "positivity": pos,
    });
    let path =
        store.write("diagnose", "diagnose", &[config_input, data_input], content).step(STEP_2)?;

    let outcome_missing = miss
        .per_column
        .iter()
        .find(|c| c.column == schema.outcome)
        .map_or(0, |c| c.missing);
    let crosstab = match &miss.crosstab {
        Some(ct) => format!(
            "censored {} (outcome missing {}), uncensored {} (outcome missing {})",
            ct.censored_observed + ct.censored_missing,
            ct.censored_missing,
            ct.uncensored_observed + ct.uncensored_missing,
            ct.uncensored_missing,
        ),
        None => "no censoring column".to_string(),
    };
    let flagged = pos
        .strata
        .as_ref()
        .map_or_else(|| "strata not enumerated".to_string(), |s| {
            format!("{}/{} strata flagged", s.iter().filter(|r| r.flagged).count(), s.len())
        });
    Ok(format!(
        "{STEP_2}: n = {} rows; outcome missing in {} row(s); {}; {} row(s) \
         inconsistent with censoring-only missingness.\n{STEP_4}: positivity over \
         {:?} at τ = {} — propensity range [{:.3}, {:.3}], {}.\n  artifact: {}\n",
        d.n(),
        outcome_missing,
        crosstab,
        miss.inconsistent_rows.len(),
        pos.covariates,
        pos.tau,
        pos.propensity_min,
        pos.propensity_max,
        flagged,
        path.display(),
    ))
}

// ── Step 5 ───────────────────────────────────────────────────────────

fn contrast_label(c: Contrast) -> &'static str {
    match c {
        Contrast::RiskDifference => "risk difference",
        Contrast::RiskRatio => "risk ratio",
    }
}

fn cmd_estimate(config: &Path, data: &Path, out: &Path, seed: u64) -> CmdResult {
    let store = ArtifactStore::new(out).step(STEP_5)?;
    let identify = store.require("identify", "Step 3").step(STEP_5)?;
    let config_input = store.input("study_config", config).step(STEP_5)?;
    let data_input = store.input("data", data).step(STEP_5)?;

    // Pre-specification: the config driving the estimate must be the one
    // identification saw, byte for byte.
    if let Some(recorded) = identify.pointer("/inputs/study_config/sha256").and_then(Value::as_str)
    {
        if recorded != config_input.sha256 {
            return Err(EngineError::PreSpecification {
                message: format!(
                    "study config changed after identification (recorded hash {recorded}, \
                     current {}); rerun identify with the final analysis plan",
                    config_input.sha256
                ),
            })
            .step(STEP_5);
        }
    }
    let status = field(&identify, "/content/result/status").step(STEP_5)?;
    if status != "identified" {
        return Err(EngineError::PreSpecification {
            message: "Step 3 (identification) did not identify the estimand; estimation is \
                      blocked until the causal model supports it"
                .to_string(),
        })
        .step(STEP_5);
    }
    let se: StatisticalEstimand =
        serde_json::from_value(field(&identify, "/content/statistical_estimand").step(STEP_5)?.clone())
            .map_err(|e| EngineError::ConfigInvalid {
                message: format!("identify artifact holds no usable statistical estimand: {e}"),
            })
            .step(STEP_5)?;

    let cfg = StudyConfig::load(config).step(STEP_5)?;
    let d = Dataset::load(data, &cfg.schema()).step(STEP_5)?;
    let method = cfg.method().step(STEP_5)?;
    let sl = cfg.super_learner(seed).step(STEP_5)?;
    let opts = cfg.estimate_options().step(STEP_5)?;
    let er = estimate_with_options(&d, &se, method, &sl, &opts).step(STEP_5)?;

    let content = json!({
        "method": method.name(),
        "super_learner": sl,
        "options": opts,
        "statistical_estimand": se,
        "result": er,
    });
    let path =
        store.write("estimate", "estimate", &[config_input, data_input], content).step(STEP_5)?;

    Ok(format!(
        "{STEP_5}: {} {} = {:.4} (95% CI {:.4}, {:.4}); arm risks {:.4} / {:.4}; \
         n = {}.\n  artifact: {}\n",
        er.estimator,
        contrast_label(er.scale),
        er.point,
        er.ci95.0,
        er.ci95.1,
        er.arm_risks.0,
        er.arm_risks.1,
        d.n(),
        path.display(),
    ))
}

// ── Step 6 ───────────────────────────────────────────────────────────

fn cmd_sensitivity(config: &Path, data: &Path, out: &Path) -> CmdResult {
    let store = ArtifactStore::new(out).step(STEP_6)?;
    let estimate = store.require("estimate", "Step 5").step(STEP_6)?;
    let config_input = store.input("study_config", config).step(STEP_6)?;
    let data_input = store.input("data", data).step(STEP_6)?;

    // Sensitivity parameters are pre-specified: the config file may not
    // be newer than the estimate it attaches to, nor differ from the one
    // the estimate recorded.
    let estimated_at = field(&estimate, "/metadata/generated_at")
        .step(STEP_6)?
        .as_u64()
        .unwrap_or(0);
    let config_mtime = mtime_seconds(config).step(STEP_6)?;
    if config_mtime > estimated_at {
        return Err(EngineError::PreSpecification {
            message: format!(
                "sensitivity parameters must be pre-specified, but the study config was \
                 modified at t={config_mtime}, after the estimate at t={estimated_at}; \
                 rerun estimate with the final plan"
            ),
        })
        .step(STEP_6);
    }
    if let Some(recorded) = estimate.pointer("/inputs/study_config/sha256").and_then(Value::as_str)
    {
        if recorded != config_input.sha256 {
            return Err(EngineError::PreSpecification {
                message: "study config differs from the one the estimate recorded; rerun \
                          estimate with the final plan"
                    .to_string(),
            })
            .step(STEP_6);
        }
    }

    let er: EstimateResult =
        serde_json::from_value(field(&estimate, "/content/result").step(STEP_6)?.clone())
            .map_err(|e| EngineError::ConfigInvalid {
                message: format!("estimate artifact result does not deserialize: {e}"),
            })
            .step(STEP_6)?;
    let se: StatisticalEstimand =
        serde_json::from_value(field(&estimate, "/content/statistical_estimand").step(STEP_6)?.clone())
            .map_err(|e| EngineError::ConfigInvalid {
                message: format!("estimate artifact estimand does not deserialize: {e}"),
            })
            .step(STEP_6)?;

    let cfg = StudyConfig::load(config).step(STEP_6)?;
    let gap = cfg.gap_bounds().step(STEP_6)?;
    let nc_columns = cfg.negative_controls().to_vec();
    let ncs = if nc_columns.is_empty() {
        Vec::new()
    } else {
        let d = Dataset::load(data, &cfg.schema()).step(STEP_6)?;
        let method = cfg.method().step(STEP_6)?;
        let seed = estimate
            .pointer("/content/super_learner/seed")
            .and_then(Value::as_u64)
            .unwrap_or(0);
        let sl = cfg.super_learner(seed).step(STEP_6)?;
        negative_control_check(&d, &se, &nc_columns, method, &sl).step(STEP_6)?
    };
    let sr = sensitivity_report(&er, gap.as_ref(), ncs).step(STEP_6)?;

    let content = json!({ "gap": gap, "report": sr });
    let path = store
        .write("sensitivity", "sensitivity", &[config_input, data_input], content)
        .step(STEP_6)?;

    let shifted = match sr.shifted_ci {
        Some((lo, hi)) => format!("gap-shifted 95% CI ({lo:.4}, {hi:.4})"),
        None => "no gap-shifted interval".to_string(),
    };
    let mut lines = format!(
        "{STEP_6}: {shifted}; E-value {:.3} (CI limit {:.3}).\n",
        sr.e_value, sr.e_value_ci,
    );
    for nc in &sr.negative_controls {
        lines.push_str(&format!(
            "  negative control `{}`: {:.4} (95% CI {:.4}, {:.4}) — {}\n",
            nc.column,
            nc.estimate.point,
            nc.estimate.ci95.0,
            nc.estimate.ci95.1,
            if nc.null_excluded { "NULL EXCLUDED, bias suspected" } else { "consistent with null" },
        ));
    }
    lines.push_str(&format!("  verdict: {}\n  artifact: {}\n", sr.verdict, path.display()));
    Ok(lines)
}

// ── Step 7 ───────────────────────────────────────────────────────────

/// A design–estimator row of the comparison table, ranked by worst-case
/// type I error, then power at the least-shifted cell, then size.
#[derive(serde::Serialize)]
struct RankEntry {
    design: String,
    estimator: String,
    valid: bool,
    worst_case_type_i: f64,
    worst_case_delta: Option<f64>,
    power: f64,
    mean_total_n: f64,
}

fn rank_designs(rep: &SimulationReport) -> Vec<RankEntry> {
    let mut entries: Vec<RankEntry> = rep
        .summaries
        .iter()
        .map(|s| {
            let cells: Vec<_> = rep
                .cells
                .iter()
                .filter(|c| c.design == s.design && c.estimator == s.estimator)
                .collect();
            let reference = cells
                .iter()
                .min_by(|a, b| {
                    let da = a.delta.unwrap_or(0.0).abs();
                    let db = b.delta.unwrap_or(0.0).abs();
                    da.total_cmp(&db)
                })
                .copied();
            RankEntry {
                design: s.design.clone(),
                estimator: s.estimator.clone(),
                valid: cells.iter().all(|c| c.valid),
                worst_case_type_i: s.worst_case_type_i,
                worst_case_delta: s.worst_case_delta,
                power: reference.map_or(f64::NAN, |c| c.power()),
                mean_total_n: s.mean_total_n,
            }
        })
        .collect();
    entries.sort_by(|a, b| {
        b.valid
            .cmp(&a.valid)
            .then(a.worst_case_type_i.total_cmp(&b.worst_case_type_i))
            .then(b.power.total_cmp(&a.power))
            .then(a.mean_total_n.total_cmp(&b.mean_total_n))
            .then(a.design.cmp(&b.design))
            .then(a.estimator.cmp(&b.estimator))
    });
    entries
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    dgp_null: &Path,
    dgp_alt: &Path,
    designs: &Path,
    reps: usize,
    seed: u64,
    out: &Path,
    compare: bool,
) -> CmdResult {
    let store = ArtifactStore::new(out).step(STEP_7)?;
    let null_input = store.input("dgp_null", dgp_null).step(STEP_7)?;
    let alt_input = store.input("dgp_alt", dgp_alt).step(STEP_7)?;
    let designs_input = store.input("designs", designs).step(STEP_7)?;

    let null = parse_dgp(&read_text(dgp_null).step(STEP_7)?).step(STEP_7)?;
    let alt = parse_dgp(&read_text(dgp_alt).step(STEP_7)?).step(STEP_7)?;
    let design_specs = config::load_designs(designs).step(STEP_7)?;
    let rep = evaluate(&null, &alt, &design_specs, reps, seed).step(STEP_7)?;

    let inputs = [null_input, alt_input, designs_input];
    if compare {
        let ranking = rank_designs(&rep);
        let content = json!({
            "master_seed": seed,
            "replications": reps,
            "summaries": rep.summaries,
            "ranking": ranking,
        });
        let path =
            store.write("compare_designs", "compare-designs", &inputs, content).step(STEP_7)?;
        let mut text = format!(
            "{STEP_7}: {} design–estimator pairs ranked over {} replications \
             (worst-case type I error, then power, then size):\n",
            ranking.len(),
            reps
        );
        for (i, r) in ranking.iter().enumerate() {
            text.push_str(&format!(
                "  {}. {} / {} — worst-case α̂ = {:.4}{}, power {:.3}, n = {:.0}{}\n",
                i + 1,
                r.design,
                r.estimator,
                r.worst_case_type_i,
                r.worst_case_delta
                    .map_or(String::new(), |d| format!(" (at Δ = {d})")),
                r.power,
                r.mean_total_n,
                if r.valid { "" } else { " [INVALID: too many failed replications]" },
            ));
        }
        text.push_str(&format!("  artifact: {}\n", path.display()));
        Ok(text)
    } else {
        let markdown = rep.to_markdown();
        let content = json!({
            "master_seed": seed,
            "replications": reps,
            "report": rep,
        });
        let path = store.write("simulate", "simulate", &inputs, content).step(STEP_7)?;
        let md_path = out.join("simulate.md");
        std::fs::write(&md_path, &markdown)
            .map_err(|e| EngineError::Io { path: md_path.display().to_string(), source: e })
            .step(STEP_7)?;
        Ok(format!(
            "{STEP_7}: {} cells over {} replications (master seed {}).\n\n{}\n  \
             artifact: {}\n  table: {}\n",
            rep.cells.len(),
            reps,
            seed,
            markdown,
            path.display(),
            md_path.display(),
        ))
    }
}

// ── Report ───────────────────────────────────────────────────────────

fn cmd_report(config: Option<&Path>, out: &Path) -> CmdResult {
    let store = ArtifactStore::new(out).step(STEP_REPORT)?;
    let attestations = match config {
        Some(path) => {
            let cfg = StudyConfig::load(path).step(STEP_REPORT)?;
            // The attestations ride in the study config, so the config
            // must be the pre-specified one the recorded steps used.
            let current = artifacts::sha256_file(path).step(STEP_REPORT)?;
            for name in ["identify", "diagnose", "estimate", "sensitivity"] {
                if let Some(a) = store.read(name).step(STEP_REPORT)? {
                    if let Some(recorded) =
                        a.pointer("/inputs/study_config/sha256").and_then(Value::as_str)
                    {
                        if recorded != current {
                            return Err(EngineError::PreSpecification {
                                message: format!(
                                    "study config differs from the one `{name}` recorded; \
                                     the report must cite the pre-specified plan"
                                ),
                            })
                            .step(STEP_REPORT);
                        }
                    }
                }
            }
            cfg.attestations
        }
        None => Default::default(),
    };

    let rep = report::assemble(&store, &attestations).step(STEP_REPORT)?;
    let path = out.join("study_report.json");
    let text = serde_json::to_string_pretty(&rep).expect("report serializes") + "\n";
    std::fs::write(&path, text)
        .map_err(|e| EngineError::Io { path: path.display().to_string(), source: e })
        .step(STEP_REPORT)?;

    Ok(format!("{}  wrote {}\n", report::summarize(&rep), path.display()))
}
