//! Assembly of the final study report from step artifacts.
//!
//! The report is one JSON document with a `sections` array holding the
//! Roadmap steps in canonical order (1a, 1b, 2, 3, 4, 5, 6, 7).  Each
//! section carries the producing artifact's content verbatim, so the
//! report is a pure function of the artifacts on disk: two pipelines run
//! from identical inputs produce byte-identical reports once the
//! `metadata` block (wall-clock timestamps) is set aside.
//!
//! Assembly also re-checks pre-specification across steps: an estimate
//! may only appear downstream of a successful identification, a
//! sensitivity analysis only downstream of an estimate, and any input
//! file shared between steps must carry the same hash everywhere it was
//! used.

use std::collections::BTreeMap;

use roadmap_engine::{EngineError, Result};
use serde_json::{json, Map, Value};

use crate::artifacts::{now_seconds, ArtifactStore, SCHEMA_VERSION};

/// Canonical section order; `validate_section_order` enforces it.
pub const STEP_ORDER: [&str; 8] = ["1a", "1b", "2", "3", "4", "5", "6", "7"];

/// Section titles, parallel to `STEP_ORDER`.
const STEP_TITLES: [&str; 8] = [
    "Causal model",
    "Causal estimand",
    "Observed data",
    "Identification",
    "Statistical estimand",
    "Estimation",
    "Sensitivity analysis",
    "Design benchmarking",
];

/// Artifacts read during assembly, in pipeline order.  The order matters
/// for input-hash conflict reporting: the first artifact to use a label
/// sets the expected hash.
const ARTIFACT_ORDER: [&str; 7] =
    ["validate_dag", "identify", "diagnose", "estimate", "sensitivity", "simulate", "compare_designs"];

/// Check that report sections appear in canonical Roadmap order.
///
/// The report writer always constructs them in order, so a failure here
/// means a bug, but the check is part of the report contract and runs on
/// every assembly.
pub fn validate_section_order(sections: &[Value]) -> Result<()> {
    let found: Vec<String> = sections
        .iter()
        .map(|s| s.get("step").and_then(Value::as_str).unwrap_or("?").to_string())
        .collect();
    if found.len() != STEP_ORDER.len() || found.iter().zip(STEP_ORDER.iter()).any(|(f, w)| f != w)
    {
        return Err(EngineError::SectionOrder {
            message: format!(
                "expected steps [{}], found [{}]",
                STEP_ORDER.join(", "),
                found.join(", ")
            ),
        });
    }
    Ok(())
}

/// One report section.  `content` is `null` and `status` is `"not_run"`
/// when the producing step has not been executed.
fn section(step: &str, title: &str, content: Option<Value>, attestations: &[String]) -> Value {
    json!({
        "step": step,
        "title": title,
        "status": if content.is_some() { "complete" } else { "not_run" },
        "content": content.unwrap_or(Value::Null),
        "attestations": attestations,
    })
}

/// Pull a sub-value out of an optional artifact by JSON pointer.
fn pick(artifact: Option<&Value>, pointer: &str) -> Option<Value> {
    artifact.and_then(|a| a.pointer(pointer)).cloned()
}

/// Merge the `inputs` blocks of all artifacts into one `label -> {path,
/// sha256}` map, failing when the same label was hashed differently by
/// two steps — that means a pre-specified input changed mid-pipeline.
fn collect_input_hashes(artifacts: &BTreeMap<&str, Value>) -> Result<Map<String, Value>> {
    let mut merged: Map<String, Value> = Map::new();
    let mut first_use: BTreeMap<String, &str> = BTreeMap::new();
    for name in ARTIFACT_ORDER {
        let Some(artifact) = artifacts.get(name) else { continue };
        let Some(inputs) = artifact.get("inputs").and_then(Value::as_object) else { continue };
        for (label, entry) in inputs {
            match merged.get(label) {
                None => {
                    merged.insert(label.clone(), entry.clone());
                    first_use.insert(label.clone(), name);
                }
                Some(existing) if existing.get("sha256") == entry.get("sha256") => {}
                Some(existing) => {
                    return Err(EngineError::PreSpecification {
                        message: format!(
                            "input `{label}` changed between steps: {} hashed {} but {} hashed {} — \
                             pre-specified inputs must stay fixed across the pipeline",
                            first_use[label],
                            hash_of(existing),
                            name,
                            hash_of(entry),
                        ),
                    });
                }
            }
        }
    }
    Ok(merged)
}

fn hash_of(entry: &Value) -> String {
    entry.get("sha256").and_then(Value::as_str).unwrap_or("?").to_string()
}

/// Cross-artifact pre-specification checks that do not fit a single step.
fn check_pipeline_order(artifacts: &BTreeMap<&str, Value>) -> Result<()> {
    if artifacts.contains_key("estimate") {
        let identify = artifacts.get("identify").ok_or_else(|| EngineError::PreSpecification {
            message: "Step 3 (identification) missing — an estimate artifact exists with no \
                      identification preceding it; rerun the pipeline in order"
                .to_string(),
        })?;
        let status = identify.pointer("/content/result/status").and_then(Value::as_str);
        if status != Some("identified") {
            return Err(EngineError::PreSpecification {
                message: "Step 3 (identification) did not identify the estimand, yet a Step 5 \
                          estimate artifact exists; the estimate cannot be part of this report"
                    .to_string(),
            });
        }
    }
    if artifacts.contains_key("sensitivity") && !artifacts.contains_key("estimate") {
        return Err(EngineError::PreSpecification {
            message: "Step 5 (estimation) missing — a sensitivity artifact exists without the \
                      estimate it attaches to; rerun the pipeline in order"
                .to_string(),
        });
    }
    Ok(())
}

/// Build the full study report from whatever artifacts exist in `store`.
///
/// `attestations` maps step labels ("1a" … "7") to free-text statements
/// the analyst signs off on; they are echoed into the matching sections.
pub fn assemble(
    store: &ArtifactStore,
    attestations: &BTreeMap<String, Vec<String>>,
) -> Result<Value> {
    for key in attestations.keys() {
        if !STEP_ORDER.contains(&key.as_str()) {
            return Err(EngineError::ConfigInvalid {
                message: format!(
                    "attestation key `{key}` is not a Roadmap step label; use one of {}",
                    STEP_ORDER.join(", ")
                ),
            });
        }
    }

    let mut artifacts: BTreeMap<&str, Value> = BTreeMap::new();
    for name in ARTIFACT_ORDER {
        if let Some(a) = store.read(name)? {
            artifacts.insert(name, a);
        }
    }
    check_pipeline_order(&artifacts)?;
    let config_hashes = collect_input_hashes(&artifacts)?;

    let get = |name: &str| artifacts.get(name);
    let empty: Vec<String> = Vec::new();
    let att = |step: &str| attestations.get(step).unwrap_or(&empty);

    // Section 4 joins the statistical estimand (from identify) with the
    // positivity diagnostic (from diagnose); it is complete once the
    // estimand is compiled, with positivity attached when available.
    let statistical = pick(get("identify"), "/content/statistical_estimand")
        .filter(|v| !v.is_null());
    let section4 = statistical.map(|se| {
        json!({
            "statistical_estimand": se,
            "positivity": pick(get("diagnose"), "/content/positivity").unwrap_or(Value::Null),
        })
    });

    // Section 7 prefers the full simulation; a compare-designs run is
    // reported when that is all there is.
    let (bench_source, bench) = match (get("simulate"), get("compare_designs")) {
        (Some(sim), _) => ("simulate", sim.get("content").cloned()),
        (None, Some(cmp)) => ("compare_designs", cmp.get("content").cloned()),
        (None, None) => ("simulate", None),
    };

    let sections = vec![
        section("1a", STEP_TITLES[0], pick(get("validate_dag"), "/content"), att("1a")),
        section(
            "1b",
            STEP_TITLES[1],
            pick(get("identify"), "/content/estimand").map(|e| {
                json!({
                    "estimand": e,
                    "expression": pick(get("identify"), "/content/expression")
                        .unwrap_or(Value::Null),
                })
            }),
            att("1b"),
        ),
        section(
            "2",
            STEP_TITLES[2],
            get("diagnose").map(|d| {
                json!({
                    "schema": d.pointer("/content/schema").cloned().unwrap_or(Value::Null),
                    "missingness": d.pointer("/content/missingness").cloned()
                        .unwrap_or(Value::Null),
                })
            }),
            att("2"),
        ),
        section(
            "3",
            STEP_TITLES[3],
            pick(get("identify"), "/content/result").map(|r| {
                json!({
                    "result": r,
                    "adjustment_set_index":
                        pick(get("identify"), "/content/adjustment_set_index")
                            .unwrap_or(Value::Null),
                    "chosen_adjustment_set":
                        pick(get("identify"), "/content/chosen_adjustment_set")
                            .unwrap_or(Value::Null),
                })
            }),
            att("3"),
        ),
        section("4", STEP_TITLES[4], section4, att("4")),
        section("5", STEP_TITLES[5], pick(get("estimate"), "/content"), att("5")),
        section("6", STEP_TITLES[6], pick(get("sensitivity"), "/content"), att("6")),
        section(
            "7",
            STEP_TITLES[7],
            bench.map(|b| json!({ "source_artifact": bench_source, "report": b })),
            att("7"),
        ),
    ];
    validate_section_order(&sections)?;

    // Seed provenance: the simulation's master seed when one ran, else the
    // estimator seed, else the documented default of 0.
    let master_seed = pick(get("simulate"), "/content/master_seed")
        .or_else(|| pick(get("estimate"), "/content/super_learner/seed"))
        .and_then(|v| v.as_u64())
        .unwrap_or(0);

    Ok(json!({
        "schema_version": SCHEMA_VERSION,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "master_seed": master_seed,
        "config_hashes": Value::Object(config_hashes),
        "sections": sections,
        "metadata": { "generated_at": now_seconds() },
    }))
}

/// One human-readable line per section, printed after report assembly.
pub fn summarize(report: &Value) -> String {
    let mut out = String::from("Causal Roadmap study report\n");
    let sections = report.get("sections").and_then(Value::as_array);
    for s in sections.into_iter().flatten() {
        let step = s.get("step").and_then(Value::as_str).unwrap_or("?");
        let title = s.get("title").and_then(Value::as_str).unwrap_or("?");
        let status = s.get("status").and_then(Value::as_str).unwrap_or("?");
        let detail = section_detail(step, s.get("content").unwrap_or(&Value::Null));
        out.push_str(&format!("  Step {step:<2} {title}: {status}{detail}\n"));
    }
    if let Some(seed) = report.get("master_seed").and_then(Value::as_u64) {
        out.push_str(&format!("  master seed {seed}\n"));
    }
    out
}

/// Best-effort one-phrase detail for the summary line.
fn section_detail(step: &str, content: &Value) -> String {
    if content.is_null() {
        return String::new();
    }
    let text = match step {
        "1a" => {
            let n = content.get("node_count").and_then(Value::as_u64);
            let e = content.get("edge_count").and_then(Value::as_u64);
            match (n, e) {
                (Some(n), Some(e)) => format!("{n} nodes, {e} edges"),
                _ => return String::new(),
            }
        }
        "1b" => match content.get("expression").and_then(Value::as_str) {
            Some(expr) => expr.to_string(),
            None => return String::new(),
        },
        "3" => {
            let status = content
                .pointer("/result/status")
                .and_then(Value::as_str)
                .unwrap_or("?");
            let sets = content
                .pointer("/result/adjustment_sets")
                .and_then(Value::as_array)
                .map_or(0, Vec::len);
            format!("{status}, {sets} adjustment set(s)")
        }
        "5" => {
            let est = content.pointer("/result/estimator").and_then(Value::as_str);
            let point = content.pointer("/result/point").and_then(Value::as_f64);
            match (est, point) {
                (Some(est), Some(point)) => format!("{est} point estimate {point:.4}"),
                _ => return String::new(),
            }
        }
        "6" => match content.pointer("/report/e_value").and_then(Value::as_f64) {
            Some(e) => format!("E-value {e:.3}"),
            None => return String::new(),
        },
        "7" => {
            let cells = content
                .pointer("/report/cells")
                .or_else(|| content.pointer("/report/summaries"))
                .and_then(Value::as_array)
                .map_or(0, Vec::len);
            format!("{cells} result rows")
        }
        _ => return String::new(),
    };
    format!(" — {text}")
}
