//! Acceptance criterion 10 — byte-identical reports — plus the
//! command-line contract: exit codes and step-named error messages,
//! exercised against the real binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

use roadmap_engine::estimate::Method;
use roadmap_engine::sim::{parse_dgp, simulate_dataset, DesignKind, DesignSpec};

fn check(criterion: u32, ok: bool, detail: &str) {
    println!("ACCEPTANCE {criterion}: {} — {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "acceptance criterion {criterion} failed: {detail}");
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_roadmap-engine"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_success(out: &Output, what: &str) {
    assert!(
        out.status.success(),
        "{what} failed with status {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr),
    );
}

const GRAPH: &str = "\
graph study {
  node W role=covariate;
  node A role=treatment;
  node C role=censoring;
  node Y role=outcome;
  edge W -> A;
  edge W -> Y;
  edge A -> Y;
  edge A -> C;
}
";

const CONFIG: &str = r#"
[study]
population = "trial-eligible adults"
outcome_description = "event within 90 days"
contrast = "risk_difference"

[data]
treatment = "A"
outcome = "Y"
censoring = "C"
covariates = ["W"]

[estimator]
method = "tmle"
library = ["mean_only", "logistic_main_terms"]
folds = 5
seed = 3

[sensitivity]
gap_lo = -0.01
gap_hi = 0.01
gap_provenance = "trial-vs-target drift bound from the design analysis"

[attestations]
"2" = ["time zero is enrollment for every row"]
"#;

const DGP_ALT: &str = "\
W ~ Bernoulli(0.5) role=covariate;
A ~ Bernoulli(expit(0.0 + 0.4*W)) role=treatment;
C ~ Bernoulli(0.05) role=censoring;
Y ~ Bernoulli(expit(-0.5 + 0.9*A + 0.6*W)) role=outcome;
";

const DGP_NULL: &str = "\
W ~ Bernoulli(0.5) role=covariate;
A ~ Bernoulli(expit(0.0 + 0.4*W)) role=treatment;
C ~ Bernoulli(0.05) role=censoring;
Y ~ Bernoulli(expit(-0.5 + 0.6*W)) role=outcome;
";

const DESIGNS: &str = r#"
[[design]]
name = "rct_small"
kind = "rct"
n = 40
estimators = ["unadjusted"]
"#;

/// Lay down the same input files (same relative names, same bytes) in a
/// fresh directory.
fn write_inputs(dir: &Path) {
    std::fs::write(dir.join("graph.dg"), GRAPH).unwrap();
    std::fs::write(dir.join("study.toml"), CONFIG).unwrap();
    std::fs::write(dir.join("null.dgp"), DGP_NULL).unwrap();
    std::fs::write(dir.join("alt.dgp"), DGP_ALT).unwrap();
    std::fs::write(dir.join("designs.toml"), DESIGNS).unwrap();

    let dgp = parse_dgp(DGP_ALT).unwrap();
    let design =
        DesignSpec::new("obs", DesignKind::Observational { n: 400 }, vec![Method::Tmle]);
    let d = simulate_dataset(&dgp, &design, None, 0, 11).unwrap();
    std::fs::write(dir.join("data.csv"), d.to_csv_string()).unwrap();
}

/// Run the whole pipeline with relative paths and return the parsed
/// study report.
fn full_pipeline(dir: &Path) -> Value {
    let steps: &[&[&str]] = &[
        &["validate-dag", "--graph", "graph.dg"],
        &["identify", "--graph", "graph.dg", "--config", "study.toml"],
        &["diagnose", "--config", "study.toml", "--data", "data.csv"],
        &["estimate", "--config", "study.toml", "--data", "data.csv"],
        &["sensitivity", "--config", "study.toml", "--data", "data.csv"],
        &[
            "simulate",
            "--dgp-null",
            "null.dgp",
            "--dgp-alt",
            "alt.dgp",
            "--designs",
            "designs.toml",
            "--reps",
            "100",
            "--seed",
            "5",
        ],
        &["report", "--config", "study.toml"],
    ];
    for args in steps {
        let out = run_in(dir, args);
        assert_success(&out, args[0]);
    }
    let text = std::fs::read_to_string(dir.join("study_report.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

/// Serialize a report with its metadata block removed — the only part
/// allowed to differ between byte-identical runs.
fn without_metadata(mut report: Value) -> String {
    report.as_object_mut().unwrap().remove("metadata");
    serde_json::to_string_pretty(&report).unwrap()
}

#[test]
fn criterion_10_reports_are_byte_identical() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    write_inputs(dir_a.path());
    write_inputs(dir_b.path());

    let report_a = full_pipeline(dir_a.path());
    let report_b = full_pipeline(dir_b.path());

    let a = without_metadata(report_a.clone());
    let b = without_metadata(report_b);
    let identical = a == b;

    // Sanity on the content being compared: every pipeline section
    // completed, and the hashes cover all six input files.
    let sections = report_a["sections"].as_array().unwrap();
    let complete =
        sections.iter().filter(|s| s["status"] == "complete").count();
    let hashes = report_a["config_hashes"].as_object().unwrap();

    check(
        10,
        identical && complete == 8 && hashes.len() == 6,
        &format!(
            "two pipeline runs, {} bytes of report each, identical outside metadata: \
             {identical}; {complete}/8 sections complete, {} hashed inputs",
            a.len(),
            hashes.len()
        ),
    );
}

#[test]
fn estimate_before_identify_exits_1_and_names_step_3() {
    let dir = tempfile::tempdir().unwrap();
    write_inputs(dir.path());
    let out = run_in(dir.path(), &["estimate", "--config", "study.toml", "--data", "data.csv"]);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert_eq!(out.status.code(), Some(1), "stderr:\n{stderr}");
    assert!(stderr.contains("Step 3 missing"), "stderr:\n{stderr}");
}

#[test]
fn unidentified_graph_exits_1_citing_the_open_path() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("graph.dg"),
        "graph confounded {\n  node U latent;\n  node A role=treatment;\n  node Y role=outcome;\n  edge U -> A;\n  edge U -> Y;\n  edge A -> Y;\n}\n",
    )
    .unwrap();
    std::fs::write(
        dir.path().join("study.toml"),
        "[study]\npopulation = \"adults\"\noutcome_description = \"event\"\ncontrast = \"risk_difference\"\n\n[data]\ntreatment = \"A\"\noutcome = \"Y\"\n",
    )
    .unwrap();
    let out = run_in(dir.path(), &["identify", "--graph", "graph.dg", "--config", "study.toml"]);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert_eq!(out.status.code(), Some(1), "stderr:\n{stderr}");
    assert!(stderr.contains("Step 3"), "stderr:\n{stderr}");
    assert!(stderr.contains("open path: A <- U -> Y"), "stderr:\n{stderr}");
    // The negative verdict was still recorded for the report.
    assert!(dir.path().join("identify.json").exists());
}

#[test]
fn malformed_inputs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("graph.dg"), "graph broken { node A role=").unwrap();
    let out = run_in(dir.path(), &["validate-dag", "--graph", "graph.dg"]);
    assert_eq!(out.status.code(), Some(2));

    std::fs::write(dir.path().join("study.toml"), "[study\n").unwrap();
    std::fs::write(dir.path().join("data.csv"), "A,Y\n1,1\n").unwrap();
    let out =
        run_in(dir.path(), &["diagnose", "--config", "study.toml", "--data", "data.csv"]);
    assert_eq!(out.status.code(), Some(2));

    // Unknown flags are usage errors too (straight from the parser).
    let out = run_in(dir.path(), &["validate-dag", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn help_and_version_exit_0() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    for sub in
        ["validate-dag", "identify", "diagnose", "estimate", "sensitivity", "simulate", "compare-designs", "report"]
    {
        assert!(stdout.contains(sub), "--help must list `{sub}`:\n{stdout}");
    }
    let out = run_in(dir.path(), &["--version"]);
    assert_eq!(out.status.code(), Some(0));
}
