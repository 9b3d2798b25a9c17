//! Acceptance criteria for the engine, one test per criterion, each
//! printing a single `ACCEPTANCE n: PASS/FAIL — detail` line.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the
//! lines. Criteria 4–7 share one simulation study (three designs, both
//! worlds, M = 1000 replications) behind a `OnceLock`, so the suite pays
//! for it once. Criterion 10 (byte-identical reports) lives with the
//! command-line crate, which owns the report writer.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::Rng;

use roadmap_engine::data::{Dataset, DatasetSchema};
use roadmap_engine::estimand::{CausalEstimand, Contrast, StatisticalEstimand};
use roadmap_engine::estimate::{estimate, EstimateResult, Method, NuisanceDiagnostics};
use roadmap_engine::graph::{d_separated, CausalGraph, Node, Role};
use roadmap_engine::learn::{LearnerSpec, SuperLearnerSpec};
use roadmap_engine::seeding::stream;
use roadmap_engine::sensitivity::{e_value, negative_control_check};
use roadmap_engine::sim::{
    evaluate, parse_dgp, simulate_dataset, true_estimand, DesignKind, DesignSpec,
    SimulationReport, DEFAULT_DELTA_GRID,
};

/// Print the per-criterion verdict line, then enforce it.
fn check(criterion: u32, ok: bool, detail: &str) {
    println!("ACCEPTANCE {criterion}: {} — {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "acceptance criterion {criterion} failed: {detail}");
}

// ── Shared worlds ────────────────────────────────────────────────────
//
// The alternative world is the three-node benchmark whose effect the
// enumeration oracle pins at 0.5·(expit(0) − expit(−1)) +
// 0.5·(expit(1) − expit(0)) = 0.2310585786300049; the null world removes
// the treatment term and nothing else.

const ALT_DGP: &str = "\
W ~ Bernoulli(0.5) role=covariate;
A ~ Bernoulli(expit(-0.4 + 0.8*W)) role=treatment;
Y ~ Bernoulli(expit(-1 + 1.0*A + 1.0*W)) role=outcome;
";

const NULL_DGP: &str = "\
W ~ Bernoulli(0.5) role=covariate;
A ~ Bernoulli(expit(-0.4 + 0.8*W)) role=treatment;
Y ~ Bernoulli(expit(-1 + 1.0*W)) role=outcome;
";

const TRUE_PSI_ALT: f64 = 0.2310585786300049;

const MASTER_SEED: u64 = 7;
const REPLICATIONS: usize = 1000;

fn designs() -> Vec<DesignSpec> {
    vec![
        DesignSpec::new("rct", DesignKind::Rct { n: 1000 }, vec![Method::Tmle]),
        DesignSpec::new(
            "observational",
            DesignKind::Observational { n: 1000 },
            vec![Method::Unadjusted, Method::Tmle],
        ),
        DesignSpec::new(
            "hybrid",
            DesignKind::Hybrid {
                n_rct: 250,
                n_external: 250,
                deltas: DEFAULT_DELTA_GRID.to_vec(),
            },
            vec![Method::Tmle],
        ),
    ]
}

static SIM: OnceLock<SimulationReport> = OnceLock::new();

fn sim() -> &'static SimulationReport {
    SIM.get_or_init(|| {
        let null = parse_dgp(NULL_DGP).expect("null world parses");
        let alt = parse_dgp(ALT_DGP).expect("alternative world parses");
        evaluate(&null, &alt, &designs(), REPLICATIONS, MASTER_SEED).expect("simulation runs")
    })
}

fn saturated_library(seed: u64) -> SuperLearnerSpec {
    SuperLearnerSpec {
        library: vec![LearnerSpec::StratifiedHistogram { bins: 5 }],
        folds: Some(2),
        seed,
    }
}

fn w_adjusted_estimand(censoring: Option<&str>) -> StatisticalEstimand {
    let cond = match censoring {
        Some(_) => "C=0, ",
        None => "",
    };
    StatisticalEstimand {
        adjustment_set: vec!["W".to_string()],
        treatment: "A".to_string(),
        outcome: "Y".to_string(),
        censoring: censoring.map(str::to_string),
        arm_mean_treated: format!("E(Y | {cond}A=1, W)"),
        arm_mean_control: format!("E(Y | {cond}A=0, W)"),
        expression: format!("E_{{W}}( E(Y | {cond}A=1, W) - E(Y | {cond}A=0, W) )"),
        contrast: Contrast::RiskDifference,
    }
}

// ── Criterion 1: saturated equivalence on the worked dataset ─────────

const WORKED_CSV: &str = "\
W,A,C,Y
0,0,0,0
0,0,0,0
0,1,0,1
0,1,0,0
1,0,0,1
1,0,0,0
1,1,0,1
1,1,0,1
";

#[test]
fn criterion_1_saturated_equivalence_oracle() {
    let t0 = Instant::now();
    let schema = DatasetSchema {
        treatment: "A".to_string(),
        outcome: "Y".to_string(),
        censoring: Some("C".to_string()),
        covariates: vec!["W".to_string()],
    };
    let d = Dataset::from_csv_str(WORKED_CSV, &schema).unwrap();
    let se = w_adjusted_estimand(Some("C"));
    let sl = saturated_library(1);

    // Stratified-means oracle, straight off the eight rows: equal-weight
    // strata, arm means (0.5 − 0) and (1 − 0.5).
    let y = d.outcome_values().unwrap();
    let a = d.treatment_values().unwrap();
    let w = d.numeric_column("W").unwrap();
    let mut oracle = 0.0;
    for stratum in [0.0, 1.0] {
        let arm_mean = |arm: f64| {
            let rows: Vec<usize> = (0..d.n())
                .filter(|&i| w[i] == stratum && a[i] == arm)
                .collect();
            rows.iter().map(|&i| y[i].unwrap()).sum::<f64>() / rows.len() as f64
        };
        oracle += 0.5 * (arm_mean(1.0) - arm_mean(0.0));
    }

    let mut points = vec![("oracle".to_string(), oracle)];
    for method in [Method::Gcomp, Method::Ipw, Method::Tmle] {
        let er = estimate(&d, &se, method, &sl).unwrap();
        points.push((er.estimator.clone(), er.point));
    }
    let elapsed = t0.elapsed();
    let all_half = points.iter().all(|(_, p)| (p - 0.50).abs() <= 1e-10);
    let listed: Vec<String> =
        points.iter().map(|(n, p)| format!("{n}={p:.12}")).collect();
    check(
        1,
        all_half && elapsed < Duration::from_secs(1),
        &format!("{} all within 1e-10 of 0.50 in {elapsed:?}", listed.join(", ")),
    );
}

// ── Criterion 2: d-separation against brute-force path enumeration ───

/// Reachability closure: `desc[v][u]` is true when `u` is `v` or a
/// descendant of `v`.
fn descendant_closure(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
    let mut desc = vec![vec![false; n]; n];
    for v in 0..n {
        let mut stack = vec![v];
        while let Some(u) = stack.pop() {
            if desc[v][u] {
                continue;
            }
            desc[v][u] = true;
            stack.extend(edges.iter().filter(|&&(a, _)| a == u).map(|&(_, b)| b));
        }
    }
    desc
}

/// Brute force: does any simple path d-connect `x` and `y` given `z`?
/// A path d-connects when every interior collider is in `z` or has a
/// descendant there, and no interior non-collider is in `z`.
fn oracle_connects(
    n: usize,
    edges: &[(usize, usize)],
    desc: &[Vec<bool>],
    x: usize,
    y: usize,
    in_z: &[bool],
) -> bool {
    let mut adj: Vec<Vec<(usize, bool)>> = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push((b, true)); // traversing a→b, arrow points into b
        adj[b].push((a, false)); // traversing b→a against the arrow
    }
    let collider_open: Vec<bool> =
        (0..n).map(|v| (0..n).any(|u| desc[v][u] && in_z[u])).collect();

    fn dfs(
        u: usize,
        came_into_u: Option<bool>,
        target: usize,
        adj: &[Vec<(usize, bool)>],
        in_z: &[bool],
        collider_open: &[bool],
        visited: &mut [bool],
    ) -> bool {
        for &(w, into_w) in &adj[u] {
            if visited[w] {
                continue;
            }
            if let Some(prev_into) = came_into_u {
                // The edge to `w` leaves `u`; it points into `u` exactly
                // when it is not pointing into `w`.
                let collider = prev_into && !into_w;
                let open = if collider { collider_open[u] } else { !in_z[u] };
                if !open {
                    continue;
                }
            }
            if w == target {
                return true;
            }
            visited[w] = true;
            if dfs(w, Some(into_w), target, adj, in_z, collider_open, visited) {
                return true;
            }
            visited[w] = false;
        }
        false
    }

    let mut visited = vec![false; n];
    visited[x] = true;
    dfs(x, None, y, &adj, in_z, &collider_open, &mut visited)
}

#[test]
fn criterion_2_dsep_matches_brute_force_oracle() {
    let t0 = Instant::now();
    let mut rng = stream(MASTER_SEED, &[999]);
    let mut queries = 0usize;
    let mut mismatches = 0usize;
    for dag_ix in 0..200 {
        let n: usize = rng.gen_range(3..=6);
        let mut edges: Vec<(usize, usize)> = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.gen_bool(0.4) {
                    edges.push((i, j)); // i < j keeps the graph acyclic
                }
            }
        }
        let names: Vec<String> = (0..n).map(|i| format!("n{i}")).collect();
        let nodes: Vec<Node> =
            names.iter().map(|id| Node::new(id.clone(), Role::Covariate, false)).collect();
        let edge_ids: Vec<(String, String)> =
            edges.iter().map(|&(a, b)| (names[a].clone(), names[b].clone())).collect();
        let g = CausalGraph::new(format!("random{dag_ix}"), nodes, &edge_ids).unwrap();
        let desc = descendant_closure(n, &edges);

        for x in 0..n {
            for y in (x + 1)..n {
                let others: Vec<usize> = (0..n).filter(|&k| k != x && k != y).collect();
                for mask in 0u32..(1 << others.len()) {
                    let mut in_z = vec![false; n];
                    for (bit, &k) in others.iter().enumerate() {
                        in_z[k] = mask & (1 << bit) != 0;
                    }
                    let z_ids: Vec<&str> = others
                        .iter()
                        .filter(|&&k| in_z[k])
                        .map(|&k| names[k].as_str())
                        .collect();
                    let got = d_separated(&g, &names[x], &names[y], &z_ids).unwrap().separated;
                    let want = !oracle_connects(n, &edges, &desc, x, y, &in_z);
                    queries += 1;
                    if got != want {
                        mismatches += 1;
                        eprintln!(
                            "mismatch on DAG {dag_ix} ({edges:?}): \
                             dsep({}, {}, {z_ids:?}) = {got}, oracle says {want}",
                            names[x], names[y]
                        );
                    }
                }
            }
        }
    }
    let elapsed = t0.elapsed();
    check(
        2,
        mismatches == 0 && elapsed < Duration::from_secs(30),
        &format!("{queries} queries across 200 random DAGs, {mismatches} mismatches, {elapsed:?}"),
    );
}

// ── Criterion 3: TMLE solves its score equation ──────────────────────

const CENSORED_DGP: &str = "\
W ~ Bernoulli(0.5) role=covariate;
A ~ Bernoulli(expit(-0.4 + 0.8*W)) role=treatment;
C ~ Bernoulli(expit(-2.2 + 0.5*A)) role=censoring;
Y ~ Bernoulli(expit(-1 + 1.0*A + 1.0*W)) role=outcome;
";

#[test]
fn criterion_3_tmle_score_equation() {
    let alt = parse_dgp(ALT_DGP).unwrap();
    let censored = parse_dgp(CENSORED_DGP).unwrap();
    let design =
        DesignSpec::new("battery", DesignKind::Observational { n: 500 }, vec![Method::Tmle]);

    let mut runs = 0usize;
    let mut worst_ratio: f64 = 0.0;
    for (dgp, se) in
        [(&alt, w_adjusted_estimand(None)), (&censored, w_adjusted_estimand(Some("C")))]
    {
        for rep in 0..25u64 {
            let d = simulate_dataset(dgp, &design, None, rep, 77).unwrap();
            let er = estimate(&d, &se, Method::Tmle, &saturated_library(rep)).unwrap();
            let mean_ic = er.diagnostics.mean_ic.expect("tmle reports its mean IC");
            let sd_ic = er.se * (d.n() as f64).sqrt();
            let bound = 1e-8 * sd_ic + 1e-12;
            worst_ratio = worst_ratio.max(mean_ic.abs() / bound);
            runs += 1;
        }
    }
    check(
        3,
        worst_ratio <= 1.0,
        &format!(
            "{runs} tmle runs (with and without censoring); \
             max |mean IC| at {worst_ratio:.3e}× the 1e-8·sd(IC) + 1e-12 tolerance"
        ),
    );
}

// ── Criteria 4–7: one simulation study, four readings ────────────────

#[test]
fn criterion_4_rct_tmle_coverage() {
    let t0 = Instant::now();
    let alt = parse_dgp(ALT_DGP).unwrap();
    let ce = CausalEstimand::new("simulated trial", "Y", "event", Contrast::RiskDifference);
    let truth = true_estimand(&alt, &ce).unwrap();
    let cell = sim().cell("rct", None, Method::Tmle).expect("rct cell exists");
    let coverage = cell.alt.coverage;
    let ok = (truth - TRUE_PSI_ALT).abs() <= 1e-12
        && (cell.alt.truth - TRUE_PSI_ALT).abs() <= 1e-12
        && (0.92..=0.97).contains(&coverage);
    check(
        4,
        ok,
        &format!(
            "true ψ* = {truth:.16} (oracle), rct/tmle coverage {coverage:.3} \
             ± {:.3} over {REPLICATIONS} replications (study took {:?})",
            cell.alt.coverage_mc_se,
            t0.elapsed()
        ),
    );
}

#[test]
fn criterion_5_rct_tmle_type_i_error() {
    let cell = sim().cell("rct", None, Method::Tmle).expect("rct cell exists");
    let rate = cell.null.rejection_rate;
    check(
        5,
        (0.035..=0.065).contains(&rate),
        &format!(
            "rct/tmle null rejection rate {rate:.3} ± {:.3} over {REPLICATIONS} replications",
            cell.null.rejection_mc_se
        ),
    );
}

#[test]
fn criterion_6_confounding_detected_and_removed() {
    let unadj = sim().cell("observational", None, Method::Unadjusted).unwrap();
    let tmle = sim().cell("observational", None, Method::Tmle).unwrap();
    let unadj_ok = unadj.alt.bias.abs() > 3.0 * unadj.alt.bias_mc_se;
    let tmle_ok = tmle.alt.bias.abs() <= 3.0 * tmle.alt.bias_mc_se;
    check(
        6,
        unadj_ok && tmle_ok,
        &format!(
            "observational alt world: unadjusted bias {:+.4} (|bias|/mc-se = {:.1}), \
             tmle bias {:+.4} (|bias|/mc-se = {:.1})",
            unadj.alt.bias,
            unadj.alt.bias.abs() / unadj.alt.bias_mc_se,
            tmle.alt.bias,
            tmle.alt.bias.abs() / tmle.alt.bias_mc_se,
        ),
    );
}

/// Regression constant frozen from the first verified run of this exact
/// study (master seed 7, M = 1000): 870 of 1000 null-world replications
/// rejected at Δ = 1.0. Any drift means generation, nuisance fitting, or
/// inference changed behavior.
const HYBRID_WORST_CASE_TYPE_I: f64 = 0.87;

#[test]
fn criterion_7_hybrid_worst_case_type_i_error() {
    let cells: Vec<_> = DEFAULT_DELTA_GRID
        .iter()
        .map(|&d| sim().cell("hybrid", Some(d), Method::Tmle).expect("hybrid cell exists"))
        .collect();
    let rates: Vec<f64> = cells.iter().map(|c| c.null.rejection_rate).collect();
    let nondecreasing = rates.windows(2).all(|w| w[1] >= w[0]);

    let last = cells.last().unwrap();
    let inflated =
        last.null.rejection_rate > 0.05 + 3.0 * last.null.rejection_mc_se;

    let summary = sim()
        .summaries
        .iter()
        .find(|s| s.design == "hybrid" && s.estimator == Method::Tmle.name())
        .expect("hybrid summary exists");
    let worst_at_one = summary.worst_case_delta == Some(1.0);
    let frozen = (summary.worst_case_type_i - HYBRID_WORST_CASE_TYPE_I).abs() <= 1e-12;

    check(
        7,
        nondecreasing && inflated && worst_at_one && frozen,
        &format!(
            "type I error over Δ ∈ {DEFAULT_DELTA_GRID:?}: {rates:?} (nondecreasing: \
             {nondecreasing}); worst case {:.4} at Δ = {:?} (frozen regression value \
             {HYBRID_WORST_CASE_TYPE_I})",
            summary.worst_case_type_i, summary.worst_case_delta
        ),
    );
}

// ── Criterion 8: E-value closed form ─────────────────────────────────

fn ratio_result(p1: f64, p0: f64) -> EstimateResult {
    let rr = p1 / p0;
    EstimateResult {
        estimator: "fixture".to_string(),
        point: rr,
        se: 0.1,
        ci95: (rr * 0.8, rr * 1.25),
        scale: Contrast::RiskRatio,
        arm_risks: (p1, p0),
        diagnostics: NuisanceDiagnostics {
            outcome_learner: None,
            propensity_learner: None,
            censoring_learner: None,
            fluctuation_coefficients: Vec::new(),
            mean_ic: None,
            propensity_bounds: (0.025, 0.975),
            warnings: Vec::new(),
        },
    }
}

#[test]
fn criterion_8_e_value_closed_form() {
    let (e2, _) = e_value(&ratio_result(0.5, 0.25)).unwrap();
    let (e_half, _) = e_value(&ratio_result(0.25, 0.5)).unwrap();
    let (e1, _) = e_value(&ratio_result(0.3, 0.3)).unwrap();
    let expected = 2.0 + 2f64.sqrt();
    let ok = (e2 - expected).abs() <= 1e-12
        && (e_half - e2).abs() <= 1e-12
        && (e1 - 1.0).abs() <= 1e-12;
    check(
        8,
        ok,
        &format!(
            "RR=2 → {e2:.13} (want 2+√2 = {expected:.13}); RR=½ → {e_half:.13} \
             (inversion symmetry); RR=1 → {e1}"
        ),
    );
}

// ── Criterion 9: negative-control false-positive rate ────────────────

const NC_DGP: &str = "\
W ~ Bernoulli(0.5) role=covariate;
A ~ Bernoulli(0.5) role=treatment;
N ~ Bernoulli(expit(-0.5 + 0.7*W)) role=covariate;
Y ~ Bernoulli(expit(-1 + 1.0*A + 1.0*W)) role=outcome;
";

#[test]
fn criterion_9_negative_control_false_positive_rate() {
    let dgp = parse_dgp(NC_DGP).unwrap();
    let design = DesignSpec::new("nc", DesignKind::Rct { n: 300 }, vec![Method::Tmle]);
    let se = w_adjusted_estimand(None);
    let controls = vec!["N".to_string()];

    let mut excluded = 0usize;
    let reps = 200u64;
    for rep in 0..reps {
        let d = simulate_dataset(&dgp, &design, None, rep, 15).unwrap();
        let ncs =
            negative_control_check(&d, &se, &controls, Method::Tmle, &saturated_library(rep))
                .unwrap();
        excluded += usize::from(ncs[0].null_excluded);
    }
    let rate = excluded as f64 / reps as f64;
    check(
        9,
        (0.01..=0.10).contains(&rate),
        &format!("null-excluded rate {rate:.3} over {reps} replications of a true-null control"),
    );
}
