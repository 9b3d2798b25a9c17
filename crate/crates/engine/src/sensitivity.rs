//! Step 6 machinery: causal-gap interval shifting, E-values, and
//! negative-control outcome checks.
//!
//! These tools quantify how conclusions move under violations of the
//! identification assumptions. None of them alter the primary estimate;
//! they bound it (gap shifting), benchmark it (E-value), or probe the
//! design for bias the assumptions missed (negative controls).

use crate::data::Dataset;
use crate::error::{EngineError, Result};
use crate::estimand::{Contrast, StatisticalEstimand};
use crate::estimate::{estimate, EstimateResult, Method};
use crate::learn::SuperLearnerSpec;

/// User-supplied bounds on the causal gap Ψ − ψ*, on the risk-difference
/// scale, with a free-text justification. Pre-specification (the bounds
/// must precede estimation) is enforced by the CLI workflow, not here.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GapBounds {
    pub lo: f64,
    pub hi: f64,
    pub provenance: String,
}

impl GapBounds {
    pub fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite()) || self.lo > self.hi {
            return Err(EngineError::InvalidGap { lo: self.lo, hi: self.hi });
        }
        Ok(())
    }
}

/// Shift a risk-difference confidence interval by the causal-gap bounds:
/// ψ* = Ψ − gap, so the interval for ψ* is (ci.lo − gap.hi, ci.hi − gap.lo).
pub fn shifted_interval(er: &EstimateResult, gb: &GapBounds) -> Result<(f64, f64)> {
    gb.validate()?;
    if er.scale != Contrast::RiskDifference {
        return Err(EngineError::ScaleMismatch { got: er.scale.as_str().to_string() });
    }
    Ok((er.ci95.0 - gb.hi, er.ci95.1 - gb.lo))
}

/// E-value for a risk ratio at or above 1.
fn e_from_rr(rr: f64) -> f64 {
    let r = if rr >= 1.0 { rr } else { 1.0 / rr };
    r + (r * (r - 1.0)).sqrt()
}

/// E-value of the point estimate and of the confidence limit closer to
/// the null. The ratio is always re-derived from the reported arm risks;
/// for a difference-scale estimate the CI limits are converted onto the
/// ratio scale around the fixed control risk — an approximation the
/// sensitivity report notes explicitly.
pub fn e_value(er: &EstimateResult) -> Result<(f64, f64)> {
    let (p1, p0) = er.arm_risks;
    if p1 <= 0.0 || p0 <= 0.0 {
        return Err(EngineError::NonPositiveArmRisk { treated: p1, control: p0 });
    }
    let point = e_from_rr(p1 / p0);

    let (rr_lo, rr_hi) = match er.scale {
        Contrast::RiskRatio => er.ci95,
        Contrast::RiskDifference => (1.0 + er.ci95.0 / p0, 1.0 + er.ci95.1 / p0),
    };
    let ci = if rr_lo <= 1.0 && 1.0 <= rr_hi {
        1.0
    } else {
        // The limit closer to the null; a nonpositive converted limit
        // means the interval escapes the probability scale entirely, so
        // no finite confounding strength reaches it.
        let limit = if rr_lo > 1.0 { rr_lo } else { rr_hi };
        if limit <= 0.0 {
            f64::INFINITY
        } else {
            e_from_rr(limit)
        }
    };
    Ok((point, ci))
}

/// Outcome of rerunning the estimator against one negative-control column.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NegativeControlResult {
    pub column: String,
    pub estimate: EstimateResult,
    /// True when the 95% CI (difference scale) excludes 0 — evidence of
    /// bias, since the control outcome is unaffected by treatment.
    pub null_excluded: bool,
}

/// Rerun the chosen estimator with the outcome swapped to each
/// negative-control column. Always runs on the difference scale so
/// "null excluded" means 0 outside the interval.
pub fn negative_control_check(
    d: &Dataset,
    se: &StatisticalEstimand,
    columns: &[String],
    method: Method,
    sl: &SuperLearnerSpec,
) -> Result<Vec<NegativeControlResult>> {
    let mut out = Vec::with_capacity(columns.len());
    for column in columns {
        let swapped = d.with_outcome_column(column)?;
        let mut nc_se = se.clone();
        nc_se.outcome = column.clone();
        nc_se.contrast = Contrast::RiskDifference;
        let er = estimate(&swapped, &nc_se, method, sl)?;
        let null_excluded = !(er.ci95.0 <= 0.0 && 0.0 <= er.ci95.1);
        out.push(NegativeControlResult { column: column.clone(), estimate: er, null_excluded });
    }
    Ok(out)
}

/// Assembled Step 6 output for the study report.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SensitivityReport {
    /// CI for ψ* after gap shifting; `None` without gap bounds or on the
    /// ratio scale (shifting is defined for differences only).
    pub shifted_ci: Option<(f64, f64)>,
    pub e_value: f64,
    /// E-value of the CI limit closer to the null (1 when the CI spans it).
    pub e_value_ci: f64,
    pub negative_controls: Vec<NegativeControlResult>,
    /// Caveats attached to the numbers above.
    pub notes: Vec<String>,
    pub verdict: String,
}

/// Compose the sensitivity section from its parts. `gap` may be absent;
/// negative-control results come from [`negative_control_check`].
pub fn sensitivity_report(
    er: &EstimateResult,
    gap: Option<&GapBounds>,
    negative_controls: Vec<NegativeControlResult>,
) -> Result<SensitivityReport> {
    let mut notes = Vec::new();
    let shifted_ci = match gap {
        None => None,
        Some(gb) => {
            if er.scale == Contrast::RiskDifference {
                Some(shifted_interval(er, gb)?)
            } else {
                notes.push(
                    "causal-gap shifting is defined on the difference scale only; skipped for this ratio-scale estimate"
                        .to_string(),
                );
                gb.validate()?;
                None
            }
        }
    };
    let (e_point, e_ci) = e_value(er)?;
    if er.scale == Contrast::RiskDifference {
        notes.push(
            "E-value derived from the arm-risk ratio; CI limit converted around the fixed control risk (approximation)"
                .to_string(),
        );
    }

    let mut pieces = Vec::new();
    match shifted_ci {
        Some((lo, hi)) => {
            let zero = if lo <= 0.0 && 0.0 <= hi { "includes" } else { "excludes" };
            pieces.push(format!("shifted 95% CI [{lo:.3}, {hi:.3}] {zero} 0"));
        }
        None => pieces.push("no causal-gap shift applied".to_string()),
    }
    pieces.push(format!("E-value {e_point:.3} (CI limit {e_ci:.3})"));
    if negative_controls.is_empty() {
        pieces.push("no negative controls supplied".to_string());
    } else {
        let k = negative_controls.iter().filter(|r| r.null_excluded).count();
        pieces.push(format!(
            "negative controls: {k} of {} exclude the null",
            negative_controls.len(),
        ));
    }

    Ok(SensitivityReport {
        shifted_ci,
        e_value: e_point,
        e_value_ci: e_ci,
        negative_controls,
        notes,
        verdict: pieces.join("; "),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DatasetSchema;
    use crate::estimate::NuisanceDiagnostics;
    use crate::learn::LearnerSpec;
    use crate::seeding::stream;
    use rand::Rng;

    fn mk_result(scale: Contrast, point: f64, ci: (f64, f64), risks: (f64, f64)) -> EstimateResult {
        EstimateResult {
            estimator: "tmle".into(),
            point,
            se: 0.0,
            ci95: ci,
            scale,
            arm_risks: risks,
            diagnostics: NuisanceDiagnostics {
                outcome_learner: None,
                propensity_learner: None,
                censoring_learner: None,
                fluctuation_coefficients: vec![],
                mean_ic: None,
                propensity_bounds: (0.025, 0.975),
                warnings: vec![],
            },
        }
    }

    fn gap(lo: f64, hi: f64) -> GapBounds {
        GapBounds { lo, hi, provenance: "test".into() }
    }

    #[test]
    fn zero_gap_leaves_the_interval_unchanged() {
        let er = mk_result(Contrast::RiskDifference, 0.06, (0.02, 0.10), (0.3, 0.24));
        assert_eq!(shifted_interval(&er, &gap(0.0, 0.0)).unwrap(), (0.02, 0.10));
    }

    #[test]
    fn asymmetric_gap_widens_in_both_directions() {
        let er = mk_result(Contrast::RiskDifference, 0.06, (0.02, 0.10), (0.3, 0.24));
        let (lo, hi) = shifted_interval(&er, &gap(-0.01, 0.03)).unwrap();
        assert!((lo - -0.01).abs() < 1e-15);
        assert!((hi - 0.11).abs() < 1e-15);
    }

    #[test]
    fn degenerate_gap_is_a_pure_shift() {
        let er = mk_result(Contrast::RiskDifference, 0.06, (0.02, 0.10), (0.3, 0.24));
        let (lo, hi) = shifted_interval(&er, &gap(0.04, 0.04)).unwrap();
        assert!((lo - -0.02).abs() < 1e-15);
        assert!((hi - 0.06).abs() < 1e-15);
    }

    #[test]
    fn shifted_width_grows_by_exactly_the_gap_width() {
        let mut rng = stream(3, &[0]);
        for _ in 0..50 {
            let lo_ci = rng.gen::<f64>() - 0.5;
            let wid = rng.gen::<f64>();
            let g_lo = rng.gen::<f64>() - 0.5;
            let g_wid = rng.gen::<f64>();
            let er = mk_result(
                Contrast::RiskDifference,
                lo_ci + wid / 2.0,
                (lo_ci, lo_ci + wid),
                (0.3, 0.2),
            );
            let g = gap(g_lo, g_lo + g_wid);
            let (slo, shi) = shifted_interval(&er, &g).unwrap();
            assert!((shi - slo - (wid + g_wid)).abs() < 1e-12);
            // With 0 inside the gap, the shifted interval must contain
            // the original one.
            if g.lo <= 0.0 && 0.0 <= g.hi {
                assert!(slo <= lo_ci && lo_ci + wid <= shi);
            }
        }
    }

    #[test]
    fn ratio_scale_estimates_cannot_be_gap_shifted() {
        let er = mk_result(Contrast::RiskRatio, 1.5, (1.1, 2.0), (0.3, 0.2));
        let err = shifted_interval(&er, &gap(0.0, 0.0)).unwrap_err();
        assert!(matches!(err, EngineError::ScaleMismatch { .. }));
    }

    #[test]
    fn inverted_gap_bounds_are_rejected() {
        let er = mk_result(Contrast::RiskDifference, 0.06, (0.02, 0.10), (0.3, 0.24));
        let err = shifted_interval(&er, &gap(0.05, -0.05)).unwrap_err();
        assert!(matches!(err, EngineError::InvalidGap { .. }));
    }

    #[test]
    fn null_risk_ratio_has_e_value_one() {
        let er = mk_result(Contrast::RiskRatio, 1.0, (0.8, 1.25), (0.2, 0.2));
        let (e, e_ci) = e_value(&er).unwrap();
        assert_eq!(e, 1.0);
        assert_eq!(e_ci, 1.0, "CI crossing the null pins the CI E-value at 1");
    }

    #[test]
    fn doubled_risk_has_the_textbook_e_value() {
        let er = mk_result(Contrast::RiskRatio, 2.0, (1.5, 2.7), (0.4, 0.2));
        let (e, e_ci) = e_value(&er).unwrap();
        assert!((e - (2.0 + 2.0f64.sqrt())).abs() < 1e-12);
        // Lower limit 1.5 is the one closer to 1.
        assert!((e_ci - (1.5 + 0.75f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn protective_and_harmful_ratios_are_symmetric() {
        let harmful = mk_result(Contrast::RiskRatio, 2.0, (1.5, 2.7), (0.4, 0.2));
        let protective = mk_result(Contrast::RiskRatio, 0.5, (0.4, 0.7), (0.2, 0.4));
        let (e_h, _) = e_value(&harmful).unwrap();
        let (e_p, _) = e_value(&protective).unwrap();
        assert_eq!(e_h.to_bits(), e_p.to_bits());
    }

    #[test]
    fn e_value_is_monotone_in_the_log_ratio() {
        let mut last = 0.0;
        for k in 0..40 {
            let rr = 1.0 + k as f64 * 0.25;
            let e = e_from_rr(rr);
            assert!(e >= last && e >= 1.0);
            last = e;
        }
    }

    #[test]
    fn difference_scale_ci_is_converted_around_the_control_risk() {
        // Arm risks 0.30/0.20 → RR 1.5; CI (0.02, 0.18) converts to
        // ratio limits (1.1, 1.9); 1.1 is closer to the null.
        let er = mk_result(Contrast::RiskDifference, 0.10, (0.02, 0.18), (0.30, 0.20));
        let (e, e_ci) = e_value(&er).unwrap();
        assert!((e - e_from_rr(1.5)).abs() < 1e-12);
        assert!((e_ci - e_from_rr(1.1)).abs() < 1e-12);
    }

    #[test]
    fn zero_control_risk_makes_the_e_value_undefined() {
        let er = mk_result(Contrast::RiskDifference, 0.3, (0.1, 0.5), (0.3, 0.0));
        assert!(matches!(e_value(&er), Err(EngineError::NonPositiveArmRisk { .. })));
    }

    fn nc_schema() -> DatasetSchema {
        DatasetSchema {
            treatment: "A".into(),
            outcome: "Y".into(),
            censoring: None,
            covariates: vec![],
        }
    }

    fn nc_se() -> StatisticalEstimand {
        StatisticalEstimand {
            adjustment_set: vec![],
            treatment: "A".into(),
            outcome: "Y".into(),
            censoring: None,
            arm_mean_treated: "E(Y | C=0, A=1)".into(),
            arm_mean_control: "E(Y | C=0, A=0)".into(),
            expression: "E(Y | C=0, A=1) - E(Y | C=0, A=0)".into(),
            contrast: Contrast::RiskDifference,
        }
    }

    #[test]
    fn empty_negative_control_list_yields_empty_results() {
        let csv = "A,Y,N\n0,0,1\n1,1,0\n0,1,1\n1,0,0\n";
        let d = Dataset::from_csv_str(csv, &nc_schema()).unwrap();
        let sl = SuperLearnerSpec::singleton(LearnerSpec::MeanOnly, 1);
        let out = negative_control_check(&d, &nc_se(), &[], Method::Unadjusted, &sl).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn control_equal_to_treatment_trips_the_canary() {
        // Column T duplicates A exactly: the "control" is perfectly
        // associated with treatment, so the null must be excluded.
        let mut csv = String::from("A,Y,T\n");
        for i in 0..40 {
            let a = i % 2;
            csv.push_str(&format!("{a},{},{a}\n", (i / 2) % 2));
        }
        let d = Dataset::from_csv_str(&csv, &nc_schema()).unwrap();
        let sl = SuperLearnerSpec::singleton(LearnerSpec::MeanOnly, 1);
        let out =
            negative_control_check(&d, &nc_se(), &["T".into()], Method::Unadjusted, &sl).unwrap();
        assert_eq!(out.len(), 1);
        assert!(out[0].null_excluded);
        assert_eq!(out[0].estimate.point, 1.0);
    }

    /// By-construction null: an independent control outcome should be
    /// rejected at roughly the nominal 5% rate across seeded replications.
    #[test]
    fn independent_control_rejects_near_the_nominal_rate() {
        let sl = SuperLearnerSpec::singleton(LearnerSpec::MeanOnly, 1);
        let mut exclusions = 0;
        for rep in 0..200u64 {
            let mut rng = stream(4242, &[rep]);
            let mut csv = String::from("A,Y,N\n");
            for _ in 0..2000 {
                let a = rng.gen_range(0..2);
                let y = if rng.gen::<f64>() < 0.3 + 0.2 * a as f64 { 1 } else { 0 };
                let nc = if rng.gen::<f64>() < 0.3 { 1 } else { 0 };
                csv.push_str(&format!("{a},{y},{nc}\n"));
            }
            let d = Dataset::from_csv_str(&csv, &nc_schema()).unwrap();
            let out =
                negative_control_check(&d, &nc_se(), &["N".into()], Method::Unadjusted, &sl)
                    .unwrap();
            if out[0].null_excluded {
                exclusions += 1;
            }
        }
        // 200 draws at ~5%: mean 10, sd ≈ 3. The band is wide enough to
        // be stable and tight enough to catch a broken interval.
        assert!(
            (2..=24).contains(&exclusions),
            "expected ≈5% null exclusions, got {exclusions}/200",
        );
    }

    #[test]
    fn report_composes_shift_e_value_and_controls() {
        let er = mk_result(Contrast::RiskDifference, 0.10, (0.02, 0.18), (0.30, 0.20));
        let rep = sensitivity_report(&er, Some(&gap(-0.01, 0.03)), vec![]).unwrap();
        assert_eq!(rep.shifted_ci, Some((0.02 - 0.03, 0.18 + 0.01)));
        assert!(rep.verdict.contains("shifted 95% CI"));
        assert!(rep.verdict.contains("E-value"));
        assert!(rep.verdict.contains("no negative controls"));
        assert!(rep.notes.iter().any(|n| n.contains("fixed control risk")));
    }

    #[test]
    fn report_notes_the_ratio_scale_restriction_instead_of_shifting() {
        let er = mk_result(Contrast::RiskRatio, 1.5, (1.1, 2.0), (0.3, 0.2));
        let rep = sensitivity_report(&er, Some(&gap(0.0, 0.02)), vec![]).unwrap();
        assert!(rep.shifted_ci.is_none());
        assert!(rep.notes.iter().any(|n| n.contains("difference scale only")));
    }
}
