//! Step 5 estimators: unadjusted contrast, g-computation, inverse
//! probability weighting, and TMLE, each with a 95% confidence interval.
//!
//! All four estimators target the same statistical estimand — the
//! covariate-standardized contrast of arm-specific outcome risks among
//! the uncensored — and differ only in which nuisance functions they
//! lean on. Nuisance regressions are selected by the discrete super
//! learner ([`crate::learn::cv_select`]) so the full procedure is
//! pre-specified once the library and seed are fixed.
//!
//! Row policy: a row contributes to outcome regressions and arm means
//! only when it is uncensored *and* its outcome is present. Rows with
//! C=0 but a missing outcome (flagged by the missingness summary) are
//! treated as censored here, with a warning — the censoring mechanism is
//! fit against "outcome observed", which is the event the weights must
//! correct for.

use rand::Rng;

use crate::data::Dataset;
use crate::error::{EngineError, Result};
use crate::estimand::{Contrast, StatisticalEstimand};
use crate::learn::{cv_select, expit, SuperLearnerSpec};
use crate::seeding::{purpose, stream};

/// Normal quantile used for all 95% intervals.
pub const Z_95: f64 = 1.96;
/// Offsets logit(Q̄) are clamped to ±this before fluctuation, so exact
/// 0/1 initial predictions stay finite.
const LOGIT_CAP: f64 = 40.0;
const MAX_FLUCTUATION_ITER: usize = 100;

/// Estimator choice for [`estimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Unadjusted,
    Gcomp,
    Ipw,
    Tmle,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Unadjusted => "unadjusted",
            Method::Gcomp => "gcomp",
            Method::Ipw => "ipw",
            Method::Tmle => "tmle",
        }
    }

    pub fn parse(text: &str) -> Result<Method> {
        match text.trim() {
            "unadjusted" => Ok(Method::Unadjusted),
            "gcomp" => Ok(Method::Gcomp),
            "ipw" => Ok(Method::Ipw),
            "tmle" => Ok(Method::Tmle),
            other => Err(EngineError::InvalidEstimatorConfig {
                message: format!("unknown estimator `{other}`"),
            }),
        }
    }

    pub const ALL: [Method; 4] = [Method::Unadjusted, Method::Gcomp, Method::Ipw, Method::Tmle];
}

/// Tunables with pre-specified defaults; logged in the result.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EstimateOptions {
    /// Propensity predictions are clamped into this interval. The lower
    /// bound alone is applied to the censoring mechanism — only small
    /// probabilities of remaining uncensored blow up weights.
    pub propensity_bounds: (f64, f64),
    /// Truncation interval for logistic outcome predictions.
    pub outcome_bounds: (f64, f64),
    /// Resamples for the g-computation bootstrap.
    pub bootstrap_samples: usize,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            propensity_bounds: crate::learn::PROPENSITY_BOUNDS,
            outcome_bounds: crate::learn::OUTCOME_BOUNDS,
            bootstrap_samples: 200,
        }
    }
}

/// What the nuisance machinery did, for the report.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NuisanceDiagnostics {
    /// Selected outcome-regression learner (gcomp, tmle).
    pub outcome_learner: Option<String>,
    /// Selected propensity learner (ipw, tmle).
    pub propensity_learner: Option<String>,
    /// Selected censoring-mechanism learner; `None` when every outcome is
    /// observed and the mechanism is the constant 1.
    pub censoring_learner: Option<String>,
    /// TMLE fluctuation coefficients: `[ε]` on the difference scale,
    /// `[ε₁, ε₀]` on the ratio scale. Empty for other estimators.
    pub fluctuation_coefficients: Vec<f64>,
    /// Mean of the estimated influence curve (ipw, tmle).
    pub mean_ic: Option<f64>,
    /// Propensity bounds in force during estimation.
    pub propensity_bounds: (f64, f64),
    pub warnings: Vec<String>,
}

/// A point estimate with its influence-curve (or bootstrap) uncertainty.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EstimateResult {
    pub estimator: String,
    pub point: f64,
    /// Standard error of the point estimate; on the ratio scale this is
    /// the standard error of ln(point).
    pub se: f64,
    pub ci95: (f64, f64),
    pub scale: Contrast,
    /// (P̂₁, P̂₀): standardized risk under treatment and under control.
    pub arm_risks: (f64, f64),
    pub diagnostics: NuisanceDiagnostics,
}

/// Estimate with default bounds and bootstrap settings.
pub fn estimate(
    d: &Dataset,
    se: &StatisticalEstimand,
    method: Method,
    sl: &SuperLearnerSpec,
) -> Result<EstimateResult> {
    estimate_with_options(d, se, method, sl, &EstimateOptions::default())
}

pub fn estimate_with_options(
    d: &Dataset,
    se: &StatisticalEstimand,
    method: Method,
    sl: &SuperLearnerSpec,
    opts: &EstimateOptions,
) -> Result<EstimateResult> {
    sl.validate()?;
    validate_options(opts)?;
    let frame = Frame::build(d, se)?;
    let mut diag = NuisanceDiagnostics {
        outcome_learner: None,
        propensity_learner: None,
        censoring_learner: None,
        fluctuation_coefficients: Vec::new(),
        mean_ic: None,
        propensity_bounds: opts.propensity_bounds,
        warnings: frame.warnings.clone(),
    };

    let scale = se.contrast;
    let summary = match method {
        Method::Unadjusted => unadjusted(&frame, scale)?,
        Method::Gcomp => gcomp(&frame, scale, sl, opts, &mut diag)?,
        Method::Ipw => ipw(&frame, scale, sl, opts, &mut diag)?,
        Method::Tmle => tmle(&frame, scale, sl, opts, &mut diag)?,
    };

    if summary.se == 0.0 {
        diag.warnings.push(
            "degenerate variance: the confidence interval collapses to the point estimate".into(),
        );
    }
    let ci95 = interval(summary.point, summary.se, scale);
    diag.mean_ic = summary.mean_ic;

    Ok(EstimateResult {
        estimator: method.name().to_string(),
        point: summary.point,
        se: summary.se,
        ci95,
        scale,
        arm_risks: (summary.p1, summary.p0),
        diagnostics: diag,
    })
}

fn validate_options(opts: &EstimateOptions) -> Result<()> {
    let ok_interval = |b: (f64, f64)| b.0 > 0.0 && b.0 < b.1 && b.1 <= 1.0;
    if !ok_interval(opts.propensity_bounds) || !ok_interval(opts.outcome_bounds) {
        return Err(EngineError::InvalidEstimatorConfig {
            message: "bounds must satisfy 0 < lo < hi <= 1".into(),
        });
    }
    if opts.bootstrap_samples < 2 {
        return Err(EngineError::InvalidEstimatorConfig {
            message: "bootstrap_samples must be at least 2".into(),
        });
    }
    Ok(())
}

/// Point, uncertainty, and arm risks on the requested scale. `se` is on
/// the log scale for ratio contrasts.
struct Summary {
    point: f64,
    se: f64,
    p1: f64,
    p0: f64,
    mean_ic: Option<f64>,
}

fn interval(point: f64, se: f64, scale: Contrast) -> (f64, f64) {
    match scale {
        Contrast::RiskDifference => (point - Z_95 * se, point + Z_95 * se),
        Contrast::RiskRatio => {
            let l = point.ln();
            ((l - Z_95 * se).exp(), (l + Z_95 * se).exp())
        }
    }
}

/// The dataset columns an estimator works from, pre-extracted.
struct Frame {
    n: usize,
    /// Adjustment covariates per row.
    z: Vec<Vec<f64>>,
    /// `[A, Z...]` per row — features for the outcome and censoring fits.
    az: Vec<Vec<f64>>,
    a: Vec<f64>,
    y: Vec<Option<f64>>,
    /// Uncensored and outcome present.
    obs: Vec<bool>,
    warnings: Vec<String>,
}

impl Frame {
    fn build(d: &Dataset, se: &StatisticalEstimand) -> Result<Frame> {
        let schema = d.schema();
        if se.treatment != schema.treatment
            || se.outcome != schema.outcome
            || se.censoring != schema.censoring
        {
            return Err(EngineError::InvalidEstimatorConfig {
                message: format!(
                    "estimand columns (A={}, Y={}, C={}) do not match the dataset schema",
                    se.treatment,
                    se.outcome,
                    se.censoring.as_deref().unwrap_or("-"),
                ),
            });
        }

        let z = d.feature_matrix(&se.adjustment_set)?;
        let a = d.treatment_values()?;
        let y: Vec<Option<f64>> = d.outcome_values()?.to_vec();
        let uncensored = d.uncensored_mask()?;
        let n = d.n();

        let mut obs = vec![false; n];
        let mut inconsistent = 0usize;
        for i in 0..n {
            obs[i] = uncensored[i] && y[i].is_some();
            if uncensored[i] && y[i].is_none() {
                inconsistent += 1;
            }
        }
        let mut warnings = Vec::new();
        if inconsistent > 0 {
            warnings.push(format!(
                "{inconsistent} uncensored row(s) have a missing outcome; treated as censored",
            ));
        }

        for (arm, level) in [("treated", 1.0), ("control", 0.0)] {
            if !(0..n).any(|i| obs[i] && a[i] == level) {
                return Err(EngineError::EmptyArm { arm: arm.into() });
            }
        }

        let az = (0..n)
            .map(|i| {
                let mut row = Vec::with_capacity(1 + z[i].len());
                row.push(a[i]);
                row.extend_from_slice(&z[i]);
                row
            })
            .collect();

        Ok(Frame { n, z, az, a, y, obs, warnings })
    }

    /// True when the censoring mechanism is the constant 1 and needs no fit.
    fn fully_observed(&self) -> bool {
        self.obs.iter().all(|&o| o)
    }

    fn counterfactual_row(&self, i: usize, a: f64) -> Vec<f64> {
        let mut row = Vec::with_capacity(1 + self.z[i].len());
        row.push(a);
        row.extend_from_slice(&self.z[i]);
        row
    }
}

/// Population standard deviation (divide by n, matching the asymptotic
/// variance formulas the intervals are built from).
fn sd_pop(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

// ── unadjusted ──

fn unadjusted(frame: &Frame, scale: Contrast) -> Result<Summary> {
    let (mut n1, mut s1, mut n0, mut s0) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..frame.n {
        if !frame.obs[i] {
            continue;
        }
        let y = frame.y[i].expect("obs rows have outcomes");
        if frame.a[i] == 1.0 {
            n1 += 1.0;
            s1 += y;
        } else {
            n0 += 1.0;
            s0 += y;
        }
    }
    let p1 = s1 / n1;
    let p0 = s0 / n0;

    match scale {
        Contrast::RiskDifference => {
            let var = p1 * (1.0 - p1) / n1 + p0 * (1.0 - p0) / n0;
            Ok(Summary { point: p1 - p0, se: var.sqrt(), p1, p0, mean_ic: None })
        }
        Contrast::RiskRatio => {
            require_positive_risks(p1, p0)?;
            let var_log = (1.0 - p1) / (n1 * p1) + (1.0 - p0) / (n0 * p0);
            Ok(Summary { point: p1 / p0, se: var_log.sqrt(), p1, p0, mean_ic: None })
        }
    }
}

fn require_positive_risks(p1: f64, p0: f64) -> Result<()> {
    if p1 <= 0.0 || p0 <= 0.0 {
        return Err(EngineError::NonPositiveArmRisk { treated: p1, control: p0 });
    }
    Ok(())
}

// ── g-computation ──

/// Outcome regression fit on observed rows; returns the fitted learner.
fn fit_outcome(
    frame: &Frame,
    sl: &SuperLearnerSpec,
    opts: &EstimateOptions,
) -> Result<crate::learn::CvSelection> {
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for i in 0..frame.n {
        if frame.obs[i] {
            rows.push(frame.az[i].clone());
            y.push(frame.y[i].expect("obs rows have outcomes"));
        }
    }
    let w = vec![1.0; rows.len()];
    cv_select(sl, &rows, &y, &w, opts.outcome_bounds)
}

/// Standardized arm means: average counterfactual predictions over every
/// row's covariates, censored rows included.
fn plugin_arm_means(fit: &crate::learn::FittedLearner, frame: &Frame) -> (f64, f64) {
    let (mut q1, mut q0) = (0.0f64, 0.0f64);
    for i in 0..frame.n {
        q1 += fit.predict(&frame.counterfactual_row(i, 1.0));
        q0 += fit.predict(&frame.counterfactual_row(i, 0.0));
    }
    (q1 / frame.n as f64, q0 / frame.n as f64)
}

fn gcomp(
    frame: &Frame,
    scale: Contrast,
    sl: &SuperLearnerSpec,
    opts: &EstimateOptions,
    diag: &mut NuisanceDiagnostics,
) -> Result<Summary> {
    let selection = fit_outcome(frame, sl, opts)?;
    note_fallback(&selection, "outcome", diag);
    diag.outcome_learner = Some(selection.fitted.spec.name());
    let (p1, p0) = plugin_arm_means(&selection.fitted, frame);
    let point = match scale {
        Contrast::RiskDifference => p1 - p0,
        Contrast::RiskRatio => {
            require_positive_risks(p1, p0)?;
            p1 / p0
        }
    };

    // Nonparametric bootstrap: the full pipeline — super learner selection
    // included — reruns on each resample, so the SE reflects the actual
    // procedure rather than conditioning on the selected learner.
    let mut values = Vec::with_capacity(opts.bootstrap_samples);
    let mut failures = 0usize;
    for b in 0..opts.bootstrap_samples {
        let mut rng = stream(sl.seed, &[purpose::BOOTSTRAP, b as u64]);
        let idx: Vec<usize> = (0..frame.n).map(|_| rng.gen_range(0..frame.n)).collect();
        match bootstrap_plugin(frame, &idx, sl, opts, scale) {
            Some(v) => values.push(v),
            None => failures += 1,
        }
    }
    if failures > 0 {
        diag.warnings
            .push(format!("{failures} of {} bootstrap resamples failed and were dropped", opts.bootstrap_samples));
    }
    let se = if values.len() >= 2 {
        let m = mean(&values);
        (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
    } else {
        diag.warnings.push("fewer than 2 bootstrap resamples succeeded; SE set to 0".into());
        0.0
    };

    Ok(Summary { point, se, p1, p0, mean_ic: None })
}

/// One bootstrap replicate of the g-computation plug-in. Returns the
/// estimate on the contrast scale (log scale for ratios), or `None` when
/// the resample is unusable (an empty arm, a failed fit, a zero risk).
fn bootstrap_plugin(
    frame: &Frame,
    idx: &[usize],
    sl: &SuperLearnerSpec,
    opts: &EstimateOptions,
    scale: Contrast,
) -> Option<f64> {
    let mut rows = Vec::new();
    let mut y = Vec::new();
    let (mut any1, mut any0) = (false, false);
    for &i in idx {
        if frame.obs[i] {
            rows.push(frame.az[i].clone());
            y.push(frame.y[i].expect("obs rows have outcomes"));
            if frame.a[i] == 1.0 {
                any1 = true;
            } else {
                any0 = true;
            }
        }
    }
    if !(any1 && any0) {
        return None;
    }
    let w = vec![1.0; rows.len()];
    let selection = cv_select(sl, &rows, &y, &w, opts.outcome_bounds).ok()?;

    let (mut q1, mut q0) = (0.0f64, 0.0f64);
    for &i in idx {
        let mut row1 = frame.counterfactual_row(i, 1.0);
        q1 += selection.fitted.predict(&row1);
        row1[0] = 0.0;
        q0 += selection.fitted.predict(&row1);
    }
    let p1 = q1 / idx.len() as f64;
    let p0 = q0 / idx.len() as f64;
    match scale {
        Contrast::RiskDifference => Some(p1 - p0),
        Contrast::RiskRatio => {
            if p1 > 0.0 && p0 > 0.0 {
                Some((p1 / p0).ln())
            } else {
                None
            }
        }
    }
}

// ── nuisance fits shared by IPW and TMLE ──

/// Propensity scores g(Z) = P(A=1 | Z), clamped into the bounds.
fn fit_propensity(
    frame: &Frame,
    sl: &SuperLearnerSpec,
    opts: &EstimateOptions,
    diag: &mut NuisanceDiagnostics,
) -> Result<Vec<f64>> {
    let w = vec![1.0; frame.n];
    let selection = cv_select(sl, &frame.z, &frame.a, &w, opts.propensity_bounds)?;
    note_fallback(&selection, "propensity", diag);
    diag.propensity_learner = Some(selection.fitted.spec.name());
    let (lo, hi) = opts.propensity_bounds;
    Ok(frame.z.iter().map(|z| selection.fitted.predict(z).clamp(lo, hi)).collect())
}

/// Probability of remaining uncensored in each arm: (π₁(Z), π₀(Z)).
/// Only the lower propensity bound applies — π near 1 is harmless.
/// When every outcome is observed, the mechanism is the constant 1.
fn fit_censoring(
    frame: &Frame,
    sl: &SuperLearnerSpec,
    opts: &EstimateOptions,
    diag: &mut NuisanceDiagnostics,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if frame.fully_observed() {
        return Ok((vec![1.0; frame.n], vec![1.0; frame.n]));
    }
    let target: Vec<f64> = frame.obs.iter().map(|&o| if o { 1.0 } else { 0.0 }).collect();
    let w = vec![1.0; frame.n];
    let lo = opts.propensity_bounds.0;
    let selection = cv_select(sl, &frame.az, &target, &w, (lo, 1.0))?;
    note_fallback(&selection, "censoring", diag);
    diag.censoring_learner = Some(selection.fitted.spec.name());
    let mut pi1 = Vec::with_capacity(frame.n);
    let mut pi0 = Vec::with_capacity(frame.n);
    for i in 0..frame.n {
        let mut row = frame.counterfactual_row(i, 1.0);
        pi1.push(selection.fitted.predict(&row).max(lo));
        row[0] = 0.0;
        pi0.push(selection.fitted.predict(&row).max(lo));
    }
    Ok((pi1, pi0))
}

fn note_fallback(selection: &crate::learn::CvSelection, role: &str, diag: &mut NuisanceDiagnostics) {
    if selection.fitted.fell_back {
        diag.warnings.push(format!(
            "{role} fit: logistic learner `{}` did not converge; fell back to the weighted mean",
            selection.fitted.spec.name(),
        ));
    }
}

// ── IPW ──

fn ipw(
    frame: &Frame,
    scale: Contrast,
    sl: &SuperLearnerSpec,
    opts: &EstimateOptions,
    diag: &mut NuisanceDiagnostics,
) -> Result<Summary> {
    let g = fit_propensity(frame, sl, opts, diag)?;
    let (pi1, pi0) = fit_censoring(frame, sl, opts, diag)?;
    let n = frame.n as f64;

    // Horvitz–Thompson contributions: f_a[i] = I(A=a, observed) · Y / (g·π).
    let mut f1 = vec![0.0f64; frame.n];
    let mut f0 = vec![0.0f64; frame.n];
    for i in 0..frame.n {
        if !frame.obs[i] {
            continue;
        }
        let y = frame.y[i].expect("obs rows have outcomes");
        if frame.a[i] == 1.0 {
            f1[i] = y / (g[i] * pi1[i]);
        } else {
            f0[i] = y / ((1.0 - g[i]) * pi0[i]);
        }
    }
    let p1 = f1.iter().sum::<f64>() / n;
    let p0 = f0.iter().sum::<f64>() / n;

    match scale {
        Contrast::RiskDifference => {
            let ic: Vec<f64> = (0..frame.n).map(|i| f1[i] - f0[i] - (p1 - p0)).collect();
            Ok(Summary {
                point: p1 - p0,
                se: sd_pop(&ic) / n.sqrt(),
                p1,
                p0,
                mean_ic: Some(mean(&ic)),
            })
        }
        Contrast::RiskRatio => {
            require_positive_risks(p1, p0)?;
            let ic: Vec<f64> =
                (0..frame.n).map(|i| (f1[i] - p1) / p1 - (f0[i] - p0) / p0).collect();
            Ok(Summary {
                point: p1 / p0,
                se: sd_pop(&ic) / n.sqrt(),
                p1,
                p0,
                mean_ic: Some(mean(&ic)),
            })
        }
    }
}

// ── TMLE ──

fn clamped_logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln().clamp(-LOGIT_CAP, LOGIT_CAP)
}

/// Solve the one-dimensional fluctuation score Σ h·(y − expit(o + ε·h)) = 0
/// by damped Newton. The log-likelihood is concave in ε, so step-halving
/// on the score magnitude is enough to keep iterations stable.
fn fluctuate(y: &[f64], offset: &[f64], h: &[f64]) -> Result<f64> {
    let n = y.len() as f64;
    let h_scale = 1.0 + h.iter().map(|v| v.abs()).sum::<f64>() / n;
    let tol = 1e-11 * n * h_scale;
    let score_at = |eps: f64| -> f64 {
        (0..y.len()).map(|i| h[i] * (y[i] - expit(offset[i] + eps * h[i]))).sum()
    };

    let mut eps = 0.0f64;
    let mut score = score_at(eps);
    for _ in 0..MAX_FLUCTUATION_ITER {
        if score.abs() <= tol {
            return Ok(eps);
        }
        let info: f64 = (0..y.len())
            .map(|i| {
                let p = expit(offset[i] + eps * h[i]);
                h[i] * h[i] * p * (1.0 - p)
            })
            .sum();
        if info <= f64::MIN_POSITIVE {
            // Flat likelihood with a nonzero score: the MLE is at infinity.
            break;
        }
        let mut step = score / info;
        let mut cand = eps + step;
        let mut cand_score = score_at(cand);
        let mut halvings = 0;
        while cand_score.abs() > score.abs() && halvings < 40 {
            step *= 0.5;
            cand = eps + step;
            cand_score = score_at(cand);
            halvings += 1;
        }
        if cand_score.abs() >= score.abs() {
            // No direction improves the score: numerically stuck.
            break;
        }
        eps = cand;
        score = cand_score;
    }
    if score.abs() <= tol {
        Ok(eps)
    } else {
        Err(EngineError::FluctuationDiverged { iterations: MAX_FLUCTUATION_ITER })
    }
}

fn tmle(
    frame: &Frame,
    scale: Contrast,
    sl: &SuperLearnerSpec,
    opts: &EstimateOptions,
    diag: &mut NuisanceDiagnostics,
) -> Result<Summary> {
    let selection = fit_outcome(frame, sl, opts)?;
    note_fallback(&selection, "outcome", diag);
    diag.outcome_learner = Some(selection.fitted.spec.name());
    let qbar = &selection.fitted;
    let g = fit_propensity(frame, sl, opts, diag)?;
    let (pi1, pi0) = fit_censoring(frame, sl, opts, diag)?;
    let n = frame.n as f64;

    // Per-row pieces: clamped-logit initial predictions under each arm and
    // the arm-specific inverse weights h_a = 1/(g_a·π_a).
    let mut logit_q1 = Vec::with_capacity(frame.n);
    let mut logit_q0 = Vec::with_capacity(frame.n);
    let mut h1 = Vec::with_capacity(frame.n);
    let mut h0 = Vec::with_capacity(frame.n);
    for i in 0..frame.n {
        let mut row = frame.counterfactual_row(i, 1.0);
        logit_q1.push(clamped_logit(qbar.predict(&row)));
        row[0] = 0.0;
        logit_q0.push(clamped_logit(qbar.predict(&row)));
        h1.push(1.0 / (g[i] * pi1[i]));
        h0.push(1.0 / ((1.0 - g[i]) * pi0[i]));
    }

    // Observed-row vectors for the fluctuation regression.
    let obs_rows: Vec<usize> = (0..frame.n).filter(|&i| frame.obs[i]).collect();
    let y_obs: Vec<f64> =
        obs_rows.iter().map(|&i| frame.y[i].expect("obs rows have outcomes")).collect();
    let offset_obs: Vec<f64> = obs_rows
        .iter()
        .map(|&i| if frame.a[i] == 1.0 { logit_q1[i] } else { logit_q0[i] })
        .collect();

    match scale {
        Contrast::RiskDifference => {
            // One combined fluctuation with the signed clever covariate
            // H(A,Z) = I(A=1)·h₁ − I(A=0)·h₀.
            let h_obs: Vec<f64> = obs_rows
                .iter()
                .map(|&i| if frame.a[i] == 1.0 { h1[i] } else { -h0[i] })
                .collect();
            let eps = fluctuate(&y_obs, &offset_obs, &h_obs)?;
            diag.fluctuation_coefficients = vec![eps];

            let q1s: Vec<f64> =
                (0..frame.n).map(|i| expit(logit_q1[i] + eps * h1[i])).collect();
            let q0s: Vec<f64> =
                (0..frame.n).map(|i| expit(logit_q0[i] + eps * (-h0[i]))).collect();
            let p1 = mean(&q1s);
            let p0 = mean(&q0s);
            let point = mean(&(0..frame.n).map(|i| q1s[i] - q0s[i]).collect::<Vec<f64>>());

            let ic: Vec<f64> = (0..frame.n)
                .map(|i| {
                    let resid = if frame.obs[i] {
                        let y = frame.y[i].expect("obs rows have outcomes");
                        if frame.a[i] == 1.0 {
                            h1[i] * (y - q1s[i])
                        } else {
                            -h0[i] * (y - q0s[i])
                        }
                    } else {
                        0.0
                    };
                    resid + q1s[i] - q0s[i] - point
                })
                .collect();
            Ok(Summary {
                point,
                se: sd_pop(&ic) / n.sqrt(),
                p1,
                p0,
                mean_ic: Some(mean(&ic)),
            })
        }
        Contrast::RiskRatio => {
            // Each arm risk is targeted by its own fluctuation — the two
            // use disjoint rows, so they are independent one-dimensional
            // problems, and both arm-score equations end up solved.
            let (mut y1, mut o1, mut hh1) = (Vec::new(), Vec::new(), Vec::new());
            let (mut y0, mut o0, mut hh0) = (Vec::new(), Vec::new(), Vec::new());
            for (k, &i) in obs_rows.iter().enumerate() {
                if frame.a[i] == 1.0 {
                    y1.push(y_obs[k]);
                    o1.push(offset_obs[k]);
                    hh1.push(h1[i]);
                } else {
                    y0.push(y_obs[k]);
                    o0.push(offset_obs[k]);
                    hh0.push(h0[i]);
                }
            }
            let eps1 = fluctuate(&y1, &o1, &hh1)?;
            let eps0 = fluctuate(&y0, &o0, &hh0)?;
            diag.fluctuation_coefficients = vec![eps1, eps0];

            let q1s: Vec<f64> =
                (0..frame.n).map(|i| expit(logit_q1[i] + eps1 * h1[i])).collect();
            let q0s: Vec<f64> =
                (0..frame.n).map(|i| expit(logit_q0[i] + eps0 * h0[i])).collect();
            let p1 = mean(&q1s);
            let p0 = mean(&q0s);
            require_positive_risks(p1, p0)?;

            let ic: Vec<f64> = (0..frame.n)
                .map(|i| {
                    let (mut ic1, mut ic0) = (q1s[i] - p1, q0s[i] - p0);
                    if frame.obs[i] {
                        let y = frame.y[i].expect("obs rows have outcomes");
                        if frame.a[i] == 1.0 {
                            ic1 += h1[i] * (y - q1s[i]);
                        } else {
                            ic0 += h0[i] * (y - q0s[i]);
                        }
                    }
                    ic1 / p1 - ic0 / p0
                })
                .collect();
            Ok(Summary {
                point: p1 / p0,
                se: sd_pop(&ic) / n.sqrt(),
                p1,
                p0,
                mean_ic: Some(mean(&ic)),
            })
        }
    }
}
