//! Positivity diagnostics: estimated propensity extremes and, for discrete
//! covariates, exact per-stratum treatment proportions.

use crate::data::Dataset;
use crate::error::{EngineError, Result};
use crate::learn::{fit_learner, LearnerSpec};

/// Default truncation threshold for flagging extreme propensities.
pub const DEFAULT_TAU: f64 = 0.025;

/// A column is treated as discrete for stratification when it takes at
/// most this many distinct values.
const DISCRETE_VALUE_CAP: usize = 10;

/// Exact treatment proportion within one covariate stratum.
#[derive(Debug, Clone, serde::Serialize)]
pub struct StratumRow {
    /// Covariate values defining the stratum, in `covariates` order.
    pub values: Vec<f64>,
    pub n: usize,
    pub treated_proportion: f64,
    /// True when the proportion falls outside [τ, 1 − τ]; a value of
    /// exactly 0 or 1 is a structural positivity violation.
    pub flagged: bool,
}

/// Step 3 positivity evidence for one dataset and adjustment set.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PositivityReport {
    pub covariates: Vec<String>,
    pub tau: f64,
    pub propensity_min: f64,
    pub propensity_max: f64,
    pub fraction_below_tau: f64,
    pub fraction_above_one_minus_tau: f64,
    /// Present only when every covariate is discrete (few distinct values).
    pub strata: Option<Vec<StratumRow>>,
}

/// Fit a main-terms logistic propensity P(A=1 | Z) on all rows and report
/// its extremes. Runs before any uncensored filtering: positivity concerns
/// the treatment assignment mechanism, which acts on everyone.
pub fn positivity_diagnostics(d: &Dataset, z: &[String], tau: f64) -> Result<PositivityReport> {
    if !(tau > 0.0 && tau < 0.5) {
        return Err(EngineError::InvalidEstimatorConfig {
            message: format!("positivity threshold must lie in (0, 0.5), got {tau}"),
        });
    }
    let rows = d.feature_matrix(z)?;
    let a = d.treatment_values()?;
    let w = vec![1.0; d.n()];

    // Left untruncated on purpose: the whole point of the diagnostic is to
    // see how extreme the estimated propensities get.
    let fit = fit_learner(&LearnerSpec::LogisticMainTerms, &rows, &a, &w, (0.0, 1.0))?;
    let probs = fit.predict_many(&rows);

    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut below = 0usize;
    let mut above = 0usize;
    for &p in &probs {
        min = min.min(p);
        max = max.max(p);
        if p < tau {
            below += 1;
        }
        if p > 1.0 - tau {
            above += 1;
        }
    }
    let n = d.n() as f64;

    Ok(PositivityReport {
        covariates: z.to_vec(),
        tau,
        propensity_min: min,
        propensity_max: max,
        fraction_below_tau: below as f64 / n,
        fraction_above_one_minus_tau: above as f64 / n,
        strata: stratum_table(&rows, &a, tau),
    })
}

/// Exact per-stratum treatment proportions, available only when every
/// covariate column is discrete. Returns strata sorted by value vector.
fn stratum_table(rows: &[Vec<f64>], a: &[f64], tau: f64) -> Option<Vec<StratumRow>> {
    let p = rows.first().map(|r| r.len()).unwrap_or(0);
    for j in 0..p {
        let mut values: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        values.sort_by(|x, y| x.partial_cmp(y).expect("finite values"));
        values.dedup();
        if values.len() > DISCRETE_VALUE_CAP {
            return None;
        }
    }

    // Group by exact covariate vector. Totally ordered because the data
    // layer rejects non-finite values.
    let mut groups: Vec<(Vec<f64>, usize, f64)> = Vec::new();
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&i, &j| rows[i].partial_cmp(&rows[j]).expect("finite values"));
    for &i in &order {
        match groups.last_mut() {
            Some((key, count, treated)) if *key == rows[i] => {
                *count += 1;
                *treated += a[i];
            }
            _ => groups.push((rows[i].clone(), 1, a[i])),
        }
    }

    Some(
        groups
            .into_iter()
            .map(|(values, n, treated)| {
                let prop = treated / n as f64;
                StratumRow {
                    values,
                    n,
                    treated_proportion: prop,
                    flagged: prop < tau || prop > 1.0 - tau,
                }
            })
            .collect(),
    )
}
