//! Candidate learners and the discrete super learner.
//!
//! Four learner kinds cover the pre-specified library: a constant mean,
//! main-terms logistic, logistic with all pairwise interactions, and a
//! stratified histogram (exact cell means over binned features). The
//! discrete super learner cross-validates the library under negative
//! log-likelihood loss and refits the winner on the full data.
//!
//! Truncation policy: logistic predictions are truncated to the supplied
//! bounds as a separation guard. The mean and histogram learners return
//! exact weighted means untouched — they cannot run away to infinity, and
//! leaving them exact is what makes the estimators reproduce stratified
//! means bit-for-bit on saturated problems.

mod cv;
mod logistic;

pub use cv::{cv_select, CvRow, CvSelection};
pub(crate) use logistic::expit;

use std::collections::BTreeMap;

use crate::error::{EngineError, Result};

/// Prediction bounds for outcome regressions.
pub const OUTCOME_BOUNDS: (f64, f64) = (0.005, 0.995);
/// Prediction bounds for propensity and censoring mechanisms.
pub const PROPENSITY_BOUNDS: (f64, f64) = (0.025, 0.975);
/// Default histogram bin count when none is given.
pub const DEFAULT_HISTOGRAM_BINS: usize = 5;

/// One candidate learner, hyperparameters included.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerSpec {
    MeanOnly,
    LogisticMainTerms,
    LogisticWithPairwiseInteractions,
    StratifiedHistogram { bins: usize },
}

impl LearnerSpec {
    /// Display name used in CV-risk tables and diagnostics.
    pub fn name(&self) -> String {
        match self {
            LearnerSpec::MeanOnly => "mean_only".into(),
            LearnerSpec::LogisticMainTerms => "logistic_main_terms".into(),
            LearnerSpec::LogisticWithPairwiseInteractions => {
                "logistic_with_pairwise_interactions".into()
            }
            LearnerSpec::StratifiedHistogram { bins } => {
                format!("stratified_histogram(bins={bins})")
            }
        }
    }

    /// Parse a learner name as written in config files:
    /// `mean_only`, `logistic_main_terms`, `logistic_with_pairwise_interactions`,
    /// `stratified_histogram`, or `stratified_histogram(bins=8)`.
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        match t {
            "mean_only" => return Ok(LearnerSpec::MeanOnly),
            "logistic_main_terms" => return Ok(LearnerSpec::LogisticMainTerms),
            "logistic_with_pairwise_interactions" => {
                return Ok(LearnerSpec::LogisticWithPairwiseInteractions)
            }
            "stratified_histogram" => {
                return Ok(LearnerSpec::StratifiedHistogram { bins: DEFAULT_HISTOGRAM_BINS })
            }
            _ => {}
        }
        if let Some(rest) = t.strip_prefix("stratified_histogram(") {
            if let Some(inner) = rest.strip_suffix(')') {
                if let Some(v) = inner.trim().strip_prefix("bins") {
                    if let Some(num) = v.trim().strip_prefix('=') {
                        if let Ok(bins) = num.trim().parse::<usize>() {
                            let spec = LearnerSpec::StratifiedHistogram { bins };
                            spec.validate()?;
                            return Ok(spec);
                        }
                    }
                }
            }
        }
        Err(EngineError::InvalidEstimatorConfig {
            message: format!("unknown learner `{t}`"),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if let LearnerSpec::StratifiedHistogram { bins } = self {
            if *bins < 1 {
                return Err(EngineError::InvalidEstimatorConfig {
                    message: "stratified_histogram requires bins >= 1".into(),
                });
            }
        }
        Ok(())
    }
}

/// Discrete super learner specification: a library, a fold count, and a
/// seed for fold assignment. Loss is fixed at negative log-likelihood.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SuperLearnerSpec {
    pub library: Vec<LearnerSpec>,
    /// Fold count V; `None` means 10 (5 when n < 100).
    pub folds: Option<usize>,
    pub seed: u64,
}

impl SuperLearnerSpec {
    /// The default pre-specified library: all four learner kinds.
    pub fn default_library(seed: u64) -> Self {
        SuperLearnerSpec {
            library: vec![
                LearnerSpec::MeanOnly,
                LearnerSpec::LogisticMainTerms,
                LearnerSpec::LogisticWithPairwiseInteractions,
                LearnerSpec::StratifiedHistogram { bins: DEFAULT_HISTOGRAM_BINS },
            ],
            folds: None,
            seed,
        }
    }

    /// A single-learner "library" — CV still runs, but the selection is forced.
    pub fn singleton(learner: LearnerSpec, seed: u64) -> Self {
        SuperLearnerSpec { library: vec![learner], folds: None, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.library.is_empty() {
            return Err(EngineError::InvalidEstimatorConfig {
                message: "super learner library must be nonempty".into(),
            });
        }
        if let Some(v) = self.folds {
            if v < 2 {
                return Err(EngineError::InvalidEstimatorConfig {
                    message: format!("folds must be >= 2, got {v}"),
                });
            }
        }
        for l in &self.library {
            l.validate()?;
        }
        Ok(())
    }

    /// Effective fold count for a dataset of n rows.
    /// Explicit V must satisfy V <= n; the default shrinks for small n.
    pub fn effective_folds(&self, n: usize) -> Result<usize> {
        match self.folds {
            Some(v) => {
                if v > n {
                    Err(EngineError::InvalidEstimatorConfig {
                        message: format!("folds={v} exceeds dataset size n={n}"),
                    })
                } else {
                    Ok(v)
                }
            }
            None => {
                let v = if n < 100 { 5 } else { 10 };
                Ok(v.min(n).max(2))
            }
        }
    }
}

/// How a histogram feature maps values to cells.
#[derive(Debug, Clone)]
enum BinRule {
    /// Few distinct values: stratify on exact values.
    Exact(Vec<f64>),
    /// Many distinct values: equal-width bins over the training range.
    Width { min: f64, width: f64, bins: usize },
}

impl BinRule {
    fn index(&self, x: f64) -> Option<u32> {
        match self {
            BinRule::Exact(values) => values
                .binary_search_by(|v| v.partial_cmp(&x).expect("finite values"))
                .ok()
                .map(|i| i as u32),
            BinRule::Width { min, width, bins } => {
                let raw = if *width > 0.0 { ((x - min) / width).floor() } else { 0.0 };
                Some((raw.max(0.0) as usize).min(bins - 1) as u32)
            }
        }
    }
}

#[derive(Debug, Clone)]
enum Model {
    Constant(f64),
    Logistic { beta: Vec<f64>, pairwise: bool, lo: f64, hi: f64 },
    Histogram { rules: Vec<BinRule>, cells: BTreeMap<Vec<u32>, f64>, fallback: f64 },
}

/// A fitted prediction function P(target = 1 | features).
#[derive(Debug, Clone)]
pub struct FittedLearner {
    pub spec: LearnerSpec,
    /// True when a logistic fit failed to converge and the learner fell
    /// back to the weighted mean.
    pub fell_back: bool,
    model: Model,
}

impl FittedLearner {
    pub fn predict(&self, row: &[f64]) -> f64 {
        match &self.model {
            Model::Constant(p) => *p,
            Model::Logistic { beta, pairwise, lo, hi } => {
                let feats = if *pairwise { expand_pairwise(row) } else { row.to_vec() };
                let mut eta = beta[0];
                for (j, x) in feats.iter().enumerate() {
                    eta += beta[j + 1] * x;
                }
                logistic::expit(eta).clamp(*lo, *hi)
            }
            Model::Histogram { rules, cells, fallback } => {
                let mut key = Vec::with_capacity(rules.len());
                for (rule, &x) in rules.iter().zip(row) {
                    match rule.index(x) {
                        Some(i) => key.push(i),
                        None => return *fallback,
                    }
                }
                cells.get(&key).copied().unwrap_or(*fallback)
            }
        }
    }

    pub fn predict_many(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        rows.iter().map(|r| self.predict(r)).collect()
    }
}

/// Append all pairwise products x_i * x_j (i < j) to the main terms.
fn expand_pairwise(row: &[f64]) -> Vec<f64> {
    let mut out = row.to_vec();
    for i in 0..row.len() {
        for j in (i + 1)..row.len() {
            out.push(row[i] * row[j]);
        }
    }
    out
}

fn weighted_mean(y: &[f64], w: &[f64]) -> f64 {
    let sw: f64 = w.iter().sum();
    let sy: f64 = y.iter().zip(w).map(|(a, b)| a * b).sum();
    sy / sw
}

fn check_fit_inputs(rows: &[Vec<f64>], y: &[f64], w: &[f64]) -> Result<()> {
    if rows.is_empty() {
        return Err(EngineError::InvalidEstimatorConfig {
            message: "cannot fit a learner on zero rows".into(),
        });
    }
    assert_eq!(rows.len(), y.len(), "feature/target length mismatch");
    assert_eq!(rows.len(), w.len(), "feature/weight length mismatch");
    if w.iter().any(|v| !v.is_finite() || *v < 0.0) || w.iter().sum::<f64>() <= 0.0 {
        return Err(EngineError::BadWeights);
    }
    Ok(())
}

/// Fit one learner. `bounds` is the truncation interval applied to
/// logistic predictions only (see the module docs for why).
pub fn fit_learner(
    spec: &LearnerSpec,
    rows: &[Vec<f64>],
    y: &[f64],
    w: &[f64],
    bounds: (f64, f64),
) -> Result<FittedLearner> {
    spec.validate()?;
    check_fit_inputs(rows, y, w)?;
    let mean = weighted_mean(y, w);

    let model = match spec {
        LearnerSpec::MeanOnly => Model::Constant(mean),
        LearnerSpec::LogisticMainTerms | LearnerSpec::LogisticWithPairwiseInteractions => {
            let pairwise = matches!(spec, LearnerSpec::LogisticWithPairwiseInteractions);
            let feats: Vec<Vec<f64>> = if pairwise {
                rows.iter().map(|r| expand_pairwise(r)).collect()
            } else {
                rows.to_vec()
            };
            match logistic::fit(&feats, y, w, 1e-8, 100) {
                Some(fit) if fit.converged => {
                    Model::Logistic { beta: fit.beta, pairwise, lo: bounds.0, hi: bounds.1 }
                }
                // Non-convergence (or an unsolvable system): fall back to
                // the weighted mean and say so.
                _ => {
                    return Ok(FittedLearner {
                        spec: spec.clone(),
                        fell_back: true,
                        model: Model::Constant(mean),
                    })
                }
            }
        }
        LearnerSpec::StratifiedHistogram { bins } => fit_histogram(rows, y, w, *bins, mean),
    };

    Ok(FittedLearner { spec: spec.clone(), fell_back: false, model })
}

fn fit_histogram(rows: &[Vec<f64>], y: &[f64], w: &[f64], bins: usize, fallback: f64) -> Model {
    let p = rows[0].len();
    let mut rules = Vec::with_capacity(p);
    for j in 0..p {
        let mut values: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        values.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
        values.dedup();
        if values.len() <= bins {
            rules.push(BinRule::Exact(values));
        } else {
            let min = values[0];
            let max = *values.last().expect("nonempty");
            rules.push(BinRule::Width { min, width: (max - min) / bins as f64, bins });
        }
    }

    // Weighted mean of the target within each occupied cell.
    let mut sums: BTreeMap<Vec<u32>, (f64, f64)> = BTreeMap::new();
    for (i, row) in rows.iter().enumerate() {
        let key: Vec<u32> = rules
            .iter()
            .zip(row.iter())
            .map(|(rule, &x)| rule.index(x).expect("training values are always in range"))
            .collect();
        let e = sums.entry(key).or_insert((0.0, 0.0));
        e.0 += w[i] * y[i];
        e.1 += w[i];
    }
    let cells: BTreeMap<Vec<u32>, f64> = sums
        .into_iter()
        .map(|(k, (sy, sw))| (k, if sw > 0.0 { sy / sw } else { fallback }))
        .collect();

    Model::Histogram { rules, cells, fallback }
}
