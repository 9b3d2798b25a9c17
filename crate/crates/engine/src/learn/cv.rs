//! Discrete super learner: V-fold cross-validated learner selection.

use rand::seq::SliceRandom;

use crate::error::{EngineError, Result};
use crate::learn::{fit_learner, FittedLearner, SuperLearnerSpec};
use crate::seeding::{purpose, stream};

/// One line of the CV-risk table.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CvRow {
    pub learner: String,
    /// Weighted-mean negative log-likelihood over held-out predictions.
    /// Infinite when the learner failed on some fold or predicted a
    /// certainty that a held-out observation contradicted.
    pub cv_risk: f64,
}

/// Outcome of discrete super learner selection.
#[derive(Debug, Clone)]
pub struct CvSelection {
    /// The winning learner, refit on the full data.
    pub fitted: FittedLearner,
    pub winner_index: usize,
    pub table: Vec<CvRow>,
    pub folds_used: usize,
}

/// Cross-validate `sl.library` under negative log-likelihood, select the
/// argmin (ties broken by library order), and refit the winner on all rows.
/// `bounds` is passed through to each logistic fit.
pub fn cv_select(
    sl: &SuperLearnerSpec,
    rows: &[Vec<f64>],
    y: &[f64],
    w: &[f64],
    bounds: (f64, f64),
) -> Result<CvSelection> {
    sl.validate()?;
    let n = rows.len();
    if n == 0 {
        return Err(EngineError::InvalidEstimatorConfig {
            message: "cannot cross-validate on zero rows".into(),
        });
    }
    let v = sl.effective_folds(n)?;

    // Seeded fold assignment: shuffle the row indices, then deal them out
    // round-robin so fold sizes differ by at most one.
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = stream(sl.seed, &[purpose::CV_FOLDS]);
    order.shuffle(&mut rng);
    let mut fold_of = vec![0usize; n];
    for (pos, &row) in order.iter().enumerate() {
        fold_of[row] = pos % v;
    }

    let mut table = Vec::with_capacity(sl.library.len());
    for spec in &sl.library {
        let mut loss_sum = 0.0f64;
        let mut weight_sum = 0.0f64;
        let mut failed = false;
        for fold in 0..v {
            let mut tr_rows = Vec::new();
            let mut tr_y = Vec::new();
            let mut tr_w = Vec::new();
            let mut held = Vec::new();
            for i in 0..n {
                if fold_of[i] == fold {
                    held.push(i);
                } else {
                    tr_rows.push(rows[i].clone());
                    tr_y.push(y[i]);
                    tr_w.push(w[i]);
                }
            }
            let fit = match fit_learner(spec, &tr_rows, &tr_y, &tr_w, bounds) {
                Ok(f) => f,
                Err(_) => {
                    failed = true;
                    break;
                }
            };
            for &i in &held {
                let p = fit.predict(&rows[i]);
                let nll = if y[i] > 0.5 { -p.ln() } else { -(1.0 - p).ln() };
                // A certainty contradicted by the data costs infinity;
                // anything non-numeric is treated the same way.
                loss_sum += w[i] * if nll.is_nan() { f64::INFINITY } else { nll };
                weight_sum += w[i];
            }
        }
        let cv_risk = if failed || weight_sum <= 0.0 {
            f64::INFINITY
        } else {
            let r = loss_sum / weight_sum;
            if r.is_nan() {
                f64::INFINITY
            } else {
                r
            }
        };
        table.push(CvRow { learner: spec.name(), cv_risk });
    }

    // Strict-less argmin keeps the first of any tie (library order), and
    // keeps index 0 when every learner is infinite.
    let mut winner_index = 0;
    for (i, row) in table.iter().enumerate().skip(1) {
        if row.cv_risk < table[winner_index].cv_risk {
            winner_index = i;
        }
    }
    debug_assert!(table.iter().all(|r| table[winner_index].cv_risk <= r.cv_risk));

    let fitted = fit_learner(&sl.library[winner_index], rows, y, w, bounds).map_err(|e| {
        EngineError::AllLearnersFailed { message: format!("full-data refit failed: {e}") }
    })?;

    Ok(CvSelection { fitted, winner_index, table, folds_used: v })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::{LearnerSpec, OUTCOME_BOUNDS};
    use crate::seeding::derive_seed;
    use rand::Rng;

    fn unit_weights(n: usize) -> Vec<f64> {
        vec![1.0; n]
    }

    #[test]
    fn singleton_library_is_always_selected() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![(i % 2) as f64]).collect();
        let y: Vec<f64> = (0..20).map(|i| if i % 3 == 0 { 1.0 } else { 0.0 }).collect();
        let sl = SuperLearnerSpec::singleton(LearnerSpec::MeanOnly, 7);
        let sel = cv_select(&sl, &rows, &y, &unit_weights(20), OUTCOME_BOUNDS).unwrap();
        assert_eq!(sel.winner_index, 0);
        assert_eq!(sel.table.len(), 1);
        assert_eq!(sel.fitted.spec, LearnerSpec::MeanOnly);
    }

    #[test]
    fn selection_is_deterministic_in_the_seed() {
        let mut rng = stream(11, &[99]);
        let rows: Vec<Vec<f64>> =
            (0..60).map(|_| vec![rng.gen_range(0..2) as f64, rng.gen_range(0..2) as f64]).collect();
        let y: Vec<f64> = rows.iter().map(|r| if rng.gen::<f64>() < 0.3 + 0.4 * r[0] { 1.0 } else { 0.0 }).collect();
        let sl = SuperLearnerSpec {
            library: vec![LearnerSpec::MeanOnly, LearnerSpec::LogisticMainTerms],
            folds: Some(5),
            seed: 42,
        };
        let a = cv_select(&sl, &rows, &y, &unit_weights(60), OUTCOME_BOUNDS).unwrap();
        let b = cv_select(&sl, &rows, &y, &unit_weights(60), OUTCOME_BOUNDS).unwrap();
        assert_eq!(a.winner_index, b.winner_index);
        for (ra, rb) in a.table.iter().zip(&b.table) {
            assert_eq!(ra.cv_risk.to_bits(), rb.cv_risk.to_bits());
        }
    }

    #[test]
    fn duplicating_a_learner_later_cannot_change_the_winner() {
        let mut rng = stream(5, &[1]);
        let rows: Vec<Vec<f64>> = (0..80).map(|_| vec![rng.gen_range(0..2) as f64]).collect();
        let y: Vec<f64> =
            rows.iter().map(|r| if rng.gen::<f64>() < 0.2 + 0.5 * r[0] { 1.0 } else { 0.0 }).collect();
        let w = unit_weights(80);

        let base = SuperLearnerSpec {
            library: vec![LearnerSpec::LogisticMainTerms, LearnerSpec::MeanOnly],
            folds: Some(4),
            seed: 3,
        };
        let dup = SuperLearnerSpec {
            library: vec![
                LearnerSpec::LogisticMainTerms,
                LearnerSpec::MeanOnly,
                LearnerSpec::LogisticMainTerms,
            ],
            folds: Some(4),
            seed: 3,
        };
        let a = cv_select(&base, &rows, &y, &w, OUTCOME_BOUNDS).unwrap();
        let b = cv_select(&dup, &rows, &y, &w, OUTCOME_BOUNDS).unwrap();
        assert_eq!(a.winner_index, b.winner_index, "tie-break must keep the first occurrence");
        assert_eq!(b.table[0].cv_risk.to_bits(), b.table[2].cv_risk.to_bits());
    }

    #[test]
    fn winner_risk_is_minimal_over_the_table() {
        let mut rng = stream(8, &[2]);
        let rows: Vec<Vec<f64>> =
            (0..120).map(|_| vec![rng.gen_range(0..3) as f64, rng.gen_range(0..2) as f64]).collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| if rng.gen::<f64>() < 0.1 + 0.2 * r[0] + 0.1 * r[1] { 1.0 } else { 0.0 })
            .collect();
        let sl = SuperLearnerSpec::default_library(31);
        let sel = cv_select(&sl, &rows, &y, &unit_weights(120), OUTCOME_BOUNDS).unwrap();
        let winner = sel.table[sel.winner_index].cv_risk;
        for row in &sel.table {
            assert!(winner <= row.cv_risk, "{} beat the winner", row.learner);
        }
    }

    #[test]
    fn explicit_folds_larger_than_n_are_rejected() {
        let rows = vec![vec![0.0], vec![1.0], vec![0.0]];
        let y = vec![0.0, 1.0, 0.0];
        let sl = SuperLearnerSpec {
            library: vec![LearnerSpec::MeanOnly],
            folds: Some(10),
            seed: 0,
        };
        let err = cv_select(&sl, &rows, &y, &unit_weights(3), OUTCOME_BOUNDS).unwrap_err();
        assert!(matches!(err, EngineError::InvalidEstimatorConfig { .. }));
    }

    /// Monte Carlo check: under a DGP whose outcome depends strongly on an
    /// interaction, the pairwise-interaction learner should beat main-terms
    /// in at least 95 of 100 seeded runs at n=2000.
    #[test]
    fn interaction_dgp_selects_the_interaction_learner() {
        let mut wins = 0;
        for rep in 0..100u64 {
            let mut rng = stream(derive_seed(777, &[rep]), &[0]);
            let n = 2000;
            let mut rows = Vec::with_capacity(n);
            let mut y = Vec::with_capacity(n);
            for _ in 0..n {
                let x1 = rng.gen_range(0..2) as f64;
                let x2 = rng.gen_range(0..2) as f64;
                // logit p = -1 + 0.2 x1 + 0.2 x2 + 3 x1 x2: the cross term
                // dominates, so main-terms misfits the (1,1) cell badly.
                let eta = -1.0 + 0.2 * x1 + 0.2 * x2 + 3.0 * x1 * x2;
                let p = 1.0 / (1.0 + (-eta as f64).exp());
                y.push(if rng.gen::<f64>() < p { 1.0 } else { 0.0 });
                rows.push(vec![x1, x2]);
            }
            let sl = SuperLearnerSpec {
                library: vec![
                    LearnerSpec::LogisticMainTerms,
                    LearnerSpec::LogisticWithPairwiseInteractions,
                ],
                folds: Some(10),
                seed: derive_seed(778, &[rep]),
            };
            let sel = cv_select(&sl, &rows, &y, &unit_weights(n), OUTCOME_BOUNDS).unwrap();
            if sel.winner_index == 1 {
                wins += 1;
            }
        }
        assert!(wins >= 95, "interaction learner selected only {wins}/100 times");
    }
}
