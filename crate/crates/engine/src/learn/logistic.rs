//! Weighted logistic regression by iteratively reweighted least squares.
//!
//! Plain Newton steps with two safeguards: step-halving when a step would
//! increase the deviance, and a small ridge added to the information
//! matrix when its Cholesky factorization fails (collinear columns).
//! Convergence is declared when either the coefficient step or the
//! deviance change drops below tolerance — the deviance criterion matters
//! under separation, where coefficients keep drifting along a direction
//! of quasi-complete separation while the fit itself has stabilized.

use nalgebra::{DMatrix, DVector};

pub(crate) struct IrlsFit {
    /// Coefficients, intercept first.
    pub beta: Vec<f64>,
    pub converged: bool,
}

/// Numerically stable logistic function.
pub(crate) fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Fit P(y=1 | x) = expit(b0 + b·x) with observation weights.
/// `rows` excludes the intercept. Returns `None` when the normal
/// equations cannot be solved even with ridge escalation.
pub(crate) fn fit(
    rows: &[Vec<f64>],
    y: &[f64],
    w: &[f64],
    tol: f64,
    max_iter: usize,
) -> Option<IrlsFit> {
    let n = rows.len();
    let p = rows.first().map(|r| r.len()).unwrap_or(0) + 1;
    let x = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { rows[i][j - 1] });
    let yv = DVector::from_column_slice(y);
    let wv = DVector::from_column_slice(w);

    let mut beta = DVector::zeros(p);
    let mut dev = deviance(&x, &yv, &wv, &beta);
    let mut converged = false;

    for _ in 0..max_iter {
        let eta = &x * &beta;
        let probs = eta.map(expit);

        // grad = Xᵀ (w ⊙ (y − p)); info = Xᵀ diag(w p (1−p)) X.
        let resid = DVector::from_fn(x.nrows(), |i, _| wv[i] * (yv[i] - probs[i]));
        let grad = x.transpose() * resid;
        let mut sx = x.clone();
        for i in 0..x.nrows() {
            let s = wv[i] * probs[i] * (1.0 - probs[i]);
            for j in 0..p {
                sx[(i, j)] *= s;
            }
        }
        let info = x.transpose() * sx;

        let delta = solve_spd(info, grad)?;

        // Step-halving keeps the deviance monotone.
        let mut step = 1.0;
        let mut cand = &beta + &delta;
        let mut cand_dev = deviance(&x, &yv, &wv, &cand);
        let mut halvings = 0;
        while (!cand_dev.is_finite() || cand_dev > dev + 1e-10) && halvings < 12 {
            step *= 0.5;
            cand = &beta + delta.scale(step);
            cand_dev = deviance(&x, &yv, &wv, &cand);
            halvings += 1;
        }
        if !cand_dev.is_finite() {
            return None;
        }

        let max_step = delta.scale(step).amax();
        let dev_change = (dev - cand_dev).abs();
        beta = cand;
        dev = cand_dev;

        if max_step < tol || dev_change < tol * (0.1 + dev.abs()) {
            converged = true;
            break;
        }
    }

    Some(IrlsFit { beta: beta.iter().copied().collect(), converged })
}

fn deviance(x: &DMatrix<f64>, y: &DVector<f64>, w: &DVector<f64>, beta: &DVector<f64>) -> f64 {
    let eta = x * beta;
    let mut dev = 0.0;
    for i in 0..x.nrows() {
        let p = expit(eta[i]);
        let ll = if y[i] > 0.5 { p.max(1e-300).ln() } else { (1.0 - p).max(1e-300).ln() };
        dev -= 2.0 * w[i] * ll;
    }
    dev
}

/// Cholesky solve with ridge escalation for rank-deficient designs.
fn solve_spd(info: DMatrix<f64>, grad: DVector<f64>) -> Option<DVector<f64>> {
    let p = info.nrows();
    let scale = 1.0 + info.trace() / p as f64;
    let mut ridge = 0.0;
    for _ in 0..6 {
        let mut m = info.clone();
        for j in 0..p {
            m[(j, j)] += ridge;
        }
        if let Some(ch) = m.cholesky() {
            return Some(ch.solve(&grad));
        }
        ridge = if ridge == 0.0 { 1e-10 * scale } else { ridge * 100.0 };
        if ridge > 1e-2 * scale {
            break;
        }
    }
    None
}
