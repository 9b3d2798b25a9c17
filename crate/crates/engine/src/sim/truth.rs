//! True causal contrasts of a data-generating process.
//!
//! The truth is computed by exact enumeration: force the treatment node
//! to each arm, force censoring to 0, and sum the outcome probability
//! over every configuration of the remaining nodes, each weighted by its
//! probability under the DGP. All nodes are Bernoulli, so the sum has
//! 2^k terms for k non-intervened nodes — exact, but exponential in the
//! node count (fine for the handful of nodes a study DGP declares).
//!
//! [`true_estimand_mc`] is the large-sample fallback for processes where
//! enumeration is unaffordable: it averages the outcome probability over
//! simulated configurations, sharing one uniform draw per node between
//! the two arms, and reports a Monte Carlo standard error alongside the
//! estimate.

use crate::error::{EngineError, Result};
use crate::estimand::{CausalEstimand, Contrast};
use crate::graph::Role;
use crate::seeding::{purpose, stream};
use crate::sim::parse::DgpSpec;

use rand::Rng;

/// Draw count used when the Monte Carlo fallback is requested without an
/// explicit budget (the CLI's `--approx-truth` path).
pub const MC_FALLBACK_DRAWS: usize = 10_000_000;

/// Indices of the intervened nodes, validated against the estimand.
struct Intervention {
    treatment: usize,
    outcome: usize,
    censoring: Option<usize>,
}

fn intervention(dgp: &DgpSpec, ce: &CausalEstimand) -> Result<Intervention> {
    let treatment = dgp.require_role(Role::Treatment)?;
    let outcome = dgp.require_role(Role::Outcome)?;
    let outcome_name = &dgp.nodes()[outcome].name;
    if *outcome_name != ce.outcome_node {
        return Err(EngineError::ConfigInvalid {
            message: format!(
                "estimand outcome node `{}` does not match the DGP outcome node `{}`",
                ce.outcome_node, outcome_name
            ),
        });
    }
    Ok(Intervention { treatment, outcome, censoring: dgp.role_index(Role::Censoring) })
}

/// P(Y = 1) under do(A = a, C = 0), by exact enumeration.
fn arm_risk(dgp: &DgpSpec, iv: &Intervention, a: f64) -> f64 {
    let nodes = dgp.nodes();
    let background: Vec<usize> = (0..nodes.len())
        .filter(|&ix| ix != iv.treatment && ix != iv.outcome && Some(ix) != iv.censoring)
        .collect();
    let k = background.len();

    let mut total = 0.0;
    let mut values = vec![0.0; nodes.len()];
    for config in 0u64..(1u64 << k) {
        let mut weight = 1.0;
        let mut outcome_prob = 0.0;
        for ix in 0..nodes.len() {
            if ix == iv.treatment {
                values[ix] = a;
            } else if Some(ix) == iv.censoring {
                values[ix] = 0.0;
            } else if ix == iv.outcome {
                outcome_prob = dgp.probability(ix, &values);
                // Descendants of the outcome see Y = 1: we are summing
                // P(Y=1, config), and their probabilities sum to 1 over
                // their own configurations, so they cancel exactly.
                values[ix] = 1.0;
            } else {
                let pos = background.iter().position(|&b| b == ix).expect("background node");
                let bit = (config >> pos) & 1;
                let p = dgp.probability(ix, &values);
                values[ix] = bit as f64;
                weight *= if bit == 1 { p } else { 1.0 - p };
            }
        }
        total += weight * outcome_prob;
    }
    total
}

fn contrast_value(contrast: Contrast, p1: f64, p0: f64) -> f64 {
    match contrast {
        Contrast::RiskDifference => p1 - p0,
        // Arm risks are strictly positive here: every Bernoulli parameter
        // lies in (0, 1), so no enumeration weight or outcome probability
        // can vanish.
        Contrast::RiskRatio => p1 / p0,
    }
}

/// The true value of the causal estimand under a DGP, by exact
/// enumeration of all binary node configurations.
pub fn true_estimand(dgp: &DgpSpec, ce: &CausalEstimand) -> Result<f64> {
    let iv = intervention(dgp, ce)?;
    let p1 = arm_risk(dgp, &iv, 1.0);
    let p0 = arm_risk(dgp, &iv, 0.0);
    Ok(contrast_value(ce.contrast, p1, p0))
}

/// Monte Carlo approximation of the true estimand: `(estimate, mc_se)`.
///
/// Each draw realizes the non-intervened nodes once per arm, reusing one
/// uniform per node across arms (common random numbers), and accumulates
/// the outcome *probability* rather than a sampled outcome — both choices
/// cut the Monte Carlo variance without biasing the mean.
pub fn true_estimand_mc(
    dgp: &DgpSpec,
    ce: &CausalEstimand,
    draws: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if draws < 2 {
        return Err(EngineError::ConfigInvalid {
            message: format!("Monte Carlo truth needs at least 2 draws, got {draws}"),
        });
    }
    let iv = intervention(dgp, ce)?;
    let nodes = dgp.nodes();
    let mut rng = stream(seed, &[purpose::SIM_DATA]);

    // Accumulate sums for both arm means and their covariance: the
    // delta-method SE of the ratio needs all five moments.
    let (mut s1, mut s0, mut s11, mut s00, mut s10) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut uniforms = vec![0.0; nodes.len()];
    let mut v1 = vec![0.0; nodes.len()];
    let mut v0 = vec![0.0; nodes.len()];
    for _ in 0..draws {
        for u in uniforms.iter_mut() {
            *u = rng.gen::<f64>();
        }
        let mut p_arm = [0.0; 2];
        for (arm, values) in [(1.0, &mut v1), (0.0, &mut v0)] {
            for ix in 0..nodes.len() {
                if ix == iv.treatment {
                    values[ix] = arm;
                } else if Some(ix) == iv.censoring {
                    values[ix] = 0.0;
                } else if ix == iv.outcome {
                    p_arm[arm as usize] = dgp.probability(ix, values);
                    values[ix] = 1.0;
                } else {
                    let p = dgp.probability(ix, values);
                    values[ix] = if uniforms[ix] < p { 1.0 } else { 0.0 };
                }
            }
        }
        let (p1, p0) = (p_arm[1], p_arm[0]);
        s1 += p1;
        s0 += p0;
        s11 += p1 * p1;
        s00 += p0 * p0;
        s10 += p1 * p0;
    }

    let m = draws as f64;
    let (m1, m0) = (s1 / m, s0 / m);
    // Sample variances and covariance of the per-draw arm probabilities.
    let var1 = (s11 - m * m1 * m1) / (m - 1.0);
    let var0 = (s00 - m * m0 * m0) / (m - 1.0);
    let cov = (s10 - m * m1 * m0) / (m - 1.0);

    let (value, se) = match ce.contrast {
        Contrast::RiskDifference => {
            let var = (var1 + var0 - 2.0 * cov) / m;
            (m1 - m0, var.max(0.0).sqrt())
        }
        Contrast::RiskRatio => {
            let r = m1 / m0;
            // Delta method on (m1, m0) ↦ m1/m0.
            let var = (var1 / (m0 * m0) + var0 * (m1 * m1) / (m0 * m0 * m0 * m0)
                - 2.0 * cov * m1 / (m0 * m0 * m0))
                / m;
            (r, var.max(0.0).sqrt())
        }
    };
    Ok((value, se))
}
