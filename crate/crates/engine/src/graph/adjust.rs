//! Minimal adjustment-set discovery.
//!
//! A candidate set Z is valid when
//!
//! 1. Z blocks every backdoor path from treatment A to outcome Y —
//!    checked as d-separation of A and Y given Z in the graph with A's
//!    outgoing edges removed (only backdoor paths survive the cut, and
//!    because Z contains no descendant of A, blocking status is
//!    unchanged by the cut); and
//! 2. when a censoring node C exists, C is d-separated from Y given
//!    Z ∪ {A} in the graph with C's outgoing edges removed.
//!
//! Candidates are drawn from the measured (non-latent) non-descendants of
//! A, excluding the treatment, outcome, and censoring nodes themselves.
//! The search enumerates subsets exhaustively by size, pruning supersets
//! of already-accepted sets, so the result is exactly the valid sets with
//! no valid strict subset, ordered by size then lexicographically.

use crate::error::{EngineError, Result};
use crate::graph::{dsep, CausalGraph, Role};

/// Exhaustive subset search is exponential; beyond this many candidates
/// the graph is not desk-scale and the search refuses to run.
pub const POOL_CAP: usize = 20;

/// All minimal valid adjustment sets, each as a lexicographically sorted
/// id list. Empty result means the estimand is not identified by
/// covariate adjustment on this graph.
pub fn find_adjustment_sets(g: &CausalGraph) -> Result<Vec<Vec<String>>> {
    let t = g
        .treatment()
        .ok_or_else(|| EngineError::MissingRole { role: Role::Treatment.as_str().into() })?;
    let y = g
        .outcome()
        .ok_or_else(|| EngineError::MissingRole { role: Role::Outcome.as_str().into() })?;
    let c = g.censoring();

    let desc_t = g.descendants(t); // includes t itself
    let mut pool: Vec<usize> = (0..g.node_count())
        .filter(|&i| !g.nodes()[i].latent && !desc_t[i] && i != y && Some(i) != c)
        .collect();
    if pool.len() > POOL_CAP {
        return Err(EngineError::PoolTooLarge { size: pool.len(), cap: POOL_CAP });
    }
    // Lexicographic id order drives both within-set ordering and the
    // order of the returned sets.
    pool.sort_by(|&a, &b| g.node_id(a).cmp(g.node_id(b)));

    let g_backdoor = g.without_outgoing(t);
    let g_censor = c.map(|ci| g.without_outgoing(ci));

    let mut accepted: Vec<Vec<usize>> = Vec::new();
    let mut in_z = vec![false; g.node_count()];

    for k in 0..=pool.len() {
        for combo in Combinations::new(pool.len(), k) {
            let set: Vec<usize> = combo.iter().map(|&i| pool[i]).collect();
            // A superset of an accepted set cannot be minimal.
            if accepted.iter().any(|a| is_subset(a, &set)) {
                continue;
            }
            in_z.iter_mut().for_each(|b| *b = false);
            for &ix in &set {
                in_z[ix] = true;
            }
            let backdoor_ok = !dsep::d_connected_ix(&g_backdoor, t, y, &in_z);
            if !backdoor_ok {
                continue;
            }
            let censor_ok = match (&g_censor, c) {
                (Some(gc), Some(ci)) => {
                    in_z[t] = true; // condition on A as well
                    let ok = !dsep::d_connected_ix(gc, ci, y, &in_z);
                    in_z[t] = false;
                    ok
                }
                _ => true,
            };
            if censor_ok {
                accepted.push(set);
            }
        }
    }

    Ok(accepted
        .into_iter()
        .map(|set| set.into_iter().map(|ix| g.node_id(ix).to_string()).collect())
        .collect())
}

fn is_subset(a: &[usize], b: &[usize]) -> bool {
    a.iter().all(|x| b.contains(x))
}

/// Lexicographic k-combinations of 0..n.
struct Combinations {
    n: usize,
    k: usize,
    next: Option<Vec<usize>>,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Combinations {
        let next = if k <= n { Some((0..k).collect()) } else { None };
        Combinations { n, k, next }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let cur = self.next.clone()?;
        // Advance: find the rightmost index that can move.
        let mut idx = cur.clone();
        let mut i = self.k;
        loop {
            if i == 0 {
                self.next = None;
                break;
            }
            i -= 1;
            if idx[i] < self.n - (self.k - i) {
                idx[i] += 1;
                for j in i + 1..self.k {
                    idx[j] = idx[j - 1] + 1;
                }
                self.next = Some(idx);
                break;
            }
        }
        Some(cur)
    }
}
