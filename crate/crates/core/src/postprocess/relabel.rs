//! Label switching: choose, per snapshot, the permutation of cluster labels
//! whose classification probabilities are closest in Kullback–Leibler
//! divergence to the running consensus.

use itertools::Itertools;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mcmc::Trace;
use crate::scalar::Real;

const LOG_FLOOR: f64 = 1e-300;
pub const MAX_RELABEL_ITERATIONS: usize = 100;

/// `cost[g][h]` = −Σ_i P_{ih} ln Q_{ig}: the price of showing raw label `h`
/// as consensus label `g`.
pub fn relabel_cost<F>(n_rows: usize, n_groups: usize, prob: F, log_consensus: &Array2<f64>) -> Array2<f64>
where
    F: Fn(usize, usize) -> f64,
{
    let mut cost = Array2::<f64>::zeros((n_groups, n_groups));
    for i in 0..n_rows {
        for h in 0..n_groups {
            let p = prob(i, h);
            if p == 0.0 {
                continue;
            }
            for g in 0..n_groups {
                cost[[g, h]] -= p * log_consensus[[i, g]];
            }
        }
    }
    cost
}

/// Exhaustive search over the G! assignments; ties keep the first
/// permutation in lexicographic order, so the identity wins when costs are equal.
pub fn best_permutation(cost: &Array2<f64>) -> Vec<usize> {
    let g = cost.nrows();
    let mut best: Vec<usize> = (0..g).collect();
    let mut best_cost: f64 = (0..g).map(|k| cost[[k, k]]).sum();
    for perm in (0..g).permutations(g) {
        let c: f64 = perm.iter().enumerate().map(|(k, &h)| cost[[k, h]]).sum();
        if c < best_cost - 1e-12 * best_cost.abs().max(1.0) {
            best_cost = c;
            best = perm;
        }
    }
    best
}

pub(crate) fn log_floor(q: &Array2<f64>) -> Array2<f64> {
    q.mapv(|v| v.max(LOG_FLOOR).ln())
}

/// Streaming version used while the chain runs: each snapshot is matched to
/// the mean of the already relabeled ones.
#[derive(Debug, Clone)]
pub struct OnlineRelabeler {
    sum: Array2<f64>,
    count: usize,
}

impl OnlineRelabeler {
    pub fn new(n_rows: usize, n_groups: usize) -> Self {
        OnlineRelabeler { sum: Array2::zeros((n_rows, n_groups)), count: 0 }
    }

    /// Chooses the permutation for `probs` (N×G) and folds the permuted
    /// probabilities into the consensus.
    pub fn assign(&mut self, probs: &Array2<f64>) -> Vec<usize> {
        let (n, g) = probs.dim();
        let perm = if self.count == 0 || g == 1 {
            (0..g).collect()
        } else {
            let log_q = log_floor(&(&self.sum / self.count as f64));
            best_permutation(&relabel_cost(n, g, |i, h| probs[[i, h]], &log_q))
        };
        for (k, &h) in perm.iter().enumerate() {
            let mut col = self.sum.column_mut(k);
            col += &probs.column(h);
        }
        self.count += 1;
        perm
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelabelOutcome {
    pub converged: bool,
    pub iterations: usize,
    /// Permutation applied to each snapshot by this pass.
    pub permutations: Vec<Vec<usize>>,
    pub changed_snapshots: usize,
}

/// Batch fixed-point relabeling over retained class probabilities, capped
/// at `max_iterations`. The first snapshot keeps its labels.
pub fn relabel_stephens<T: Real>(trace: &mut Trace<T>, max_iterations: usize) -> Result<RelabelOutcome> {
    let g = trace.n_groups;
    let s = trace.n_snapshots();
    let identity: Vec<usize> = (0..g).collect();
    if g == 1 || s == 0 {
        return Ok(RelabelOutcome {
            converged: true,
            iterations: 0,
            permutations: vec![identity; s],
            changed_snapshots: 0,
        });
    }
    let probs = &trace
        .retained
        .as_ref()
        .ok_or_else(|| Error::Config("relabeling needs retained class probabilities".into()))?
        .class_probs;
    let n = trace.n_rows();
    // Start from a match to the first snapshot: averaging raw labels can be
    // exactly symmetric and leave no signal for the first pass.
    let first = log_floor(&probs[0].mapv(|v| v as f64));
    let mut perms: Vec<Vec<usize>> = probs
        .iter()
        .map(|p| best_permutation(&relabel_cost(n, g, |i, h| p[[i, h]] as f64, &first)))
        .collect();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iterations {
        iterations += 1;
        let mut mean = Array2::<f64>::zeros((n, g));
        for (p, perm) in probs.iter().zip(&perms) {
            for (k, &h) in perm.iter().enumerate() {
                mean.column_mut(k).zip_mut_with(&p.column(h), |m, &v| *m += v as f64);
            }
        }
        mean /= s as f64;
        let log_q = log_floor(&mean);
        let next: Vec<Vec<usize>> = probs
            .iter()
            .map(|p| best_permutation(&relabel_cost(n, g, |i, h| p[[i, h]] as f64, &log_q)))
            .collect();
        if next == perms {
            converged = true;
            break;
        }
        perms = next;
    }
    if !converged {
        log::warn!("relabeling stopped after {max_iterations} iterations without reaching a fixed point");
    }
    let first = perms[0].clone();
    let mut inv_first = vec![0usize; g];
    for (k, &h) in first.iter().enumerate() {
        inv_first[h] = k;
    }
    let anchored: Vec<Vec<usize>> = perms
        .iter()
        .map(|p| (0..g).map(|k| p[inv_first[k]]).collect())
        .collect();
    let changed = anchored.iter().filter(|p| **p != identity).count();
    trace.apply_permutations(&anchored)?;
    Ok(RelabelOutcome { converged, iterations, permutations: anchored, changed_snapshots: changed })
}
