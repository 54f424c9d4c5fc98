use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::mcmc::Trace;
use crate::scalar::Real;

/// Posterior summaries of a relabeled, aligned trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport<T> {
    pub n_snapshots: usize,
    /// N×G allocation frequencies; rows sum to 1.
    pub membership_probs: Array2<f64>,
    /// 0-based row argmax, ties to the lowest cluster.
    pub hard_assignment: Vec<usize>,
    /// 1 − max_g P(cluster g) per row.
    pub uncertainties: Vec<f64>,
    pub cluster_sizes: Vec<usize>,
    pub pi_mean: Vec<T>,
    pub loadings_mean: Vec<Array2<T>>,
    pub cuts_mean: Vec<Vec<T>>,
}

pub(crate) fn argmax_first<I: IntoIterator<Item = V>, V: PartialOrd>(values: I) -> usize {
    let mut best = 0;
    let mut best_v: Option<V> = None;
    for (k, v) in values.into_iter().enumerate() {
        if best_v.as_ref().is_none_or(|b| v > *b) {
            best = k;
            best_v = Some(v);
        }
    }
    best
}

/// Averages snapshots and turns tallies into membership probabilities and
/// a hard clustering.
pub fn summarize<T: Real>(trace: &Trace<T>) -> ClusterReport<T> {
    let g = trace.n_groups;
    let membership_probs = trace.membership_probs();
    let hard_assignment: Vec<usize> = trace
        .tallies
        .rows()
        .into_iter()
        .map(|r| argmax_first(r.iter().copied()))
        .collect();
    let uncertainties = membership_probs
        .rows()
        .into_iter()
        .map(|r| crate::diagnostics::clustering_uncertainty(r.as_slice().expect("contiguous rows")))
        .collect();
    let mut cluster_sizes = vec![0usize; g];
    for &a in &hard_assignment {
        cluster_sizes[a] += 1;
    }
    let s = trace.n_snapshots();
    let (pi_mean, loadings_mean, cuts_mean) = if s == 0 {
        (Vec::new(), Vec::new(), Vec::new())
    } else {
        let first = &trace.snapshots[0];
        let mut pi = vec![0.0f64; g];
        let mut lt: Vec<Array2<f64>> = first.loadings.iter().map(|l| Array2::zeros(l.dim())).collect();
        let mut cuts: Vec<Vec<f64>> = first.cuts.iter().map(|c| vec![0.0; c.len()]).collect();
        for snap in &trace.snapshots {
            for k in 0..g {
                pi[k] += snap.pi[k].as_f64();
                lt[k].zip_mut_with(&snap.loadings[k], |a, &b| *a += b.as_f64());
            }
            for (acc, c) in cuts.iter_mut().zip(&snap.cuts) {
                for (a, &b) in acc.iter_mut().zip(c) {
                    *a += b.as_f64();
                }
            }
        }
        let sf = s as f64;
        (
            pi.iter().map(|&v| T::of(v / sf)).collect(),
            lt.iter().map(|l| l.mapv(|v| T::of(v / sf))).collect(),
            cuts.iter().map(|c| c.iter().map(|&v| T::of(v / sf)).collect()).collect(),
        )
    };
    ClusterReport {
        n_snapshots: s,
        membership_probs,
        hard_assignment,
        uncertainties,
        cluster_sizes,
        pi_mean,
        loadings_mean,
        cuts_mean,
    }
}
