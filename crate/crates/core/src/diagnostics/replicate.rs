use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::patterns::{tsspr, PatternTable};
use crate::error::{Error, Result};
use crate::mcmc::{Snapshot, Trace};
use crate::model::{simulate_dataset, ClusterParams, Thresholds};
use crate::scalar::Real;
use crate::survey::{ResponseMatrix, SurveySchema};

/// Simulates a data set of `n` rows at the parameters of one snapshot.
pub fn posterior_predictive_replicate<T: Real>(
    snapshot: &Snapshot<T>,
    schema: &SurveySchema,
    n: usize,
    seed: u64,
) -> Result<ResponseMatrix> {
    let params = ClusterParams { pi: snapshot.pi.clone(), loadings: snapshot.loadings.clone() };
    let thresholds = Thresholds { cuts: snapshot.cuts.clone() };
    Ok(simulate_dataset(schema, &params, &thresholds, n, seed)?.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TssprSummary {
    pub truncation: usize,
    pub replicates: usize,
    pub values: Vec<f64>,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

impl TssprSummary {
    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// tSSPR of the observed data against `replicates` posterior-predictive
/// data sets; replicate `r` uses snapshot `r·S/R` and seed `seed + r`.
pub fn tsspr_replicates<T: Real>(
    trace: &Trace<T>,
    y: &ResponseMatrix,
    schema: &SurveySchema,
    truncation: usize,
    replicates: usize,
    seed: u64,
) -> Result<TssprSummary> {
    let s = trace.n_snapshots();
    if s == 0 || replicates == 0 || truncation == 0 {
        return Err(Error::Config("tSSPR needs snapshots, replicates and T ≥ 1".into()));
    }
    let observed = PatternTable::from_responses(y);
    let n = y.n_rows();
    let mut values = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let snap = &trace.snapshots[r * s / replicates];
            let rep = posterior_predictive_replicate(snap, schema, n, seed.wrapping_add(r as u64))?;
            Ok(tsspr(&observed, &PatternTable::from_responses(&rep), truncation))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    let summary = TssprSummary {
        truncation,
        replicates,
        median: quantile_sorted(&sorted, 0.5),
        q1: quantile_sorted(&sorted, 0.25),
        q3: quantile_sorted(&sorted, 0.75),
        values: std::mem::take(&mut values),
    };
    Ok(summary)
}
