//! Latent residuals z − λ̃ᵀθ̃, regenerated per snapshot by a short
//! conditional simulation of (Z, L, Θ) at the snapshot's parameters, since
//! full latent draws are not stored.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mcmc::{
    allocation_probs, conditional_means, draw_latent_row, draw_traits, Observed, Snapshot, Trace,
};
use crate::model::{ClusterFactor, ClusterParams, Thresholds};
use crate::rng::{Phase, StreamKey};
use crate::scalar::Real;
use crate::survey::{LatentLayout, ResponseMatrix, SurveySchema};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualOptions {
    /// 0-based rows to examine.
    pub households: Vec<usize>,
    /// Conditional sweeps before the residual is read off.
    pub sweeps: usize,
    /// Use at most this many snapshots, evenly spaced.
    pub max_snapshots: usize,
    pub seed: u64,
}

/// Residual draws of one latent dimension of one household.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSeries {
    pub household: usize,
    pub item: String,
    /// Latent dimension (0-based) within the full vector.
    pub dim: usize,
    pub values: Vec<f64>,
}

/// One residual vector per requested household at fixed parameters;
/// rows start in cluster `start[k]` with zero traits.
pub fn conditional_residuals<T: Real>(
    snapshot: &Snapshot<T>,
    y: &ResponseMatrix,
    schema: &SurveySchema,
    households: &[usize],
    start: &[usize],
    sweeps: usize,
    key: StreamKey,
) -> Result<Array2<f64>> {
    let layout = LatentLayout::new(schema);
    let obs = Observed { y, schema, layout: &layout };
    let params = ClusterParams { pi: snapshot.pi.clone(), loadings: snapshot.loadings.clone() };
    let thresholds = Thresholds { cuts: snapshot.cuts.clone() };
    let factors = ClusterFactor::all(&params)?;
    let dim = layout.dim();
    let q = params.n_traits();
    let g = params.n_groups();
    let rows = households
        .par_iter()
        .zip(start)
        .map(|(&i, &g0)| -> Result<Vec<f64>> {
            if i >= y.n_rows() || g0 >= g {
                return Err(Error::DataShape(format!("household {} out of range", i + 1)));
            }
            let mut rng = key.stream(i as u64);
            let mut z = vec![T::zero(); dim];
            let mut means = vec![T::zero(); dim];
            let mut theta = ndarray::Array1::<T>::zeros(q);
            let mut noise = vec![T::zero(); q];
            let mut scratch = vec![T::zero(); q];
            let mut probs = vec![0.0f64; g];
            let mut alloc = g0;
            for _ in 0..sweeps.max(1) {
                conditional_means(&params.loadings[alloc], theta.view(), &mut means);
                draw_latent_row(&mut z, &means, y.row(i), &thresholds, obs, &mut rng);
                let zv = ndarray::ArrayView1::from(&z[..]);
                allocation_probs(zv, &params, &factors, &mut scratch, &mut probs)?;
                alloc = crate::mcmc::draw_index(&probs, &mut rng);
                let out = theta.as_slice_mut().expect("contiguous");
                draw_traits(zv, &params.loadings[alloc], &factors[alloc], 1.0, out, &mut noise, &mut rng);
            }
            conditional_means(&params.loadings[alloc], theta.view(), &mut means);
            Ok(z.iter().zip(&means).map(|(a, b)| (*a - *b).as_f64()).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Array2::zeros((households.len(), dim));
    for (k, r) in rows.into_iter().enumerate() {
        out.row_mut(k).assign(&ndarray::Array1::from(r));
    }
    Ok(out)
}

/// Residual series for every latent dimension of the requested households.
pub fn bayesian_latent_residuals<T: Real>(
    trace: &Trace<T>,
    y: &ResponseMatrix,
    schema: &SurveySchema,
    options: &ResidualOptions,
) -> Result<Vec<ResidualSeries>> {
    let s = trace.n_snapshots();
    if s == 0 {
        return Err(Error::Config("trace has no snapshots".into()));
    }
    let layout = LatentLayout::new(schema);
    let hard: Vec<usize> = options
        .households
        .iter()
        .map(|&i| {
            if i >= trace.n_rows() {
                return Err(Error::DataShape(format!("household {} out of range", i + 1)));
            }
            Ok(crate::postprocess::argmax_first(trace.tallies.row(i).iter().copied()))
        })
        .collect::<Result<_>>()?;
    let take = options.max_snapshots.clamp(1, s);
    let mut series: Vec<ResidualSeries> = options
        .households
        .iter()
        .flat_map(|&i| {
            (0..layout.dim()).map(move |d| (i, d))
        })
        .map(|(i, d)| ResidualSeries {
            household: i,
            item: schema.item(layout.item_of_dim(d)).name.clone(),
            dim: d,
            values: Vec::with_capacity(take),
        })
        .collect();
    for k in 0..take {
        let idx = k * s / take;
        let key = StreamKey::with_tag(options.seed, idx as u64, Phase::Residual, 0);
        let res = conditional_residuals(&trace.snapshots[idx], y, schema, &options.households, &hard, options.sweeps, key)?;
        for (h, row) in res.rows().into_iter().enumerate() {
            for (d, &v) in row.iter().enumerate() {
                series[h * layout.dim() + d].values.push(v);
            }
        }
    }
    Ok(series)
}

/// Kolmogorov–Smirnov distance between the empirical law of `samples` and `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(k, &x)| {
            let f = cdf(x);
            (f - k as f64 / n).abs().max(((k + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}
