//! Block Metropolis–Hastings for the interior cut points of ordinal items.
//!
//! The target integrates the latent column out, so the likelihood of a
//! candidate vector is a product of interval probabilities. After an
//! accepted move the latent column is redrawn under the new cuts, which
//! keeps every row consistent with its observed level.

use ndarray::{Array2, Axis};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::updates::{draw_ordinal, Observed, SweepKey};
use crate::model::{ClusterParams, Thresholds};
use crate::rng::{open_unit, Phase};
use crate::scalar::Real;
use crate::special::log_interval_prob;
use crate::truncnorm::{sample_truncnorm_scaled, TruncInterval};

const CHUNK: usize = 2048;

/// Σ_i ln P(y_i | cuts, m_i), summed in fixed chunks so the result does not
/// depend on the worker count.
pub fn threshold_log_likelihood(levels: &[u16], means: &[f64], cuts: &[f64]) -> f64 {
    let partial: Vec<f64> = levels
        .par_chunks(CHUNK)
        .zip(means.par_chunks(CHUNK))
        .map(|(ys, ms)| {
            ys.iter()
                .zip(ms)
                .map(|(&y, &m)| {
                    let y = y as usize;
                    let lo = if y == 1 { f64::NEG_INFINITY } else { cuts[y - 2] };
                    let hi = if y > cuts.len() { f64::INFINITY } else { cuts[y - 1] };
                    if lo >= hi {
                        f64::NEG_INFINITY
                    } else {
                        log_interval_prob(lo - m, hi - m)
                    }
                })
                .sum::<f64>()
        })
        .collect();
    partial.iter().sum()
}

/// Sequential truncated proposal: v_1 = 0 and, for k ≥ 2,
/// v_k ~ N(γ_k, σ²) restricted to (v_{k−1}, γ_{k+1}).
/// Returns the candidate and ln q(γ | v) − ln q(v | γ).
pub fn propose_thresholds<R: Rng + ?Sized>(current: &[f64], sd: f64, rng: &mut R) -> (Vec<f64>, f64) {
    let n = current.len();
    let mut v = current.to_vec();
    for k in 1..n {
        let upper = if k + 1 < n { current[k + 1] } else { f64::INFINITY };
        v[k] = sample_truncnorm_scaled(current[k], sd, TruncInterval::new(v[k - 1], upper), rng);
    }
    let log_q = proposal_log_ratio(current, &v, sd);
    (v, log_q)
}

/// ln q(γ | v) − ln q(v | γ) for the sequential truncated proposal.
pub fn proposal_log_ratio(current: &[f64], candidate: &[f64], sd: f64) -> f64 {
    let n = current.len();
    let next = |c: &[f64], k: usize| if k + 1 < n { c[k + 1] } else { f64::INFINITY };
    (1..n)
        .map(|k| {
            let fwd = log_interval_prob(
                (candidate[k - 1] - current[k]) / sd,
                (next(current, k) - current[k]) / sd,
            );
            let rev = log_interval_prob(
                (current[k - 1] - candidate[k]) / sd,
                (next(candidate, k) - candidate[k]) / sd,
            );
            fwd - rev
        })
        .sum()
}

/// Full log acceptance ratio of moving item cuts from `current` to `candidate`.
pub fn threshold_log_ratio(
    levels: &[u16],
    means: &[f64],
    current: &[f64],
    candidate: &[f64],
    sd: f64,
    upper: Option<f64>,
) -> f64 {
    if let Some(u) = upper {
        if candidate.iter().any(|&c| c >= u) {
            return f64::NEG_INFINITY;
        }
    }
    threshold_log_likelihood(levels, means, candidate) - threshold_log_likelihood(levels, means, current)
        + proposal_log_ratio(current, candidate, sd)
}

/// Per-item proposal scale and acceptance bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdTuner {
    pub log_sigma2: Vec<f64>,
    pub attempts: Vec<u64>,
    pub accepts: Vec<u64>,
    pub burn_attempts: Vec<u64>,
    pub burn_accepts: Vec<u64>,
}

impl ThresholdTuner {
    pub fn new(n_ordered: usize, sigma2: f64) -> Self {
        ThresholdTuner {
            log_sigma2: vec![sigma2.ln(); n_ordered],
            attempts: vec![0; n_ordered],
            accepts: vec![0; n_ordered],
            burn_attempts: vec![0; n_ordered],
            burn_accepts: vec![0; n_ordered],
        }
    }

    pub fn sigma2(&self, j: usize) -> f64 {
        self.log_sigma2[j].exp()
    }

    /// Post-burn-in acceptance rate, `None` if the item was never proposed.
    pub fn rate(&self, j: usize) -> Option<f64> {
        (self.attempts[j] > 0).then(|| self.accepts[j] as f64 / self.attempts[j] as f64)
    }

    fn record(&mut self, j: usize, accepted: bool, burning: bool, adapt: Option<f64>) {
        if burning {
            self.burn_attempts[j] += 1;
            self.burn_accepts[j] += accepted as u64;
            if let Some(target) = adapt {
                let t = self.burn_attempts[j] as f64;
                let step = 1.0 / (1.0 + t / 10.0).powf(0.6);
                let a = if accepted { 1.0 } else { 0.0 };
                self.log_sigma2[j] = (self.log_sigma2[j] + step * (a - target)).clamp(-30.0, 5.0);
            }
        } else {
            self.attempts[j] += 1;
            self.accepts[j] += accepted as u64;
        }
    }
}

pub(crate) struct MhContext<'a, T> {
    pub obs: Observed<'a>,
    pub params: &'a ClusterParams<T>,
    pub theta: &'a Array2<T>,
    pub alloc: &'a [usize],
    pub upper: Option<f64>,
    pub burning: bool,
    pub adapt_target: Option<f64>,
}

/// One MH step per ordinal item with at least one free cut. Returns the
/// number of accepted items.
pub(crate) fn update_thresholds_mh<T: Real>(
    ctx: &MhContext<'_, T>,
    thresholds: &mut Thresholds<T>,
    z: &mut Array2<T>,
    tuner: &mut ThresholdTuner,
    key: SweepKey,
) -> usize {
    let n = ctx.alloc.len();
    let mut accepted_items = 0;
    let mut means = vec![0.0f64; n];
    let mut levels = vec![0u16; n];
    for j in 0..ctx.obs.schema.n_ordered() {
        if thresholds.cuts[j].len() < 2 {
            continue;
        }
        let d = ctx.obs.layout.range(j).start;
        for i in 0..n {
            let row = ctx.params.loadings[ctx.alloc[i]].row(d);
            let mut m = row[0].as_f64();
            for (k, &t) in ctx.theta.row(i).iter().enumerate() {
                m += row[k + 1].as_f64() * t.as_f64();
            }
            means[i] = m;
            levels[i] = ctx.obs.y.get(i, j);
        }
        let current: Vec<f64> = thresholds.cuts[j].iter().map(|c| c.as_f64()).collect();
        let sd = tuner.sigma2(j).sqrt();
        let mut rng = key.tagged(Phase::Thresholds, j as u64).stream(0);
        let (candidate, _) = propose_thresholds(&current, sd, &mut rng);
        let cast: Vec<T> = candidate.iter().map(|&c| T::of(c)).collect();
        let representable = cast.windows(2).all(|w| w[0] < w[1]);
        let log_r = if representable {
            threshold_log_ratio(&levels, &means, &current, &candidate, sd, ctx.upper)
        } else {
            f64::NEG_INFINITY
        };
        let accepted = log_r >= 0.0 || open_unit(&mut rng).ln() < log_r;
        tuner.record(j, accepted, ctx.burning, ctx.adapt_target);
        if accepted {
            accepted_items += 1;
            thresholds.cuts[j] = cast;
            redraw_column(z, d, &means, &levels, &thresholds.cuts[j], key.tagged(Phase::ThresholdLatent, j as u64));
        }
    }
    accepted_items
}

fn redraw_column<T: Real>(
    z: &mut Array2<T>,
    d: usize,
    means: &[f64],
    levels: &[u16],
    cuts: &[T],
    key: crate::rng::StreamKey,
) {
    z.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut row)| {
            let mut rng = key.stream(i as u64);
            row[d] = draw_ordinal(T::of(means[i]), cuts, levels[i] as usize, &mut rng);
        });
}
