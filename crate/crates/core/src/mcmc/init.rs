use ndarray::{Array2, Axis};
use rand::Rng;
use rayon::prelude::*;

use super::updates::{update_item_params, update_latent, LoadingPrior, Observed, SweepKey};
use super::ModelState;
use crate::error::Result;
use crate::model::{ClusterParams, LatentState, Thresholds};
use crate::rng::{open_unit, std_normal, Phase};
use crate::scalar::Real;
use crate::special::norm_ppf;

const MIN_GAP: f64 = 0.05;
const KMODES_ROUNDS: usize = 25;

/// Cut points at standard-normal quantiles of the cumulative level
/// frequencies, shifted so the first cut is 0. Consecutive cuts are kept at
/// least `MIN_GAP` apart so every level interval is nonempty.
pub fn initial_thresholds<T: Real>(obs: Observed<'_>) -> Thresholds<T> {
    let n = obs.y.n_rows() as f64;
    let lo = (0.5 / n).min(0.01);
    let cuts = (0..obs.schema.n_ordered())
        .map(|j| {
            let k = obs.schema.item(j).n_levels();
            if k == 2 {
                return vec![T::zero()];
            }
            let mut counts = vec![0usize; k];
            for &y in obs.y.values().column(j) {
                counts[y as usize - 1] += 1;
            }
            let mut cum = 0usize;
            let qs: Vec<f64> = counts[..k - 1]
                .iter()
                .map(|&c| {
                    cum += c;
                    norm_ppf((cum as f64 / n).clamp(lo, 1.0 - lo))
                })
                .collect();
            let mut out = Vec::with_capacity(k - 1);
            let mut prev = 0.0;
            for (idx, q) in qs.iter().enumerate() {
                let v = if idx == 0 { 0.0 } else { (q - qs[0]).max(prev + MIN_GAP) };
                out.push(T::of(v));
                prev = v;
            }
            out
        })
        .collect();
    Thresholds { cuts }
}

fn hamming(a: &[u16], b: &[u16]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// k-modes clustering of the response rows under Hamming distance with
/// D²-weighted seeding. Returns 0-based labels.
pub fn kmodes<R: Rng + ?Sized>(obs: Observed<'_>, n_groups: usize, rng: &mut R) -> Vec<usize> {
    let n = obs.y.n_rows();
    let j = obs.y.n_items();
    let rows: Vec<Vec<u16>> = obs.y.values().rows().into_iter().map(|r| r.to_vec()).collect();
    let mut modes: Vec<Vec<u16>> = Vec::with_capacity(n_groups);
    modes.push(rows[(open_unit(rng) * n as f64) as usize % n].clone());
    let mut nearest: Vec<usize> = rows.iter().map(|r| hamming(r, &modes[0])).collect();
    while modes.len() < n_groups {
        let weights: Vec<f64> = nearest.iter().map(|&d| (d * d) as f64).collect();
        let total: f64 = weights.iter().sum();
        let pick = if total > 0.0 {
            let u = open_unit(rng) * total;
            let mut acc = 0.0;
            weights
                .iter()
                .position(|&w| {
                    acc += w;
                    u < acc
                })
                .unwrap_or(n - 1)
        } else {
            (open_unit(rng) * n as f64) as usize % n
        };
        modes.push(rows[pick].clone());
        let m = modes.last().unwrap();
        for (d, r) in nearest.iter_mut().zip(&rows) {
            *d = (*d).min(hamming(r, m));
        }
    }
    let mut labels = vec![usize::MAX; n];
    for _ in 0..KMODES_ROUNDS {
        let next: Vec<usize> = rows
            .par_iter()
            .map(|r| {
                (0..n_groups)
                    .min_by_key(|&g| (hamming(r, &modes[g]), g))
                    .unwrap()
            })
            .collect();
        if next == labels {
            break;
        }
        labels = next;
        for (g, mode) in modes.iter_mut().enumerate() {
            for c in 0..j {
                let k = obs.schema.item(c).n_levels();
                let mut counts = vec![0usize; k];
                let mut any = false;
                for (r, _) in rows.iter().zip(&labels).filter(|(_, &l)| l == g) {
                    counts[r[c] as usize - 1] += 1;
                    any = true;
                }
                if any {
                    let best = (0..k).max_by_key(|&l| (counts[l], std::cmp::Reverse(l))).unwrap();
                    mode[c] = best as u16 + 1;
                }
            }
        }
    }
    labels
}

/// A starting state that satisfies every truncation constraint: cuts from
/// level frequencies, Z from its zero-mean truncated conditionals, labels
/// from k-modes, standard-normal traits, uniform weights and loadings drawn
/// from their full conditional.
pub fn initialize<T: Real>(
    obs: Observed<'_>,
    n_groups: usize,
    n_traits: usize,
    prior: &LoadingPrior<T>,
    seed: u64,
) -> Result<ModelState<T>> {
    let n = obs.y.n_rows();
    let dim = obs.layout.dim();
    let key = SweepKey { seed, sweep: u64::MAX };
    let thresholds = initial_thresholds::<T>(obs);
    let zero = ClusterParams::<T>::zeros(n_groups, dim, n_traits);
    let mut z = Array2::<T>::zeros((n, dim));
    let mut theta = Array2::<T>::zeros((n, n_traits));
    let alloc = vec![0usize; n];
    update_latent(&mut z, &theta, &alloc, &zero, &thresholds, obs, key.phase(Phase::Latent));
    let alloc = if n_groups == 1 {
        alloc
    } else {
        kmodes(obs, n_groups, &mut key.phase(Phase::Init).stream(0))
    };
    let tkey = key.phase(Phase::Traits);
    theta
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut row)| {
            let mut rng = tkey.stream(i as u64);
            row.iter_mut().for_each(|t| *t = std_normal(&mut rng));
        });
    let loadings = update_item_params(&z, &theta, &alloc, n_groups, prior, key)?;
    let params = ClusterParams { pi: zero.pi, loadings };
    Ok(ModelState {
        latent: LatentState { z, theta, alloc },
        params,
        thresholds,
    })
}
