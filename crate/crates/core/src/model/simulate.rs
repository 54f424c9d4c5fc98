use ndarray::{Array2, ArrayViewMut1, Axis};
use rand::Rng;
use rayon::prelude::*;

use super::{decode_row, ClusterParams, LatentState, Thresholds};
use crate::error::{Error, Result};
use crate::rng::{open_unit, std_normal, Phase, StreamKey};
use crate::scalar::Real;
use crate::survey::{LatentLayout, ResponseMatrix, SurveySchema};

/// Draws a categorical index with probabilities `weights` (need not be normalized).
pub(crate) fn sample_categorical<T: Real, R: Rng + ?Sized>(weights: &[T], rng: &mut R) -> usize {
    let total: f64 = weights.iter().map(|w| w.as_f64()).sum();
    let u = open_unit(rng) * total;
    let mut acc = 0.0;
    for (g, w) in weights.iter().enumerate() {
        acc += w.as_f64();
        if u < acc {
            return g;
        }
    }
    weights.len() - 1
}

/// One generative draw: allocation, traits and latent row. Returns the
/// 0-based allocation and writes θ and z into the given rows.
pub fn simulate_row<T: Real, R: Rng + ?Sized>(
    params: &ClusterParams<T>,
    mut theta: ArrayViewMut1<'_, T>,
    mut z: ArrayViewMut1<'_, T>,
    rng: &mut R,
) -> usize {
    let g = sample_categorical(&params.pi, rng);
    for t in theta.iter_mut() {
        *t = std_normal(rng);
    }
    let lt = &params.loadings[g];
    for (d, zd) in z.iter_mut().enumerate() {
        *zd = LatentState::conditional_mean(lt, d, theta.view()) + std_normal::<T, _>(rng);
    }
    g
}

/// Simulates `n` respondents. Row `i` uses its own stream so the output does
/// not depend on the worker count.
pub fn simulate_dataset<T: Real>(
    schema: &SurveySchema,
    params: &ClusterParams<T>,
    thresholds: &Thresholds<T>,
    n: usize,
    seed: u64,
) -> Result<(ResponseMatrix, LatentState<T>)> {
    let dim = schema.latent_dim();
    params.validate(dim)?;
    thresholds.validate(schema)?;
    if n == 0 {
        return Err(Error::DataShape("cannot simulate zero rows".into()));
    }
    let layout = LatentLayout::new(schema);
    let q = params.n_traits();
    let key = StreamKey::new(seed, 0, Phase::Simulate);
    let mut z = Array2::<T>::zeros((n, dim));
    let mut theta = Array2::<T>::zeros((n, q));
    let mut y = Array2::<u16>::zeros((n, schema.n_items()));
    let mut alloc = vec![0usize; n];
    z.axis_iter_mut(Axis(0))
        .into_par_iter()
        .zip(theta.axis_iter_mut(Axis(0)))
        .zip(y.axis_iter_mut(Axis(0)))
        .zip(alloc.par_iter_mut())
        .enumerate()
        .for_each(|(i, (((zr, tr), mut yr), a))| {
            let mut rng = key.stream(i as u64);
            let mut zr = zr;
            *a = simulate_row(params, tr, zr.view_mut(), &mut rng);
            for (dst, v) in yr.iter_mut().zip(decode_row(zr.view(), thresholds, schema, &layout)) {
                *dst = v;
            }
        });
    Ok((ResponseMatrix::from_trusted(y), LatentState { z, theta, alloc }))
}
