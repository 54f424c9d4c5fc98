//! Full-conditional updates of one sweep.
//!
//! Row-wise updates draw from stream `i` of a key fixed by
//! (seed, sweep, phase), so the result does not depend on how rayon
//! schedules rows.

use ndarray::{Array2, ArrayView1, Axis};
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{backward_subst_t, chol_inverse, chol_solve, cholesky};
use crate::model::{decode_nominal, decode_ordinal, ClusterFactor, ClusterParams, Thresholds};
use crate::rng::{open_unit, std_normal, Phase, StreamKey};
use crate::scalar::Real;
use crate::survey::{LatentLayout, ResponseMatrix, SurveySchema};
use crate::truncnorm::{sample_truncnorm, TruncInterval};

/// Observed responses together with the layout that maps them to latent dimensions.
#[derive(Clone, Copy)]
pub struct Observed<'a> {
    pub y: &'a ResponseMatrix,
    pub schema: &'a SurveySchema,
    pub layout: &'a LatentLayout,
}

/// Seed and sweep index from which every stream of one sweep is derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepKey {
    pub seed: u64,
    pub sweep: u64,
}

impl SweepKey {
    pub fn phase(self, phase: Phase) -> StreamKey {
        StreamKey::new(self.seed, self.sweep, phase)
    }

    pub fn tagged(self, phase: Phase, tag: u64) -> StreamKey {
        StreamKey::with_tag(self.seed, self.sweep, phase, tag)
    }
}

/// Draws z ~ N(mean, 1) restricted to the interval of level `y`.
#[inline]
pub fn draw_ordinal<T: Real, R: Rng + ?Sized>(mean: T, cuts: &[T], y: usize, rng: &mut R) -> T {
    let lo = if y == 1 { T::neg_infinity() } else { cuts[y - 2] };
    let hi = if y > cuts.len() { T::infinity() } else { cuts[y - 1] };
    sample_truncnorm(mean, TruncInterval::new(lo, hi), rng)
}

/// Redraws one nominal block in place given its observed level.
///
/// Level 1 puts every utility below 0. Otherwise the chosen utility is drawn
/// above the larger of 0 and the other current utilities, then the others
/// are drawn below the new value.
pub fn draw_nominal_block<T: Real, R: Rng + ?Sized>(
    block: &mut [T],
    means: &[T],
    y: usize,
    rng: &mut R,
) {
    if y == 1 {
        for (z, &m) in block.iter_mut().zip(means) {
            *z = sample_truncnorm(m, TruncInterval::below(T::zero()), rng);
        }
        return;
    }
    let chosen = y - 2;
    let tau = block
        .iter()
        .enumerate()
        .filter(|&(l, _)| l != chosen)
        .fold(T::zero(), |acc, (_, &v)| acc.max(v));
    let top = sample_truncnorm(means[chosen], TruncInterval::above(tau), rng);
    block[chosen] = top;
    for (l, (z, &m)) in block.iter_mut().zip(means).enumerate() {
        if l != chosen {
            *z = sample_truncnorm(m, TruncInterval::below(top), rng);
        }
    }
}

/// Redraws one latent row given the conditional means of its dimensions.
pub fn draw_latent_row<T: Real, R: Rng + ?Sized>(
    z: &mut [T],
    means: &[T],
    y: ArrayView1<'_, u16>,
    thresholds: &Thresholds<T>,
    obs: Observed<'_>,
    rng: &mut R,
) {
    let o = obs.schema.n_ordered();
    for (j, &level) in y.iter().enumerate() {
        let r = obs.layout.range(j);
        if j < o {
            z[r.start] = draw_ordinal(means[r.start], &thresholds.cuts[j], level as usize, rng);
        } else {
            draw_nominal_block(&mut z[r.clone()], &means[r], level as usize, rng);
        }
    }
}

/// λ̃_{gd}ᵀθ̃ for every latent dimension `d` of cluster loadings `loadings`.
#[inline]
pub fn conditional_means<T: Real>(loadings: &Array2<T>, theta: ArrayView1<'_, T>, out: &mut [T]) {
    for (d, m) in out.iter_mut().enumerate() {
        let row = loadings.row(d);
        let mut s = row[0];
        for (k, &t) in theta.iter().enumerate() {
            s += row[k + 1] * t;
        }
        *m = s;
    }
}

/// Redraws all of Z given allocations, traits and thresholds.
pub fn update_latent<T: Real>(
    z: &mut Array2<T>,
    theta: &Array2<T>,
    alloc: &[usize],
    params: &ClusterParams<T>,
    thresholds: &Thresholds<T>,
    obs: Observed<'_>,
    key: StreamKey,
) {
    let dim = obs.layout.dim();
    z.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each_init(
            || vec![T::zero(); dim],
            |means, (i, mut row)| {
                let mut rng = key.stream(i as u64);
                conditional_means(&params.loadings[alloc[i]], theta.row(i), means);
                let zs = row.as_slice_mut().expect("latent rows are contiguous");
                draw_latent_row(zs, means, obs.y.row(i), thresholds, obs, &mut rng);
            },
        );
}

/// Number of rows whose decoded latent vector differs from the observed row.
pub fn decode_mismatches<T: Real>(z: &Array2<T>, thresholds: &Thresholds<T>, obs: Observed<'_>) -> usize {
    let o = obs.schema.n_ordered();
    (0..z.nrows())
        .into_par_iter()
        .filter(|&i| {
            let row = z.row(i);
            let zs = row.as_slice().expect("latent rows are contiguous");
            (0..obs.schema.n_items()).any(|j| {
                let r = obs.layout.range(j);
                let level = if j < o {
                    decode_ordinal(zs[r.start], &thresholds.cuts[j])
                } else {
                    decode_nominal(&zs[r])
                };
                level != obs.y.get(i, j) as usize
            })
        })
        .count()
}

/// Normalized allocation probabilities for one latent row:
/// p_g ∝ π_g · MVN(z; μ_g, Λ_gΛ_gᵀ + I), evaluated in log space.
pub fn allocation_probs<T: Real>(
    z: ArrayView1<'_, T>,
    params: &ClusterParams<T>,
    factors: &[ClusterFactor<T>],
    scratch: &mut [T],
    out: &mut [f64],
) -> Result<()> {
    let mut max = f64::NEG_INFINITY;
    for (g, o) in out.iter_mut().enumerate() {
        let lp = params.pi[g].as_f64().ln() + factors[g].log_density(params, g, z, scratch).as_f64();
        *o = lp;
        if lp > max {
            max = lp;
        }
    }
    if !max.is_finite() {
        return Err(Error::Numerical(
            "every cluster has zero allocation probability".into(),
        ));
    }
    let mut total = 0.0;
    for o in out.iter_mut() {
        *o = (*o - max).exp();
        total += *o;
    }
    out.iter_mut().for_each(|o| *o /= total);
    Ok(())
}

pub fn draw_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u = open_unit(rng);
    let mut acc = 0.0;
    for (g, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return g;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Draws every allocation with the traits integrated out; writes the
/// class probabilities used for each row into `probs` (N×G).
pub fn update_allocations<T: Real>(
    z: &Array2<T>,
    params: &ClusterParams<T>,
    factors: &[ClusterFactor<T>],
    key: StreamKey,
    alloc: &mut [usize],
    probs: &mut Array2<f64>,
) -> Result<()> {
    let q = params.n_traits();
    alloc
        .par_iter_mut()
        .zip(probs.axis_iter_mut(Axis(0)))
        .enumerate()
        .try_for_each_init(
            || vec![T::zero(); q],
            |scratch, (i, (a, mut p))| {
                let p = p.as_slice_mut().expect("probability rows are contiguous");
                allocation_probs(z.row(i), params, factors, scratch, p)?;
                *a = draw_index(p, &mut key.stream(i as u64));
                Ok(())
            },
        )
}

/// Conjugate trait draw for one row: N(M⁻¹Λᵀ(z − μ), M⁻¹), M = I + ΛᵀΛ.
/// `variance_scale` is 1 except under mutation testing.
pub fn draw_traits<T: Real, R: Rng + ?Sized>(
    z: ArrayView1<'_, T>,
    loadings: &Array2<T>,
    factor: &ClusterFactor<T>,
    variance_scale: f64,
    out: &mut [T],
    noise: &mut [T],
    rng: &mut R,
) {
    out.iter_mut().for_each(|v| *v = T::zero());
    for (d, row) in loadings.rows().into_iter().enumerate() {
        let r = z[d] - row[0];
        for (k, o) in out.iter_mut().enumerate() {
            *o += row[k + 1] * r;
        }
    }
    chol_solve(factor.chol.view(), out);
    for e in noise.iter_mut() {
        *e = std_normal(rng);
    }
    backward_subst_t(factor.chol.view(), noise);
    let s = T::of(variance_scale.sqrt());
    for (o, &e) in out.iter_mut().zip(noise.iter()) {
        *o += s * e;
    }
}

pub fn update_traits<T: Real>(
    z: &Array2<T>,
    params: &ClusterParams<T>,
    factors: &[ClusterFactor<T>],
    alloc: &[usize],
    key: StreamKey,
    variance_scale: f64,
    theta: &mut Array2<T>,
) {
    let q = params.n_traits();
    theta
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each_init(
            || vec![T::zero(); q],
            |noise, (i, mut row)| {
                let g = alloc[i];
                let out = row.as_slice_mut().expect("trait rows are contiguous");
                let mut rng = key.stream(i as u64);
                draw_traits(z.row(i), &params.loadings[g], &factors[g], variance_scale, out, noise, &mut rng);
            },
        );
}

/// Dirichlet(counts + α) draw through normalized Gamma variates.
pub fn update_weights<T: Real, R: Rng + ?Sized>(counts: &[usize], alpha: &[T], rng: &mut R) -> Vec<T> {
    let draws: Vec<f64> = counts
        .iter()
        .zip(alpha)
        .map(|(&n, &a)| {
            let shape = n as f64 + a.as_f64();
            let g = Gamma::new(shape, 1.0).expect("positive Dirichlet shape");
            g.sample(rng).max(f64::MIN_POSITIVE)
        })
        .collect();
    let total: f64 = draws.iter().sum();
    let mut pi: Vec<T> = draws
        .iter()
        .map(|&d| T::of(d / total).max(T::min_positive_value()))
        .collect();
    let s: T = pi.iter().copied().sum();
    pi.iter_mut().for_each(|p| *p /= s);
    pi
}

/// Prior on augmented loading rows in precision form.
#[derive(Debug, Clone)]
pub struct LoadingPrior<T> {
    pub precision: Array2<T>,
    pub precision_mean: Vec<T>,
}

impl<T: Real> LoadingPrior<T> {
    pub fn new(mean: &[T], covariance: &Array2<T>) -> Result<Self> {
        let l = cholesky(covariance.view())?;
        let precision = chol_inverse(l.view());
        let precision_mean = (0..mean.len())
            .map(|a| (0..mean.len()).map(|b| precision[[a, b]] * mean[b]).sum())
            .collect();
        Ok(LoadingPrior { precision, precision_mean })
    }
}

pub fn cluster_counts(alloc: &[usize], n_groups: usize) -> Vec<usize> {
    let mut n = vec![0usize; n_groups];
    for &g in alloc {
        n[g] += 1;
    }
    n
}

/// Redraws every augmented loading row λ̃_{gd} from
/// MVN(A⁻¹(Θ̃_gᵀz_{gd} + Σ_λ⁻¹μ_λ), A⁻¹) with A = Σ_λ⁻¹ + Θ̃_gᵀΘ̃_g.
/// Cluster `g`, row `d` draws from stream `d` of the tag-`g` key.
pub fn update_item_params<T: Real>(
    z: &Array2<T>,
    theta: &Array2<T>,
    alloc: &[usize],
    n_groups: usize,
    prior: &LoadingPrior<T>,
    key: SweepKey,
) -> Result<Vec<Array2<T>>> {
    let dim = z.ncols();
    let w = theta.ncols() + 1;
    let mut gram: Vec<Array2<T>> = vec![prior.precision.clone(); n_groups];
    let mut cross: Vec<Array2<T>> = vec![Array2::zeros((w, dim)); n_groups];
    let mut tt = vec![T::one(); w];
    for (i, &g) in alloc.iter().enumerate() {
        for k in 1..w {
            tt[k] = theta[[i, k - 1]];
        }
        let a = &mut gram[g];
        for r in 0..w {
            for c in 0..w {
                a[[r, c]] += tt[r] * tt[c];
            }
        }
        let zr = z.row(i);
        let b = &mut cross[g];
        for r in 0..w {
            let t = tt[r];
            for (bv, &zv) in b.row_mut(r).iter_mut().zip(zr.iter()) {
                *bv += t * zv;
            }
        }
    }
    let mut out = Vec::with_capacity(n_groups);
    let mut mean = vec![T::zero(); w];
    let mut noise = vec![T::zero(); w];
    for g in 0..n_groups {
        let l = cholesky(gram[g].view())?;
        let stream = key.tagged(Phase::Loadings, g as u64);
        let mut lt = Array2::<T>::zeros((dim, w));
        for d in 0..dim {
            for r in 0..w {
                mean[r] = cross[g][[r, d]] + prior.precision_mean[r];
            }
            chol_solve(l.view(), &mut mean);
            let mut rng = stream.stream(d as u64);
            for e in noise.iter_mut() {
                *e = std_normal(&mut rng);
            }
            backward_subst_t(l.view(), &mut noise);
            for r in 0..w {
                lt[[d, r]] = mean[r] + noise[r];
            }
        }
        out.push(lt);
    }
    Ok(out)
}

/// Posterior mean and covariance of one augmented loading row given the
/// member traits and latent values; exposed for analytic checks.
pub fn item_param_posterior<T: Real>(
    z_col: &[T],
    theta: &Array2<T>,
    prior: &LoadingPrior<T>,
) -> Result<(Vec<T>, Array2<T>)> {
    let w = theta.ncols() + 1;
    let mut a = prior.precision.clone();
    let mut b = prior.precision_mean.clone();
    let mut tt = vec![T::one(); w];
    for (i, &zv) in z_col.iter().enumerate() {
        for k in 1..w {
            tt[k] = theta[[i, k - 1]];
        }
        for r in 0..w {
            b[r] += tt[r] * zv;
            for c in 0..w {
                a[[r, c]] += tt[r] * tt[c];
            }
        }
    }
    let l = cholesky(a.view())?;
    chol_solve(l.view(), &mut b);
    Ok((b, chol_inverse(l.view())))
}
