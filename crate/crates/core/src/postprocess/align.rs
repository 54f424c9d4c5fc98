//! Rotation alignment of sampled loadings to per-cluster references.

use ndarray::{s, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, chol_inverse, svd_small, sym_eigen};
use crate::mcmc::Trace;
use crate::scalar::Real;

/// Orthogonal Q minimizing ‖sample·Q − reference‖_F, and sample·Q.
/// Reflections are allowed. Traits transform as θ → Qᵀθ.
pub fn procrustes_align<T: Real>(
    sample: ArrayView2<'_, T>,
    reference: ArrayView2<'_, T>,
) -> Result<(Array2<T>, Array2<T>)> {
    if sample.dim() != reference.dim() {
        return Err(Error::DataShape(format!(
            "sample is {:?} but reference is {:?}",
            sample.dim(),
            reference.dim()
        )));
    }
    let cross = sample.t().dot(&reference);
    let (u, _, v) = svd_small(cross.view());
    let q = u.dot(&v.t());
    let aligned = sample.dot(&q);
    Ok((q, aligned))
}

/// Where the latent data for reference fitting come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceSource {
    /// Mean of Z over snapshots.
    #[default]
    PosteriorMean,
    /// Z of the final sweep.
    FinalDraw,
}

/// Per-cluster D×q reference loadings; `None` marks a cluster too small to fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceLoadings<T> {
    pub loadings: Vec<Option<Array2<T>>>,
}

/// q-factor principal-axis fit of a covariance matrix: communalities start
/// at squared multiple correlations and are iterated to a fixed point.
pub fn principal_axis<T: Real>(cov: ArrayView2<'_, T>, n_factors: usize) -> Array2<T> {
    let dim = cov.nrows();
    let diag: Vec<T> = (0..dim).map(|d| cov[[d, d]]).collect();
    let mut h2: Vec<T> = match cholesky(cov) {
        Ok(l) => {
            let inv = chol_inverse(l.view());
            (0..dim)
                .map(|d| (diag[d] - T::one() / inv[[d, d]]).max(T::zero()))
                .collect()
        }
        Err(_) => diag.iter().map(|&v| v * T::of(0.5)).collect(),
    };
    let mut work = cov.to_owned();
    let mut loadings = Array2::<T>::zeros((dim, n_factors));
    for _ in 0..200 {
        for d in 0..dim {
            work[[d, d]] = h2[d];
        }
        let (values, vectors) = sym_eigen(work.view());
        for k in 0..n_factors {
            let scale = values[k].max(T::zero()).sqrt();
            for d in 0..dim {
                loadings[[d, k]] = vectors[[d, k]] * scale;
            }
        }
        let mut change = T::zero();
        for d in 0..dim {
            let next = loadings.row(d).iter().map(|&v| v * v).sum::<T>().min(diag[d]);
            change = change.max((next - h2[d]).abs());
            h2[d] = next;
        }
        if change < T::of(1e-9) {
            break;
        }
    }
    loadings
}

fn sample_covariance<T: Real>(z: &Array2<T>, rows: &[usize]) -> Array2<T> {
    let dim = z.ncols();
    let n = rows.len() as f64;
    let mut mean = vec![0.0f64; dim];
    for &i in rows {
        for d in 0..dim {
            mean[d] += z[[i, d]].as_f64();
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut cov = Array2::<f64>::zeros((dim, dim));
    for &i in rows {
        for a in 0..dim {
            let ra = z[[i, a]].as_f64() - mean[a];
            for b in 0..=a {
                cov[[a, b]] += ra * (z[[i, b]].as_f64() - mean[b]);
            }
        }
    }
    let denom = (n - 1.0).max(1.0);
    Array2::from_shape_fn((dim, dim), |(a, b)| {
        let v = if b <= a { cov[[a, b]] } else { cov[[b, a]] };
        T::of(v / denom)
    })
}

/// Reference loadings of one cluster from the latent rows of its members.
pub fn reference_for_cluster<T: Real>(z: &Array2<T>, members: &[usize], n_traits: usize) -> Result<Array2<T>> {
    if members.len() < n_traits + 1 {
        return Err(Error::DataShape(format!(
            "cluster has {} members; fitting {} factors needs at least {}",
            members.len(),
            n_traits,
            n_traits + 1
        )));
    }
    Ok(principal_axis(sample_covariance(z, members).view(), n_traits))
}

fn members_by_cluster<T: Real>(trace: &Trace<T>) -> Vec<Vec<usize>> {
    let mut members = vec![Vec::new(); trace.n_groups];
    for (i, row) in trace.tallies.rows().into_iter().enumerate() {
        members[super::argmax_first(row.iter().copied())].push(i);
    }
    members
}

/// Fits every cluster's reference from the hard clustering of `trace`;
/// fails if any cluster has fewer than q + 1 members.
pub fn fit_reference_loadings<T: Real>(trace: &Trace<T>, source: ReferenceSource) -> Result<ReferenceLoadings<T>> {
    let z = match source {
        ReferenceSource::PosteriorMean => &trace.z_mean,
        ReferenceSource::FinalDraw => &trace.z_last,
    };
    let loadings = members_by_cluster(trace)
        .iter()
        .enumerate()
        .map(|(g, m)| {
            reference_for_cluster(z, m, trace.n_traits)
                .map(Some)
                .map_err(|e| Error::DataShape(format!("cluster {}: {e}", g + 1)))
        })
        .collect::<Result<_>>()?;
    Ok(ReferenceLoadings { loadings })
}

/// As [`fit_reference_loadings`], but clusters that are too small get no
/// reference and are left unrotated.
pub fn fit_reference_loadings_lenient<T: Real>(trace: &Trace<T>, source: ReferenceSource) -> ReferenceLoadings<T> {
    let z = match source {
        ReferenceSource::PosteriorMean => &trace.z_mean,
        ReferenceSource::FinalDraw => &trace.z_last,
    };
    let loadings = members_by_cluster(trace)
        .iter()
        .enumerate()
        .map(|(g, m)| match reference_for_cluster(z, m, trace.n_traits) {
            Ok(r) => Some(r),
            Err(e) => {
                log::warn!("cluster {} left unaligned: {e}", g + 1);
                None
            }
        })
        .collect();
    ReferenceLoadings { loadings }
}

/// Rotates every snapshot's loadings onto the references. Trait means and
/// retained traits receive θ → Qᵀθ, so Λθ is unchanged. The transform of
/// each cluster is recorded in the snapshot.
pub fn align_trace<T: Real>(trace: &mut Trace<T>, references: &ReferenceLoadings<T>) -> Result<()> {
    let g = trace.n_groups;
    let q = trace.n_traits;
    if references.loadings.len() != g {
        return Err(Error::DataShape(format!(
            "{} references for {g} clusters",
            references.loadings.len()
        )));
    }
    for (s, snap) in trace.snapshots.iter_mut().enumerate() {
        let mut rotations = Vec::with_capacity(g);
        for (k, reference) in references.loadings.iter().enumerate() {
            let Some(reference) = reference else {
                rotations.push(Array2::eye(q));
                continue;
            };
            let lambda = snap.loadings[k].slice(s![.., 1..]).to_owned();
            let (rot, aligned) = procrustes_align(lambda.view(), reference.view())?;
            snap.loadings[k].slice_mut(s![.., 1..]).assign(&aligned);
            let tm = ndarray::Array1::from(snap.trait_means[k].clone());
            snap.trait_means[k] = rot.t().dot(&tm).to_vec();
            if let Some(r) = trace.retained.as_mut() {
                let alloc = &r.allocations[s];
                let theta = &mut r.theta[s];
                for (i, &a) in alloc.iter().enumerate() {
                    if a as usize == k {
                        let t = rot.t().dot(&theta.row(i));
                        theta.row_mut(i).assign(&t);
                    }
                }
            }
            rotations.push(rot);
        }
        snap.rotations = Some(match snap.rotations.take() {
            Some(prev) => prev.iter().zip(&rotations).map(|(p, r)| p.dot(r)).collect(),
            None => rotations,
        });
    }
    Ok(())
}
