use ndarray::{Array2, ArrayView1};

use super::ClusterParams;
use crate::error::Result;
use crate::linalg::{chol_logdet, cholesky, forward_subst};
use crate::scalar::Real;

/// Precomputed q×q core of one cluster's factor covariance ΛΛᵀ + I.
///
/// With M = I + ΛᵀΛ = L Lᵀ, the determinant lemma gives
/// ln|ΛΛᵀ + I| = ln|M| and Woodbury gives
/// rᵀ(ΛΛᵀ + I)⁻¹r = rᵀr − ‖L⁻¹Λᵀr‖². The same factor serves the trait
/// posterior, whose precision is M.
#[derive(Debug, Clone)]
pub struct ClusterFactor<T> {
    pub chol: Array2<T>,
    pub logdet: T,
}

impl<T: Real> ClusterFactor<T> {
    pub fn new(params: &ClusterParams<T>, g: usize) -> Result<Self> {
        let lambda = params.factor_loadings(g);
        let q = lambda.ncols();
        let mut m = lambda.t().dot(&lambda);
        for k in 0..q {
            m[[k, k]] += T::one();
        }
        let chol = cholesky(m.view())?;
        let logdet = chol_logdet(chol.view());
        Ok(ClusterFactor { chol, logdet })
    }

    pub fn all(params: &ClusterParams<T>) -> Result<Vec<Self>> {
        (0..params.n_groups()).map(|g| Self::new(params, g)).collect()
    }

    /// ln MVN_D(z; μ_g, Λ_gΛ_gᵀ + I). `scratch` must have length q.
    pub fn log_density(
        &self,
        params: &ClusterParams<T>,
        g: usize,
        z: ArrayView1<'_, T>,
        scratch: &mut [T],
    ) -> T {
        let lt = &params.loadings[g];
        let (dim, q) = (lt.nrows(), lt.ncols() - 1);
        scratch.iter_mut().for_each(|s| *s = T::zero());
        let mut rr = T::zero();
        for d in 0..dim {
            let row = lt.row(d);
            let r = z[d] - row[0];
            rr += r * r;
            for k in 0..q {
                scratch[k] += row[k + 1] * r;
            }
        }
        forward_subst(self.chol.view(), scratch);
        let proj: T = scratch.iter().map(|&s| s * s).sum();
        let half = T::of(0.5);
        let ln_2pi = T::of((2.0 * std::f64::consts::PI).ln());
        -half * (T::of(dim as f64) * ln_2pi + self.logdet + rr - proj)
    }
}

/// Marginal density of a latent vector under cluster `g`:
/// MVN_D(z; μ_g, Λ_gΛ_gᵀ + I).
pub fn marginal_latent_density<T: Real>(
    z: ArrayView1<'_, T>,
    g: usize,
    params: &ClusterParams<T>,
) -> Result<T> {
    let f = ClusterFactor::new(params, g)?;
    let mut scratch = vec![T::zero(); params.n_traits()];
    Ok(f.log_density(params, g, z, &mut scratch).exp())
}
