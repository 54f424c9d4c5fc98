use ndarray::{Array2, ArrayView1, ArrayView2, ArrayViewMut1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::survey::SurveySchema;

/// Mixture weights and per-cluster augmented loadings.
///
/// `loadings[g]` is D×(q+1): column 0 holds the cluster mean μ_g and
/// columns 1..=q the factor loadings Λ_g.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams<T> {
    pub pi: Vec<T>,
    pub loadings: Vec<Array2<T>>,
}

impl<T: Real> ClusterParams<T> {
    pub fn zeros(n_groups: usize, dim: usize, n_traits: usize) -> Self {
        let w = T::one() / T::of(n_groups as f64);
        ClusterParams {
            pi: vec![w; n_groups],
            loadings: vec![Array2::zeros((dim, n_traits + 1)); n_groups],
        }
    }

    pub fn n_groups(&self) -> usize {
        self.pi.len()
    }

    pub fn dim(&self) -> usize {
        self.loadings.first().map_or(0, |l| l.nrows())
    }

    pub fn n_traits(&self) -> usize {
        self.loadings.first().map_or(0, |l| l.ncols().saturating_sub(1))
    }

    /// Cluster mean μ_g.
    pub fn mean(&self, g: usize) -> ArrayView1<'_, T> {
        self.loadings[g].column(0)
    }

    /// Factor loadings Λ_g (D×q).
    pub fn factor_loadings(&self, g: usize) -> ArrayView2<'_, T> {
        self.loadings[g].slice(ndarray::s![.., 1..])
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.pi.is_empty() || self.loadings.len() != self.pi.len() {
            return Err(Error::Params(format!(
                "{} weights for {} loading matrices",
                self.pi.len(),
                self.loadings.len()
            )));
        }
        let total: f64 = self.pi.iter().map(|p| p.as_f64()).sum();
        // Zero weights are allowed: such a cluster is simply never drawn.
        if (total - 1.0).abs() > 1e-6 || self.pi.iter().any(|&p| !(p >= T::zero())) {
            return Err(Error::Params(format!(
                "weights must be nonnegative and sum to 1 (sum {total})"
            )));
        }
        let cols = self.loadings[0].ncols();
        if cols < 2 {
            return Err(Error::Params("loadings need at least one trait column".into()));
        }
        for (g, l) in self.loadings.iter().enumerate() {
            if l.nrows() != dim || l.ncols() != cols {
                return Err(Error::Params(format!(
                    "cluster {} loadings are {}x{}, expected {dim}x{cols}",
                    g + 1,
                    l.nrows(),
                    l.ncols()
                )));
            }
            if l.iter().any(|x| !x.is_finite()) {
                return Err(Error::Params(format!("cluster {} loadings not finite", g + 1)));
            }
        }
        Ok(())
    }

    /// Relabels clusters so that new cluster `g` is old cluster `perm[g]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        ClusterParams {
            pi: perm.iter().map(|&h| self.pi[h]).collect(),
            loadings: perm.iter().map(|&h| self.loadings[h].clone()).collect(),
        }
    }
}

/// Cut points of the binary/ordinal items.
///
/// For item `j` with K levels, `cuts[j]` stores γ_1..γ_{K−1}; γ_0 = −∞ and
/// γ_K = +∞ are implicit and γ_1 = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds<T> {
    pub cuts: Vec<Vec<T>>,
}

impl<T: Real> Thresholds<T> {
    /// Evenly spaced interior cuts (spacing 1) starting at 0.
    pub fn default_for(schema: &SurveySchema) -> Self {
        let cuts = (0..schema.n_ordered())
            .map(|j| {
                (0..schema.item(j).n_levels() - 1)
                    .map(|k| T::of(k as f64))
                    .collect()
            })
            .collect();
        Thresholds { cuts }
    }

    pub fn n_items(&self) -> usize {
        self.cuts.len()
    }

    /// γ_{j,k} for k in 0..=K.
    #[inline]
    pub fn gamma(&self, j: usize, k: usize) -> T {
        let c = &self.cuts[j];
        if k == 0 {
            T::neg_infinity()
        } else if k > c.len() {
            T::infinity()
        } else {
            c[k - 1]
        }
    }

    /// (γ_{j,y−1}, γ_{j,y}) for observed level `y`.
    #[inline]
    pub fn interval(&self, j: usize, y: usize) -> (T, T) {
        (self.gamma(j, y - 1), self.gamma(j, y))
    }

    pub fn validate(&self, schema: &SurveySchema) -> Result<()> {
        if self.cuts.len() != schema.n_ordered() {
            return Err(Error::Params(format!(
                "{} threshold vectors for {} ordered items",
                self.cuts.len(),
                schema.n_ordered()
            )));
        }
        for (j, c) in self.cuts.iter().enumerate() {
            let item = schema.item(j);
            if c.len() != item.n_levels() - 1 {
                return Err(Error::Params(format!(
                    "item `{}` needs {} cut points, got {}",
                    item.name,
                    item.n_levels() - 1,
                    c.len()
                )));
            }
            if c[0] != T::zero() {
                return Err(Error::Params(format!(
                    "item `{}`: first cut point must be 0",
                    item.name
                )));
            }
            if c.windows(2).any(|w| !(w[0] <= w[1])) || c.iter().any(|x| !x.is_finite()) {
                return Err(Error::Params(format!(
                    "item `{}`: cut points must be finite and nondecreasing",
                    item.name
                )));
            }
        }
        Ok(())
    }
}

/// Latent quantities of one state: Z (N×D), Θ (N×q) and 0-based allocations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentState<T> {
    pub z: Array2<T>,
    pub theta: Array2<T>,
    pub alloc: Vec<usize>,
}

impl<T: Real> LatentState<T> {
    /// λ̃ᵀθ̃ for row `i` and latent dimension `d` under cluster `g`.
    #[inline]
    pub fn conditional_mean(loadings: &Array2<T>, d: usize, theta: ArrayView1<'_, T>) -> T {
        let row = loadings.row(d);
        let mut m = row[0];
        for (k, &t) in theta.iter().enumerate() {
            m += row[k + 1] * t;
        }
        m
    }

    pub fn n_rows(&self) -> usize {
        self.alloc.len()
    }

    pub fn z_row_mut(&mut self, i: usize) -> ArrayViewMut1<'_, T> {
        self.z.row_mut(i)
    }
}
