use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::cholesky;
use crate::scalar::Real;

/// Hyperparameters of the conjugate priors and the threshold proposal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Priors<T> {
    /// Dirichlet concentration, one per cluster.
    pub alpha: Vec<T>,
    /// Prior mean of each augmented loading row (length q+1).
    pub mu_lambda: Vec<T>,
    /// Prior covariance of each augmented loading row.
    pub sigma_lambda: Array2<T>,
    /// Initial threshold proposal variance.
    pub sigma2_mh: T,
    /// Optional upper bound making the flat threshold prior proper:
    /// interior cuts uniform on ordered vectors in (0, bound).
    #[serde(default)]
    pub threshold_upper: Option<T>,
}

impl<T: Real> Priors<T> {
    /// Jeffreys weights (α = ½), zero-mean loadings with covariance `scale`·I.
    pub fn standard(n_groups: usize, n_traits: usize, scale: T) -> Self {
        let mut sigma = Array2::zeros((n_traits + 1, n_traits + 1));
        sigma.diag_mut().fill(scale);
        Priors {
            alpha: vec![T::of(0.5); n_groups],
            mu_lambda: vec![T::zero(); n_traits + 1],
            sigma_lambda: sigma,
            sigma2_mh: T::of(0.01),
            threshold_upper: None,
        }
    }

    /// The defaults used throughout: α = ½, μ_λ = 0, Σ_λ = 5I.
    pub fn default_for(n_groups: usize, n_traits: usize) -> Self {
        Self::standard(n_groups, n_traits, T::of(5.0))
    }

    pub fn validate(&self, n_groups: usize, n_traits: usize) -> Result<()> {
        if self.alpha.len() != n_groups {
            return Err(Error::Config(format!(
                "{} Dirichlet weights for {n_groups} clusters",
                self.alpha.len()
            )));
        }
        if self.alpha.iter().any(|&a| !(a > T::zero()) || !a.is_finite()) {
            return Err(Error::Config("Dirichlet weights must be positive".into()));
        }
        let w = n_traits + 1;
        if self.mu_lambda.len() != w || self.sigma_lambda.dim() != (w, w) {
            return Err(Error::Config(format!(
                "loading prior must have dimension {w} for q = {n_traits}"
            )));
        }
        let s = &self.sigma_lambda;
        for i in 0..w {
            for j in 0..i {
                if (s[[i, j]] - s[[j, i]]).abs() > T::of(1e-12) * (T::one() + s[[i, j]].abs()) {
                    return Err(Error::Config("loading prior covariance not symmetric".into()));
                }
            }
        }
        cholesky(s.view())
            .map_err(|_| Error::Config("loading prior covariance not positive definite".into()))?;
        if !(self.sigma2_mh > T::zero()) || !self.sigma2_mh.is_finite() {
            return Err(Error::Config("threshold proposal variance must be positive".into()));
        }
        if let Some(u) = self.threshold_upper {
            if !(u > T::zero()) || !u.is_finite() {
                return Err(Error::Config("threshold upper bound must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Length, thinning, seeding and adaptation of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub adapt_mh: bool,
    /// Acceptance band for the threshold proposal; adaptation aims at its midpoint.
    pub target_accept: (f64, f64),
    /// Keep per-snapshot class probabilities, allocations and traits.
    pub retain_draws: bool,
    pub max_groups: usize,
    pub max_traits: usize,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            iterations: 80_000,
            burn_in: 20_000,
            thin: 10,
            seed: 1,
            adapt_mh: true,
            target_accept: (0.20, 0.30),
            retain_draws: false,
            max_groups: 8,
            max_traits: 6,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.burn_in >= self.iterations {
            return Err(Error::Config(format!(
                "burn-in {} must be below iterations {}",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be at least 1".into()));
        }
        let (lo, hi) = self.target_accept;
        if !(0.0 < lo && lo <= hi && hi < 1.0) {
            return Err(Error::Config(format!("invalid acceptance band ({lo}, {hi})")));
        }
        Ok(())
    }

    /// Number of retained snapshots.
    pub fn n_snapshots(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }

    /// True when the sweep with 0-based index `t` is recorded.
    pub fn is_snapshot(&self, t: usize) -> bool {
        t >= self.burn_in && (t - self.burn_in + 1) % self.thin == 0
    }
}

/// Deliberate defects for mutation testing of the joint-distribution check.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Corruption {
    #[default]
    None,
    /// Inflate the trait posterior covariance by this factor.
    TraitVariance(f64),
}
