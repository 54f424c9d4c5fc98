use std::path::{Path, PathBuf};

use anyhow::Context;
use mfamd::mcmc::{ChainConfig, Priors};
use mfamd::postprocess::ReferenceSource;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::invalid;

/// A fit request as read from TOML. Relative paths resolve against the
/// directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: PathBuf,
    pub data: PathBuf,
    #[serde(default = "default_groups")]
    pub groups: usize,
    #[serde(default = "default_traits")]
    pub traits: usize,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub priors: PriorConfig,
    #[serde(default)]
    pub chain: ChainSection,
}

fn default_groups() -> usize {
    3
}

fn default_traits() -> usize {
    1
}

fn default_out() -> PathBuf {
    PathBuf::from("runs")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    /// Dirichlet concentration shared by every cluster.
    pub alpha: f64,
    /// Prior mean of every entry of an augmented loading row.
    pub loading_mean: f64,
    /// Loading prior covariance is this multiple of the identity.
    pub loading_scale: f64,
    /// Starting variance of the threshold proposal.
    pub proposal_variance: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig { alpha: 0.5, loading_mean: 0.0, loading_scale: 5.0, proposal_variance: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainSection {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub chains: usize,
    pub adapt_proposal: bool,
    /// Keep per-snapshot draws so the batch relabeling pass can run.
    /// Memory grows with snapshots × households × clusters.
    pub retain_draws: bool,
    pub reference: ReferenceSource,
}

impl Default for ChainSection {
    fn default() -> Self {
        let c = ChainConfig::default();
        ChainSection {
            iterations: c.iterations,
            burn_in: c.burn_in,
            thin: c.thin,
            seed: c.seed,
            chains: 1,
            adapt_proposal: c.adapt_mh,
            retain_draws: false,
            reference: ReferenceSource::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))
            .map_err(invalid)?;
        let mut config: RunConfig = toml::from_str(&text)
            .with_context(|| format!("parsing {}", path.display()))
            .map_err(invalid)?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.schema = base.join(&config.schema);
        config.data = base.join(&config.data);
        if config.out.is_relative() {
            config.out = base.join(&config.out);
        }
        Ok(config)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let c = &self.chain;
        if self.groups == 0 || self.traits == 0 {
            return Err(invalid(anyhow::anyhow!("groups and traits must be at least 1")));
        }
        if c.chains == 0 {
            return Err(invalid(anyhow::anyhow!("chains must be at least 1")));
        }
        self.chain_config(0).validate().map_err(invalid)?;
        self.priors().validate(self.groups, self.traits).map_err(invalid)?;
        Ok(())
    }

    pub fn priors(&self) -> Priors<f64> {
        let p = &self.priors;
        let w = self.traits + 1;
        Priors {
            alpha: vec![p.alpha; self.groups],
            mu_lambda: vec![p.loading_mean; w],
            sigma_lambda: Array2::eye(w) * p.loading_scale,
            sigma2_mh: p.proposal_variance,
            threshold_upper: None,
        }
    }

    /// Chain `index` runs with seed `seed + index`.
    pub fn chain_config(&self, index: usize) -> ChainConfig {
        let c = &self.chain;
        ChainConfig {
            iterations: c.iterations,
            burn_in: c.burn_in,
            thin: c.thin,
            seed: c.seed.wrapping_add(index as u64),
            adapt_mh: c.adapt_proposal,
            retain_draws: c.retain_draws,
            ..ChainConfig::default()
        }
    }

    /// SHA-256 over the resolved configuration and the bytes of the schema
    /// and data files.
    pub fn fingerprint(&self, schema_bytes: &[u8], data_bytes: &[u8]) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&self.hashed_view()).expect("config serializes"));
        h.update(Sha256::digest(schema_bytes));
        h.update(Sha256::digest(data_bytes));
        hex::encode(h.finalize())
    }

    // Output location does not change what is computed.
    fn hashed_view(&self) -> serde_json::Value {
        serde_json::json!({
            "groups": self.groups,
            "traits": self.traits,
            "priors": self.priors,
            "chain": self.chain,
        })
    }
}

/// Inclusive `MIN..MAX` ranges for clusters and traits, as in `2..6,1..2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    pub groups: (usize, usize),
    pub traits: (usize, usize),
}

impl Grid {
    pub fn cells(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for g in self.groups.0..=self.groups.1 {
            for q in self.traits.0..=self.traits.1 {
                out.push((g, q));
            }
        }
        out
    }
}

impl std::str::FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let range = |part: &str| -> Result<(usize, usize), String> {
            let (lo, hi) = match part.split_once("..") {
                Some((a, b)) => (a, b.trim_start_matches('=')),
                None => (part, part),
            };
            let lo: usize = lo.trim().parse().map_err(|_| format!("bad range `{part}`"))?;
            let hi: usize = hi.trim().parse().map_err(|_| format!("bad range `{part}`"))?;
            if lo == 0 || lo > hi {
                return Err(format!("range `{part}` must satisfy 1 ≤ MIN ≤ MAX"));
            }
            Ok((lo, hi))
        };
        let (g, q) = s.split_once(',').ok_or("expected G_MIN..G_MAX,Q_MIN..Q_MAX")?;
        Ok(Grid { groups: range(g)?, traits: range(q)? })
    }
}
