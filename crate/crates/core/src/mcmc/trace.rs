use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Parameters of one retained sweep, already expressed in relabeled
/// cluster order. `permutation[g]` is the raw sampler label shown as `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot<T> {
    pub iteration: usize,
    pub pi: Vec<T>,
    pub loadings: Vec<Array2<T>>,
    pub cuts: Vec<Vec<T>>,
    /// Mean trait vector of each cluster's members (zeros when empty).
    pub trait_means: Vec<Vec<T>>,
    pub counts: Vec<usize>,
    pub permutation: Vec<usize>,
    /// Orthogonal transforms applied by alignment, one per cluster.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rotations: Option<Vec<Array2<T>>>,
}

impl<T: Real> Snapshot<T> {
    /// Relabels so that new cluster `g` is current cluster `perm[g]`.
    pub fn permute(&mut self, perm: &[usize]) {
        self.pi = perm.iter().map(|&h| self.pi[h]).collect();
        self.loadings = perm.iter().map(|&h| self.loadings[h].clone()).collect();
        self.trait_means = perm.iter().map(|&h| self.trait_means[h].clone()).collect();
        self.counts = perm.iter().map(|&h| self.counts[h]).collect();
        self.permutation = perm.iter().map(|&h| self.permutation[h]).collect();
        if let Some(r) = &self.rotations {
            self.rotations = Some(perm.iter().map(|&h| r[h].clone()).collect());
        }
    }
}

/// Per-snapshot draws kept only on request (memory grows with snapshots × N).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetainedDraws<T> {
    pub class_probs: Vec<Array2<f32>>,
    pub allocations: Vec<Vec<u16>>,
    pub theta: Vec<Array2<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemAcceptance {
    pub item: String,
    pub attempts: u64,
    pub accepts: u64,
    pub rate: Option<f64>,
    pub burn_in_rate: Option<f64>,
    pub sigma2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RngRecord {
    pub generator: String,
    pub seed: u64,
    pub sweeps: u64,
}

/// Output of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace<T> {
    pub n_groups: usize,
    pub n_traits: usize,
    pub snapshots: Vec<Snapshot<T>>,
    /// N×G counts of relabeled allocations over snapshots.
    pub tallies: Array2<u32>,
    /// Mean of Z over snapshots.
    pub z_mean: Array2<T>,
    pub z_last: Array2<T>,
    pub theta_last: Array2<T>,
    /// Final allocations in relabeled order.
    pub alloc_last: Vec<usize>,
    pub retained: Option<RetainedDraws<T>>,
    pub acceptance: Vec<ItemAcceptance>,
    /// Rows found inconsistent with their observed responses, summed over sweeps.
    pub decode_violations: u64,
    pub rng: RngRecord,
}

impl<T: Real> Trace<T> {
    pub fn n_snapshots(&self) -> usize {
        self.snapshots.len()
    }

    pub fn n_rows(&self) -> usize {
        self.tallies.nrows()
    }

    /// Tallies divided by the snapshot count.
    pub fn membership_probs(&self) -> Array2<f64> {
        let s = self.n_snapshots().max(1) as f64;
        self.tallies.mapv(|c| c as f64 / s)
    }

    /// Applies a per-snapshot relabeling (`perms[s][g]` = current label shown
    /// as `g`) to snapshots and retained draws, then rebuilds the tallies.
    pub fn apply_permutations(&mut self, perms: &[Vec<usize>]) -> Result<()> {
        if perms.len() != self.snapshots.len() {
            return Err(Error::DataShape(format!(
                "{} permutations for {} snapshots",
                perms.len(),
                self.snapshots.len()
            )));
        }
        let retained = self.retained.as_mut().ok_or_else(|| {
            Error::Config("relabeling a finished trace needs retained draws".into())
        })?;
        let g = self.n_groups;
        for (s, perm) in perms.iter().enumerate() {
            self.snapshots[s].permute(perm);
            let probs = &mut retained.class_probs[s];
            let old = probs.clone();
            for (h, &src) in perm.iter().enumerate() {
                probs.column_mut(h).assign(&old.column(src));
            }
            let mut inv = vec![0u16; g];
            for (h, &src) in perm.iter().enumerate() {
                inv[src] = h as u16;
            }
            retained.allocations[s].iter_mut().for_each(|a| *a = inv[*a as usize]);
        }
        if let Some(last) = perms.last() {
            let mut inv = vec![0usize; g];
            for (h, &src) in last.iter().enumerate() {
                inv[src] = h;
            }
            self.alloc_last.iter_mut().for_each(|a| *a = inv[*a]);
        }
        self.tallies.fill(0);
        for alloc in &retained.allocations {
            for (mut row, &a) in self.tallies.axis_iter_mut(Axis(0)).zip(alloc) {
                row[a as usize] += 1;
            }
        }
        Ok(())
    }
}
