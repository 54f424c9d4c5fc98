use serde::{Deserialize, Serialize};

use super::profiles::ClusterItemProfile;
use crate::error::{Error, Result};

/// H(p, q) = √(½ Σ_k (√p_k − √q_k)²), in [0, 1].
pub fn hellinger_item(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DataShape(format!(
            "probability vectors of length {} and {}",
            p.len(),
            q.len()
        )));
    }
    let s: f64 = p.iter().zip(q).map(|(a, b)| (a.sqrt() - b.sqrt()).powi(2)).sum();
    Ok((0.5 * s).sqrt().min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HellingerComparison {
    pub first: usize,
    pub second: usize,
    /// Per-item distance; `None` when either cluster has no members.
    pub per_item: Vec<Option<f64>>,
    pub total: f64,
}

/// Per-item distances between two clusters' response profiles and their sum.
pub fn hellinger_profile(profiles: &ClusterItemProfile, first: usize, second: usize) -> Result<HellingerComparison> {
    let per_item = (0..profiles.n_items())
        .map(|j| match (profiles.get(first, j), profiles.get(second, j)) {
            (Some(p), Some(q)) => hellinger_item(p, q).map(Some),
            _ => Ok(None),
        })
        .collect::<Result<Vec<_>>>()?;
    let total = per_item.iter().flatten().sum();
    Ok(HellingerComparison { first, second, per_item, total })
}

/// Adjusted Rand index of two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings differ in length");
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0u64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let c2 = |v: u64| (v * v.saturating_sub(1)) as f64 / 2.0;
    let sum_cells: f64 = table.iter().flatten().map(|&v| c2(v)).sum();
    let sum_a: f64 = table.iter().map(|r| c2(r.iter().sum())).sum();
    let sum_b: f64 = (0..kb).map(|c| c2(table.iter().map(|r| r[c]).sum())).sum();
    let total = c2(n as u64);
    if total == 0.0 {
        return 1.0;
    }
    let expected = sum_a * sum_b / total;
    let max = 0.5 * (sum_a + sum_b);
    if (max - expected).abs() < f64::EPSILON {
        return 1.0;
    }
    (sum_cells - expected) / (max - expected)
}
