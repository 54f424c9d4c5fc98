use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::survey::ResponseMatrix;

/// Replicated count substituted for a top pattern that never occurs in a replicate.
pub const ZERO_COUNT_SUBSTITUTE: f64 = 0.5;

/// Counts of complete response patterns.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PatternTable {
    counts: HashMap<Vec<u16>, usize>,
    total: usize,
}

impl PatternTable {
    pub fn from_responses(y: &ResponseMatrix) -> Self {
        let mut counts: HashMap<Vec<u16>, usize> = HashMap::new();
        for row in y.values().rows() {
            *counts.entry(row.to_vec()).or_default() += 1;
        }
        PatternTable { counts, total: y.n_rows() }
    }

    pub fn from_counts<I: IntoIterator<Item = (Vec<u16>, usize)>>(items: I) -> Self {
        let mut counts: HashMap<Vec<u16>, usize> = HashMap::new();
        let mut total = 0;
        for (p, c) in items {
            *counts.entry(p).or_default() += c;
            total += c;
        }
        PatternTable { counts, total }
    }

    pub fn count(&self, pattern: &[u16]) -> usize {
        self.counts.get(pattern).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn n_distinct(&self) -> usize {
        self.counts.len()
    }

    /// All patterns by decreasing count, ties in lexicographic order.
    pub fn ranked(&self) -> Vec<(&[u16], usize)> {
        let mut v: Vec<(&[u16], usize)> = self.counts.iter().map(|(p, &c)| (p.as_slice(), c)).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        v
    }

    /// The `t` most frequent patterns.
    pub fn top(&self, t: usize) -> Vec<(&[u16], usize)> {
        let mut v = self.ranked();
        v.truncate(t);
        v
    }

    /// Patterns seen at least `min_count` times.
    pub fn at_least(&self, min_count: usize) -> Vec<(&[u16], usize)> {
        self.ranked().into_iter().take_while(|&(_, c)| c >= min_count).collect()
    }
}

fn pearson_sum(patterns: &[(&[u16], usize)], replicated: &PatternTable) -> f64 {
    patterns
        .iter()
        .map(|&(p, o)| {
            let r = replicated.count(p);
            let e = if r == 0 { ZERO_COUNT_SUBSTITUTE } else { r as f64 };
            (o as f64 - e).powi(2) / e
        })
        .sum()
}

/// Truncated sum of squared Pearson residuals over the `t` most frequent
/// observed patterns: Σ (o − p)² / p with p the replicated count.
pub fn tsspr(observed: &PatternTable, replicated: &PatternTable, t: usize) -> f64 {
    pearson_sum(&observed.top(t), replicated)
}

/// Same statistic over every observed pattern with count ≥ `min_count`.
pub fn tsspr_min_count(observed: &PatternTable, replicated: &PatternTable, min_count: usize) -> f64 {
    pearson_sum(&observed.at_least(min_count), replicated)
}
