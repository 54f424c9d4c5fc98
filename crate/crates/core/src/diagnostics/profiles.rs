use serde::{Deserialize, Serialize};

use crate::survey::{ResponseMatrix, SurveySchema};

/// Empirical level frequencies of every item within every hard cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterItemProfile {
    pub sizes: Vec<usize>,
    /// `probs[g][j]`; `None` for an empty cluster.
    pub probs: Vec<Vec<Option<Vec<f64>>>>,
}

impl ClusterItemProfile {
    pub fn n_groups(&self) -> usize {
        self.sizes.len()
    }

    pub fn n_items(&self) -> usize {
        self.probs.first().map_or(0, |p| p.len())
    }

    pub fn get(&self, g: usize, j: usize) -> Option<&[f64]> {
        self.probs[g][j].as_deref()
    }
}

pub fn cluster_item_profiles(
    y: &ResponseMatrix,
    hard_assignment: &[usize],
    schema: &SurveySchema,
    n_groups: usize,
) -> ClusterItemProfile {
    let mut sizes = vec![0usize; n_groups];
    for &g in hard_assignment {
        sizes[g] += 1;
    }
    let mut counts: Vec<Vec<Vec<usize>>> = (0..n_groups)
        .map(|_| schema.items().iter().map(|it| vec![0; it.n_levels()]).collect())
        .collect();
    for (i, &g) in hard_assignment.iter().enumerate() {
        for (j, &v) in y.row(i).iter().enumerate() {
            counts[g][j][v as usize - 1] += 1;
        }
    }
    let probs = counts
        .into_iter()
        .zip(&sizes)
        .map(|(items, &n)| {
            items
                .into_iter()
                .map(|c| (n > 0).then(|| c.iter().map(|&v| v as f64 / n as f64).collect()))
                .collect()
        })
        .collect();
    ClusterItemProfile { sizes, probs }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModalEntry {
    /// 1-based level.
    pub level: usize,
    pub label: String,
    /// Another level reached the same frequency; the lowest was chosen.
    pub tie: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModalRow {
    pub item: String,
    /// One entry per cluster; `None` for an empty cluster.
    pub modes: Vec<Option<ModalEntry>>,
}

/// Items on which the clusters' modal responses differ.
pub fn modal_response_table(profiles: &ClusterItemProfile, schema: &SurveySchema) -> Vec<ModalRow> {
    let mut rows = Vec::new();
    for j in 0..profiles.n_items() {
        let item = schema.item(j);
        let modes: Vec<Option<ModalEntry>> = (0..profiles.n_groups())
            .map(|g| {
                profiles.get(g, j).map(|p| {
                    let best = crate::postprocess::argmax_first(p.iter().copied());
                    let tie = p.iter().enumerate().any(|(k, &v)| k != best && v == p[best]);
                    ModalEntry { level: best + 1, label: item.label(best + 1).to_string(), tie }
                })
            })
            .collect();
        let levels: Vec<usize> = modes.iter().flatten().map(|m| m.level).collect();
        if levels.windows(2).any(|w| w[0] != w[1]) {
            rows.push(ModalRow { item: item.name.clone(), modes });
        }
    }
    rows
}
