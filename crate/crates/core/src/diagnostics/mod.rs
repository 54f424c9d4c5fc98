//! Model assessment and cluster description: posterior predictive pattern
//! checks, clustering uncertainty, latent residuals, Hellinger distances and
//! response profiles.

mod distance;
mod patterns;
mod profiles;
mod replicate;
mod residuals;

pub use distance::{adjusted_rand_index, hellinger_item, hellinger_profile, HellingerComparison};
pub use patterns::{tsspr, tsspr_min_count, PatternTable, ZERO_COUNT_SUBSTITUTE};
pub use profiles::{cluster_item_profiles, modal_response_table, ClusterItemProfile, ModalEntry, ModalRow};
pub use replicate::{posterior_predictive_replicate, quantile_sorted, tsspr_replicates, TssprSummary};
pub use residuals::{bayesian_latent_residuals, conditional_residuals, ks_statistic, ResidualOptions, ResidualSeries};

/// 1 − max_g P(cluster g); in [0, 1 − 1/G] for a probability row.
pub fn clustering_uncertainty(probs: &[f64]) -> f64 {
    1.0 - probs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}
