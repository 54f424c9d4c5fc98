//! Metropolis-within-Gibbs sampling of the mixture posterior.

mod chain;
mod config;
mod geweke;
mod init;
mod joint;
mod thresholds;
mod trace;
mod updates;

use serde::{Deserialize, Serialize};

use crate::model::{ClusterParams, LatentState, Thresholds};

pub use chain::{run_chain, Sampler, UpdateMask};
pub use config::{ChainConfig, Corruption, Priors};
pub use geweke::{geweke_joint_test, GewekeConfig, GewekeMoment, GewekeReport};
pub use init::{initial_thresholds, initialize, kmodes};
pub use joint::log_joint;
pub use thresholds::{
    propose_thresholds, proposal_log_ratio, threshold_log_likelihood, threshold_log_ratio, ThresholdTuner,
};
pub use trace::{ItemAcceptance, RetainedDraws, RngRecord, Snapshot, Trace};
pub use updates::{
    allocation_probs, cluster_counts, conditional_means, decode_mismatches, draw_latent_row, draw_nominal_block,
    draw_index, draw_ordinal, draw_traits,
    item_param_posterior, update_allocations, update_item_params, update_latent, update_traits,
    update_weights, LoadingPrior, Observed, SweepKey,
};

/// Complete sampler state: latent quantities plus parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState<T> {
    pub latent: LatentState<T>,
    pub params: ClusterParams<T>,
    pub thresholds: Thresholds<T>,
}
