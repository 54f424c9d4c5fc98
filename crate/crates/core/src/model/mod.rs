//! The generative mixture: parameters, response probabilities, decode
//! rules, marginal latent density and a simulator.

mod density;
mod params;
mod prob;
mod simulate;

pub use density::{marginal_latent_density, ClusterFactor};
pub use params::{ClusterParams, LatentState, Thresholds};
pub use prob::{decode_nominal, decode_ordinal, decode_row, nominal_case, ordinal_response_prob, NominalCase};
pub use simulate::{simulate_dataset, simulate_row};
