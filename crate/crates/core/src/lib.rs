//! Mixture of factor analyzers for mixed binary, ordinal and nominal survey
//! data, fitted by a Metropolis-within-Gibbs sampler.
//!
//! Numerical code is generic over [`scalar::Real`]; the aliases below fix
//! the scalar for the common cases.

pub mod error;
pub mod linalg;
pub mod rng;
pub mod scalar;
pub mod special;
pub mod truncnorm;
pub mod survey;
pub mod model;
pub mod mcmc;
pub mod postprocess;
pub mod diagnostics;

pub use error::{Error, Result};

pub type ClusterParams64 = model::ClusterParams<f64>;
pub type ClusterParams32 = model::ClusterParams<f32>;
pub type Thresholds64 = model::Thresholds<f64>;
pub type Thresholds32 = model::Thresholds<f32>;
pub type LatentState64 = model::LatentState<f64>;
pub type LatentState32 = model::LatentState<f32>;
pub type Priors64 = mcmc::Priors<f64>;
pub type Priors32 = mcmc::Priors<f32>;
pub type Trace64 = mcmc::Trace<f64>;
pub type Trace32 = mcmc::Trace<f32>;
pub type Snapshot64 = mcmc::Snapshot<f64>;
pub type Snapshot32 = mcmc::Snapshot<f32>;
pub type ClusterReport64 = postprocess::ClusterReport<f64>;
pub type ClusterReport32 = postprocess::ClusterReport<f32>;
pub type ReferenceLoadings64 = postprocess::ReferenceLoadings<f64>;
pub type ReferenceLoadings32 = postprocess::ReferenceLoadings<f32>;
