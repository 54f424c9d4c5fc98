//! Label and rotation alignment of finished traces and posterior summaries.
//!
//! Relabeling runs first so that per-cluster references refer to stable
//! labels; alignment then rotates each snapshot onto those references.

mod align;
mod relabel;
mod summary;

pub use align::{
    align_trace, fit_reference_loadings, fit_reference_loadings_lenient, principal_axis, procrustes_align,
    reference_for_cluster, ReferenceLoadings, ReferenceSource,
};
pub use relabel::{
    best_permutation, relabel_cost, relabel_stephens, OnlineRelabeler, RelabelOutcome, MAX_RELABEL_ITERATIONS,
};
pub use summary::{summarize, ClusterReport};
pub(crate) use summary::argmax_first;
