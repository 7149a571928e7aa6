//! Unsupervised feature selection: entropy-based ranking followed by a
//! forward wrapper search scored with the scatter-matrix invariant
//! criterion `tr(P_W⁻¹ P_B)`.

mod entropy;
mod scatter;
mod wrapper;

pub use entropy::{entropy_rank, similarity_entropy, EntropyRanking, FeatureEntropy};
pub use scatter::{scatter_criterion, ScatterStats, RIDGE};
pub use wrapper::{wrapper_select, SubsetSelection, WrapperOptions};
