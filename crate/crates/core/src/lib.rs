//! Targeted active learning for object detection via submodular mutual
//! information over region-of-interest embeddings.

pub mod acquisition;
pub mod error;
pub mod io;
pub mod maximizer;
pub mod objectives;
pub mod similarity;
pub mod simulator;

pub use error::{Error, Result};
pub use maximizer::{maximize, Maximizer, SelectionResult};
pub use objectives::{eval, init_state, ObjectiveKind, ObjectiveState};
pub use similarity::{
    build_pairwise_kernel, build_query_kernel, targeted_sim, DenseMatrix, EmbeddingBag,
    KernelKind, NonnegMode, SimilarityKernel,
};
