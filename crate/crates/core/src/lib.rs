//! Expectation-maximization contrastive toolkit.
//!
//! * [`emcl`]: EM routing of stacked video/text embeddings onto a rank-`K`
//!   subspace, with cross-batch initial-value maintenance
//! * [`gmm`]: diagonal Gaussian mixture EM, used as a reference for EM
//!   mechanics
//! * [`contrastive`]: cosine similarity, symmetric InfoNCE, inverted softmax
//! * [`retrieval`]: Recall@K and median rank
//! * [`synthetic`]: labeled synthetic batches, variance diagnostics, PCA

pub mod contrastive;
pub mod emcl;
pub mod error;
pub mod gmm;
pub mod linalg;
pub mod retrieval;
pub mod synthetic;

pub use error::{Error, ErrorKind, Result};
