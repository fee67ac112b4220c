//! RGB-D face identification from learned local patch embeddings.
//!
//! A face crop is reduced to a set of 20x20 patches around Hessian keypoints,
//! one image patch and one depth patch per keypoint. Each modality has its own
//! small convolutional network trained with a triplet loss. At query time
//! every patch embedding is classified by sparse representation over its
//! nearest gallery embeddings, and patch votes are fused across modalities
//! into one identity.
//!
//! Module map:
//! - [`nn`]: tensors, layers with exact backward passes, SGD, model files.
//! - [`triplet`]: triplet sampling, triplet loss, and the training loop.
//! - [`patch`]: rasters, depth filtering, keypoints, patches, HOG and LBP.
//! - [`sparse`]: dictionary selection, LASSO, per-patch SRC and fusion.
//! - [`harness`]: configuration, datasets, synthetic faces and evaluation.

pub mod error;
pub mod harness;
pub mod nn;
pub mod patch;
pub mod sparse;
pub mod triplet;

pub use error::{Error, Result};
