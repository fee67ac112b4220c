//! Sparse-representation classification of patch descriptors over a
//! per-query dictionary of nearest gallery atoms, and late fusion of the
//! patch votes into one identity.

pub mod classify;
pub mod dictionary;
pub mod gallery;
pub mod identify;
pub mod lasso;

pub use classify::{class_residuals, fuse_and_decide, FusionWeights, IdentityDecision, PatchClassification, Vote};
pub use dictionary::Dictionary;
pub use gallery::{Extractor, GalleryBuilder, GalleryIndex, ModalityGallery};
pub use identify::{identify, pair_votes, sample_votes, Describer, ModalitySelection, SampleVotes, SrcConfig};
pub use lasso::{kkt_violation, lasso_solve, soft_threshold, LassoConfig, SparseCode};
