//! Triplet-loss training of one patch network per modality.

pub mod dataset;
pub mod loss;
pub mod trainer;

pub use dataset::{build_pool, sample_triplet, PatchDataset, PatchRef, Triplet, TripletPool};
pub use loss::{batch_triplet_loss, triplet_loss, triplet_loss_gradients, TripletGrads, TripletTerm};
pub use trainer::{heldout_loss, train, EpochLog, HeldOutTriplets, TrainConfig, TrainOutcome};
