//! Configuration, datasets, synthetic faces, and the train / enroll /
//! evaluate workflows behind the command-line tool.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod report;
pub mod synth;
pub mod workflow;

pub use config::Config;
pub use manifest::{load_dataset, Dataset, DatasetManifest, ManifestEntry, Split};
pub use report::{Accuracy, EvalReport, QueryResult};
pub use synth::{generate_faces, write_synthetic, SyntheticSpec};
pub use workflow::{embedding_separation, enroll, evaluate, extract_dataset_patches, patch_dataset, train_modality};
