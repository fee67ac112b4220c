//! From a registered RGB-D face to paired, standardized 20x20 patches, plus
//! the hand-crafted baseline descriptors.

pub mod depth;
pub mod dump;
pub mod extract;
pub mod hog;
pub mod keypoints;
pub mod lbp;
pub mod normalize;
pub mod pipeline;
pub mod pnm;
pub mod raster;

pub use depth::{depth_preprocess, DepthFilterConfig};
pub use dump::{decode_patch_dump, encode_patch_dump};
pub use extract::{extract_patches, ExtractConfig, Patch, PatchPair, PATCH_LEN, PATCH_SIDE};
pub use hog::{hog_descriptor, HOG_DIM};
pub use keypoints::{detect_keypoints, Keypoint, KeypointConfig};
pub use lbp::{lbp_descriptor, LBP_DIM};
pub use normalize::{normalize_face, prepare_face, BoundingBox, NormalizedFace, FACE_SIZE};
pub use pnm::{decode_pnm, encode_pgm16, encode_pgm8, encode_ppm, Pnm};
pub use raster::{FaceImage, FaceSample, Modality, Raster, Rgb};
pub use pipeline::{face_patches, FacePatches, PatchConfig};
