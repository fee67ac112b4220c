use super::depth::DepthFilterConfig;
use super::extract::{extract_patches, ExtractConfig, PatchPair};
use super::keypoints::{detect_keypoints, Keypoint, KeypointConfig};
use super::normalize::{prepare_face, BoundingBox, NormalizedFace};
use super::raster::FaceSample;
use crate::error::Result;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PatchConfig {
    pub filter: DepthFilterConfig,
    pub keypoints: KeypointConfig,
    pub extract: ExtractConfig,
}

#[derive(Debug, Clone)]
pub struct FacePatches {
    pub face: NormalizedFace,
    pub keypoints: Vec<Keypoint>,
    pub pairs: Vec<PatchPair>,
}

/// Filter depth, crop and resize to 96x96, detect keypoints on the image and
/// cut paired patches. The sample's label is copied onto every patch.
pub fn face_patches(sample: &FaceSample, bbox: Option<BoundingBox>, config: &PatchConfig) -> Result<FacePatches> {
    let face = prepare_face(sample, bbox, &config.filter)?;
    let keypoints = detect_keypoints(&face.image, &config.keypoints);
    let mut pairs = extract_patches(&face.image, &face.depth, &keypoints, &config.extract)?;
    for pair in &mut pairs {
        pair.image.label = sample.label.clone();
        pair.depth.label = sample.label.clone();
    }
    Ok(FacePatches { face, keypoints, pairs })
}
