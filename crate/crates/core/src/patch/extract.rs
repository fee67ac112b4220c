use super::keypoints::Keypoint;
use super::raster::{Modality, Raster};
use crate::error::{Error, Result};
use crate::nn::Tensor;

pub const PATCH_SIDE: usize = 20;
pub const PATCH_LEN: usize = PATCH_SIDE * PATCH_SIDE;
/// Standard deviation below which a patch normalizes to all zeros.
pub const VARIANCE_FLOOR: f32 = 1e-6;

/// A standardized 20x20 crop.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub data: Vec<f32>,
    pub modality: Modality,
    pub keypoint: Keypoint,
    pub label: Option<String>,
}

impl Patch {
    pub fn to_tensor(&self) -> Tensor<f32> {
        Tensor::from_vec(&[1, PATCH_SIDE, PATCH_SIDE], self.data.clone()).expect("patch length")
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * PATCH_SIDE + x]
    }
}

/// Image and depth patches cut around the same keypoint.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchPair {
    pub image: Patch,
    pub depth: Patch,
}

impl PatchPair {
    pub fn get(&self, modality: Modality) -> &Patch {
        match modality {
            Modality::Image => &self.image,
            Modality::Depth => &self.depth,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractConfig {
    /// Pairs whose depth patch has a larger fraction of invalid pixels are
    /// dropped.
    pub max_invalid_depth: f32,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig { max_invalid_depth: 0.5 }
    }
}

/// Zero mean, unit population variance; near-constant input becomes zeros.
pub fn standardize(values: &mut [f32]) {
    let n = values.len() as f64;
    let mean = values.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
    let var = values.iter().map(|&v| (f64::from(v) - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if std < f64::from(VARIANCE_FLOOR) {
        values.iter_mut().for_each(|v| *v = 0.0);
    } else {
        values.iter_mut().for_each(|v| *v = ((f64::from(*v) - mean) / std) as f32);
    }
}

fn crop(r: &Raster<f32>, left: usize, top: usize) -> Vec<f32> {
    let mut out = Vec::with_capacity(PATCH_LEN);
    for y in top..top + PATCH_SIDE {
        for x in left..left + PATCH_SIDE {
            out.push(r.get(x, y));
        }
    }
    out
}

/// Cuts the 20x20 window with top-left corner (x - 10, y - 10) from both
/// rasters for every keypoint.
///
/// Invalid depth pixels are replaced by the mean of the valid ones before
/// standardization.
pub fn extract_patches(
    image: &Raster<f32>,
    depth: &Raster<f32>,
    keypoints: &[Keypoint],
    config: &ExtractConfig,
) -> Result<Vec<PatchPair>> {
    if image.width() != depth.width() || image.height() != depth.height() {
        return Err(Error::shape("image and depth rasters differ in size"));
    }
    let half = PATCH_SIDE / 2;
    let mut pairs = Vec::with_capacity(keypoints.len());
    for kp in keypoints {
        let (cx, cy) = (kp.x.round(), kp.y.round());
        if cx < half as f32 || cy < half as f32 {
            return Err(Error::invalid(format!("keypoint ({}, {}) too close to the border", kp.x, kp.y)));
        }
        let (left, top) = (cx as usize - half, cy as usize - half);
        if left + PATCH_SIDE > image.width() || top + PATCH_SIDE > image.height() {
            return Err(Error::invalid(format!("keypoint ({}, {}) too close to the border", kp.x, kp.y)));
        }
        let mut dpatch = crop(depth, left, top);
        let valid: Vec<f32> = dpatch.iter().copied().filter(|&d| d > 0.0).collect();
        let invalid_fraction = 1.0 - valid.len() as f32 / PATCH_LEN as f32;
        if invalid_fraction > config.max_invalid_depth || valid.is_empty() {
            continue;
        }
        let fill = valid.iter().map(|&v| f64::from(v)).sum::<f64>() / valid.len() as f64;
        dpatch.iter_mut().filter(|d| **d <= 0.0).for_each(|d| *d = fill as f32);
        standardize(&mut dpatch);
        let mut ipatch = crop(image, left, top);
        standardize(&mut ipatch);
        pairs.push(PatchPair {
            image: Patch { data: ipatch, modality: Modality::Image, keypoint: *kp, label: None },
            depth: Patch { data: dpatch, modality: Modality::Depth, keypoint: *kp, label: None },
        });
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kp(x: f32, y: f32) -> Keypoint {
        Keypoint { x, y, scale: 1.2, response: 1.0 }
    }

    #[test]
    fn corner_keypoint_geometry() {
        let img = Raster::from_fn(96, 96, |x, y| (x + 100 * y) as f32);
        let depth = Raster::filled(96, 96, 500.0);
        let pairs = extract_patches(&img, &depth, &[kp(10.0, 10.0)], &ExtractConfig::default()).unwrap();
        assert_eq!(pairs.len(), 1);
        // raw window rows/cols 0..19; standardized ramp keeps its order
        let p = &pairs[0].image;
        assert!(p.get(0, 0) < p.get(19, 0) && p.get(19, 0) < p.get(0, 19));
        let expect_first = {
            let mut raw: Vec<f32> = (0..20).flat_map(|y| (0..20).map(move |x| (x + 100 * y) as f32)).collect();
            standardize(&mut raw);
            raw
        };
        assert_eq!(p.data, expect_first);
        // constant depth normalizes to zeros
        assert!(pairs[0].depth.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pairs_follow_keypoints_and_standardize() {
        let img = Raster::from_fn(96, 96, |x, y| ((x * 31 + y * 17) % 97) as f32);
        let depth = Raster::from_fn(96, 96, |x, y| 600.0 + (x * y % 13) as f32);
        let kps = [kp(30.0, 40.0), kp(50.0, 60.0), kp(85.0, 85.0)];
        let pairs = extract_patches(&img, &depth, &kps, &ExtractConfig::default()).unwrap();
        assert_eq!(pairs.len(), 3);
        for (pair, k) in pairs.iter().zip(&kps) {
            assert_eq!(pair.image.keypoint, *k);
            assert_eq!(pair.depth.keypoint, *k);
            for p in [&pair.image, &pair.depth] {
                assert_eq!(p.data.len(), 400);
                let mean: f64 = p.data.iter().map(|&v| v as f64).sum::<f64>() / 400.0;
                let var: f64 = p.data.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / 400.0;
                assert!(mean.abs() < 1e-5 && (var.sqrt() - 1.0).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn mostly_invalid_depth_drops_the_pair() {
        let img = Raster::from_fn(96, 96, |x, _| x as f32);
        let depth = Raster::from_fn(96, 96, |x, _| if x < 45 { 0.0 } else { 700.0 });
        let pairs = extract_patches(&img, &depth, &[kp(40.0, 40.0), kp(60.0, 40.0)], &ExtractConfig::default()).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].image.keypoint.x, 60.0);
    }

    #[test]
    fn out_of_bounds_keypoint_is_an_error() {
        let r = Raster::filled(96, 96, 1.0);
        assert!(extract_patches(&r, &r, &[kp(5.0, 50.0)], &ExtractConfig::default()).is_err());
        assert!(extract_patches(&r, &r, &[kp(87.0, 50.0)], &ExtractConfig::default()).is_err());
    }
}
