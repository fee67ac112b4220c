//! Depth map cleanup: invalid-aware 3x3 median, then a 5x5 bilateral
//! filter over valid pixels. Zero marks an invalid pixel throughout.

use super::raster::Raster;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthFilterConfig {
    pub bilateral_spatial_sigma: f32,
    /// Millimeters.
    pub bilateral_range_sigma: f32,
    pub bilateral_radius: usize,
}

impl Default for DepthFilterConfig {
    fn default() -> Self {
        DepthFilterConfig {
            bilateral_spatial_sigma: 2.0,
            bilateral_range_sigma: 30.0,
            bilateral_radius: 2,
        }
    }
}

/// Median of the valid values in each 3x3 window. An even number of valid
/// values takes the mean of the middle two; no valid values stays invalid.
pub fn median3x3(depth: &Raster<f32>) -> Raster<f32> {
    let (w, h) = (depth.width(), depth.height());
    let mut window = Vec::with_capacity(9);
    Raster::from_fn(w, h, |x, y| {
        window.clear();
        for yy in y.saturating_sub(1)..(y + 2).min(h) {
            for xx in x.saturating_sub(1)..(x + 2).min(w) {
                let v = depth.get(xx, yy);
                if v > 0.0 {
                    window.push(v);
                }
            }
        }
        if window.is_empty() {
            return 0.0;
        }
        window.sort_by(f32::total_cmp);
        let n = window.len();
        if n % 2 == 1 {
            window[n / 2]
        } else {
            0.5 * (window[n / 2 - 1] + window[n / 2])
        }
    })
}

/// Bilateral filter of valid pixels; invalid pixels and invalid neighbors
/// are left out.
pub fn bilateral(depth: &Raster<f32>, config: &DepthFilterConfig) -> Raster<f32> {
    let (w, h) = (depth.width(), depth.height());
    let r = config.bilateral_radius;
    let two_ss = 2.0 * config.bilateral_spatial_sigma * config.bilateral_spatial_sigma;
    let two_rs = 2.0 * config.bilateral_range_sigma * config.bilateral_range_sigma;
    let side = 2 * r + 1;
    let spatial: Vec<f32> = (0..side * side)
        .map(|i| {
            let dy = (i / side) as f32 - r as f32;
            let dx = (i % side) as f32 - r as f32;
            (-(dx * dx + dy * dy) / two_ss).exp()
        })
        .collect();
    Raster::from_fn(w, h, |x, y| {
        let center = depth.get(x, y);
        if center <= 0.0 {
            return 0.0;
        }
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for yy in y.saturating_sub(r)..(y + r + 1).min(h) {
            for xx in x.saturating_sub(r)..(x + r + 1).min(w) {
                let v = depth.get(xx, yy);
                if v <= 0.0 {
                    continue;
                }
                let k = (yy + r - y) * side + (xx + r - x);
                let diff = v - center;
                let wgt = f64::from(spatial[k] * (-(diff * diff) / two_rs).exp());
                num += wgt * f64::from(v);
                den += wgt;
            }
        }
        (num / den) as f32
    })
}

pub fn depth_preprocess(depth: &Raster<u16>, config: &DepthFilterConfig) -> Raster<f32> {
    bilateral(&median3x3(&depth.map(f32::from)), config)
}
