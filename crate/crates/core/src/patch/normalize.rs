use super::depth::{depth_preprocess, DepthFilterConfig};
use super::raster::{FaceImage, FaceSample, Raster};
use crate::error::{Error, Result};

pub const FACE_SIZE: usize = 96;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundingBox {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl BoundingBox {
    pub fn full(width: usize, height: usize) -> Self {
        BoundingBox { x: 0, y: 0, width, height }
    }

    fn check(&self, width: usize, height: usize) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid(format!("degenerate face box {self:?}")));
        }
        if self.x + self.width > width || self.y + self.height > height {
            return Err(Error::invalid(format!(
                "face box {self:?} exceeds {width}x{height} raster"
            )));
        }
        Ok(())
    }
}

/// A face resampled to 96x96: gray intensities and filtered depth in mm.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedFace {
    pub image: Raster<f32>,
    pub depth: Raster<f32>,
}

/// Source coordinate, lower neighbor, upper neighbor and blend weight for
/// output index `i` when resampling `src` pixels onto `dst` (pixel centers
/// aligned).
pub(crate) fn sample_axis(i: usize, src: usize, dst: usize) -> (usize, usize, f32) {
    let s = ((i as f64 + 0.5) * src as f64 / dst as f64 - 0.5).clamp(0.0, (src - 1) as f64);
    let lo = s.floor() as usize;
    let hi = (lo + 1).min(src - 1);
    (lo, hi, (s - lo as f64) as f32)
}

fn crop<T: Copy>(r: &Raster<T>, b: &BoundingBox) -> Raster<T> {
    Raster::from_fn(b.width, b.height, |x, y| r.get(b.x + x, b.y + y))
}

pub fn resize_bilinear(r: &Raster<f32>, width: usize, height: usize) -> Raster<f32> {
    Raster::from_fn(width, height, |u, v| {
        let (x0, x1, fx) = sample_axis(u, r.width(), width);
        let (y0, y1, fy) = sample_axis(v, r.height(), height);
        let top = r.get(x0, y0) * (1.0 - fx) + r.get(x1, y0) * fx;
        let bottom = r.get(x0, y1) * (1.0 - fx) + r.get(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    })
}

/// Bilinear resize in which invalid (zero) neighbors get zero weight.
pub fn resize_depth(r: &Raster<f32>, width: usize, height: usize) -> Raster<f32> {
    Raster::from_fn(width, height, |u, v| {
        let (x0, x1, fx) = sample_axis(u, r.width(), width);
        let (y0, y1, fy) = sample_axis(v, r.height(), height);
        let taps = [
            (x0, y0, (1.0 - fx) * (1.0 - fy)),
            (x1, y0, fx * (1.0 - fy)),
            (x0, y1, (1.0 - fx) * fy),
            (x1, y1, fx * fy),
        ];
        let (mut num, mut den) = (0.0f32, 0.0f32);
        for (x, y, w) in taps {
            let d = r.get(x, y);
            if d > 0.0 && w > 0.0 {
                num += w * d;
                den += w;
            }
        }
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    })
}

/// Crops image and (already filtered) depth to `bbox`, converts the image to
/// gray and resamples both to 96x96.
pub fn normalize_face(image: &FaceImage, depth: &Raster<f32>, bbox: BoundingBox) -> Result<NormalizedFace> {
    if image.width() != depth.width() || image.height() != depth.height() {
        return Err(Error::shape(format!(
            "image {}x{} and depth {}x{} are not registered",
            image.width(),
            image.height(),
            depth.width(),
            depth.height()
        )));
    }
    bbox.check(image.width(), image.height())?;
    let gray = crop(&image.to_gray(), &bbox);
    let depth = crop(depth, &bbox);
    Ok(NormalizedFace {
        image: resize_bilinear(&gray, FACE_SIZE, FACE_SIZE),
        depth: resize_depth(&depth, FACE_SIZE, FACE_SIZE),
    })
}

/// Depth filtering followed by [`normalize_face`]; `bbox` defaults to the
/// whole raster.
pub fn prepare_face(sample: &FaceSample, bbox: Option<BoundingBox>, filter: &DepthFilterConfig) -> Result<NormalizedFace> {
    sample.validate()?;
    if !sample.registered {
        return Err(Error::invalid("image and depth must be registered"));
    }
    let bbox = bbox.unwrap_or(BoundingBox::full(sample.image.width(), sample.image.height()));
    let depth = depth_preprocess(&sample.depth, filter);
    normalize_face(&sample.image, &depth, bbox)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_size_gray_is_identity() {
        let img = Raster::from_fn(96, 96, |x, y| ((x * 7 + y * 3) % 256) as u8);
        let depth = Raster::filled(96, 96, 700.0f32);
        let out = normalize_face(&FaceImage::Gray(img.clone()), &depth, BoundingBox::full(96, 96)).unwrap();
        for (a, b) in out.image.data().iter().zip(img.data()) {
            assert!((a - f32::from(*b)).abs() < 1e-4);
        }
        assert!(out.depth.data().iter().all(|&d| d == 700.0));
    }

    #[test]
    fn constant_crop_stays_constant() {
        let img = FaceImage::Gray(Raster::filled(200, 200, 77u8));
        let depth = Raster::filled(200, 200, 640.0f32);
        let out = normalize_face(&img, &depth, BoundingBox { x: 4, y: 8, width: 192, height: 192 }).unwrap();
        assert!(out.image.data().iter().all(|&v| (v - 77.0).abs() < 1e-4));
        assert!(out.depth.data().iter().all(|&v| (v - 640.0).abs() < 1e-3));
    }

    #[test]
    fn checkerboard_matches_direct_bilinear_oracle() {
        let img = Raster::from_fn(150, 130, |x, y| if (x / 3 + y / 5) % 2 == 0 { 250u8 } else { 10 });
        let out = normalize_face(
            &FaceImage::Gray(img.clone()),
            &Raster::filled(150, 130, 1.0),
            BoundingBox { x: 10, y: 20, width: 111, height: 97 },
        )
        .unwrap();
        for v in 0..96 {
            for u in 0..96 {
                // map output center to source continuous coordinates
                let sx = ((u as f64 + 0.5) * 111.0 / 96.0 - 0.5).max(0.0).min(110.0);
                let sy = ((v as f64 + 0.5) * 97.0 / 96.0 - 0.5).max(0.0).min(96.0);
                let mut acc = 0.0;
                for (xi, wx) in [(sx.floor(), 1.0 - sx.fract()), (sx.floor() + 1.0, sx.fract())] {
                    for (yi, wy) in [(sy.floor(), 1.0 - sy.fract()), (sy.floor() + 1.0, sy.fract())] {
                        let (xi, yi) = ((xi as usize).min(110), (yi as usize).min(96));
                        acc += wx * wy * img.get(10 + xi, 20 + yi) as f64;
                    }
                }
                assert!((out.image.get(u, v) as f64 - acc).abs() <= 1.0);
            }
        }
    }

    #[test]
    fn color_uses_luma_weights() {
        let img = FaceImage::Color(Raster::filled(96, 96, [100, 200, 50]));
        let out = normalize_face(&img, &Raster::filled(96, 96, 1.0), BoundingBox::full(96, 96)).unwrap();
        let luma = 0.299 * 100.0 + 0.587 * 200.0 + 0.114 * 50.0;
        assert!((out.image.get(3, 3) - luma).abs() < 1e-3);
    }

    #[test]
    fn invalid_depth_neighbors_are_ignored() {
        let mut d = Raster::filled(4, 4, 500.0f32);
        d.set(1, 1, 0.0);
        let out = resize_depth(&d, 2, 2);
        assert!(out.data().iter().all(|&v| (v - 500.0).abs() < 1e-3));
        let out = resize_depth(&Raster::filled(4, 4, 0.0), 2, 2);
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn degenerate_box_is_an_error() {
        let img = FaceImage::Gray(Raster::filled(10, 10, 0u8));
        let d = Raster::filled(10, 10, 1.0);
        assert!(normalize_face(&img, &d, BoundingBox { x: 0, y: 0, width: 0, height: 5 }).is_err());
        assert!(normalize_face(&img, &d, BoundingBox { x: 5, y: 0, width: 6, height: 5 }).is_err());
    }
}
