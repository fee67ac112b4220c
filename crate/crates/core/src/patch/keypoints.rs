//! Hessian-determinant blob detector on an integral image, in the style of
//! the SURF detector: box-filter second derivatives at several filter sizes,
//! `det = Dxx * Dyy - (0.9 * Dxy)^2`, thresholding and 3x3x3 non-maximum
//! suppression over space and scale.

use super::normalize::FACE_SIZE;
use super::raster::Raster;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub x: f32,
    pub y: f32,
    /// Gaussian scale equivalent of the filter, `1.2 * size / 9` pixels.
    pub scale: f32,
    pub response: f32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeypointConfig {
    /// Minimum determinant response, for intensities scaled to [0, 1].
    pub threshold: f32,
    pub max_keypoints: usize,
    /// Box filter side lengths; each must be an odd multiple of 3.
    pub filter_sizes: Vec<usize>,
    /// Keypoints closer than this to any border are dropped.
    pub border: usize,
}

impl Default for KeypointConfig {
    fn default() -> Self {
        KeypointConfig {
            threshold: 0.002,
            max_keypoints: 64,
            filter_sizes: vec![9, 15, 21],
            border: 10,
        }
    }
}

/// Summed-area table with a zero first row and column.
pub struct IntegralImage {
    width: usize,
    height: usize,
    table: Vec<f64>,
}

impl IntegralImage {
    pub fn new(img: &Raster<f32>) -> Self {
        let (w, h) = (img.width(), img.height());
        let mut table = vec![0.0; (w + 1) * (h + 1)];
        for y in 0..h {
            let mut row = 0.0;
            for x in 0..w {
                row += f64::from(img.get(x, y));
                table[(y + 1) * (w + 1) + x + 1] = table[y * (w + 1) + x + 1] + row;
            }
        }
        IntegralImage { width: w, height: h, table }
    }

    /// Sum over rows `[row, row + rows)` and columns `[col, col + cols)`,
    /// clipped to the image.
    pub fn box_sum(&self, row: i64, col: i64, rows: i64, cols: i64) -> f64 {
        let clamp_r = |v: i64| v.clamp(0, self.height as i64) as usize;
        let clamp_c = |v: i64| v.clamp(0, self.width as i64) as usize;
        let (r0, r1) = (clamp_r(row), clamp_r(row + rows));
        let (c0, c1) = (clamp_c(col), clamp_c(col + cols));
        if r0 >= r1 || c0 >= c1 {
            return 0.0;
        }
        let s = self.width + 1;
        self.table[r1 * s + c1] - self.table[r0 * s + c1] - self.table[r1 * s + c0] + self.table[r0 * s + c0]
    }
}

/// Determinant-of-Hessian response of one filter size at every pixel.
pub fn hessian_response(ii: &IntegralImage, size: usize) -> Raster<f32> {
    let l = (size / 3) as i64;
    let b = ((size - 1) / 2) as i64;
    let w = size as i64;
    let inv_area = 1.0 / (w * w) as f64;
    Raster::from_fn(ii.width, ii.height, |x, y| {
        let (r, c) = (y as i64, x as i64);
        let dxx = ii.box_sum(r - l + 1, c - b, 2 * l - 1, w) - 3.0 * ii.box_sum(r - l + 1, c - l / 2, 2 * l - 1, l);
        let dyy = ii.box_sum(r - b, c - l + 1, w, 2 * l - 1) - 3.0 * ii.box_sum(r - l / 2, c - l + 1, l, 2 * l - 1);
        let dxy = ii.box_sum(r - l, c + 1, l, l) + ii.box_sum(r + 1, c - l, l, l)
            - ii.box_sum(r - l, c - l, l, l)
            - ii.box_sum(r + 1, c + 1, l, l);
        let (dxx, dyy, dxy) = (dxx * inv_area, dyy * inv_area, dxy * inv_area);
        (dxx * dyy - 0.81 * dxy * dxy) as f32
    })
}

/// Detects blob keypoints on a gray image with 0..255 intensities.
///
/// Results are sorted by response (descending, ties by position), one per
/// pixel location, at most `max_keypoints`, and all at least `border`
/// pixels from every edge.
pub fn detect_keypoints(image: &Raster<f32>, config: &KeypointConfig) -> Vec<Keypoint> {
    let scaled = image.map(|v| v / 255.0);
    let ii = IntegralImage::new(&scaled);
    let layers: Vec<Raster<f32>> = config.filter_sizes.iter().map(|&s| hessian_response(&ii, s)).collect();
    let (w, h) = (image.width(), image.height());
    let border = config.border;
    if w < 2 * border + 1 || h < 2 * border + 1 {
        return Vec::new();
    }
    let mut found: Vec<Keypoint> = Vec::new();
    for (s, layer) in layers.iter().enumerate() {
        for y in border..h - border {
            for x in border..w - border {
                let v = layer.get(x, y);
                if !(v > config.threshold) {
                    continue;
                }
                let mut is_max = true;
                'nbhd: for ls in s.saturating_sub(1)..(s + 2).min(layers.len()) {
                    for yy in y - 1..=y + 1 {
                        for xx in x - 1..=x + 1 {
                            if (ls, yy, xx) == (s, y, x) {
                                continue;
                            }
                            if layers[ls].get(xx, yy) >= v {
                                is_max = false;
                                break 'nbhd;
                            }
                        }
                    }
                }
                if is_max {
                    found.push(Keypoint {
                        x: x as f32,
                        y: y as f32,
                        scale: 1.2 * config.filter_sizes[s] as f32 / 9.0,
                        response: v,
                    });
                }
            }
        }
    }
    found.sort_by(|a, b| {
        b.response
            .total_cmp(&a.response)
            .then(a.y.total_cmp(&b.y))
            .then(a.x.total_cmp(&b.x))
    });
    let mut seen = std::collections::HashSet::new();
    found.retain(|k| seen.insert((k.x as usize, k.y as usize)));
    found.truncate(config.max_keypoints);
    found
}

/// Valid keypoint coordinate range on a 96x96 face for a border margin.
pub fn keypoint_range(border: usize) -> std::ops::RangeInclusive<f32> {
    border as f32..=(FACE_SIZE - 1 - border) as f32
}
