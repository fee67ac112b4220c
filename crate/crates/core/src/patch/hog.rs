//! Histogram of oriented gradients for a 20x20 patch: 9 unsigned bins,
//! 5x5-pixel cells, 2x2-cell blocks at one-cell stride, L2 block
//! normalization. 3 x 3 blocks x 4 cells x 9 bins = 324 values.

use super::extract::{Patch, PATCH_SIDE};

pub const HOG_BINS: usize = 9;
pub const HOG_CELL: usize = 5;
pub const HOG_DIM: usize = 324;

/// Central-difference gradients with replicated borders.
fn gradient(p: &Patch, x: usize, y: usize) -> (f32, f32) {
    let last = PATCH_SIDE - 1;
    let gx = p.get((x + 1).min(last), y) - p.get(x.saturating_sub(1), y);
    let gy = p.get(x, (y + 1).min(last)) - p.get(x, y.saturating_sub(1));
    (gx, gy)
}

/// Unsigned orientation bin in [0, 9): 20 degrees each, starting at 0.
pub fn orientation_bin(gx: f32, gy: f32) -> usize {
    let mut angle = gy.atan2(gx).to_degrees();
    if angle < 0.0 {
        angle += 180.0;
    }
    if angle >= 180.0 {
        angle -= 180.0;
    }
    ((angle / 20.0) as usize).min(HOG_BINS - 1)
}

/// Per-cell magnitude-weighted orientation histograms, 4 x 4 x 9.
pub fn cell_histograms(p: &Patch) -> Vec<f32> {
    let cells = PATCH_SIDE / HOG_CELL;
    let mut hist = vec![0.0f32; cells * cells * HOG_BINS];
    for y in 0..PATCH_SIDE {
        for x in 0..PATCH_SIDE {
            let (gx, gy) = gradient(p, x, y);
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let cell = (y / HOG_CELL) * cells + x / HOG_CELL;
            hist[cell * HOG_BINS + orientation_bin(gx, gy)] += mag;
        }
    }
    hist
}

pub fn hog_descriptor(p: &Patch) -> Vec<f32> {
    let cells = PATCH_SIDE / HOG_CELL;
    let hist = cell_histograms(p);
    let mut out = Vec::with_capacity(HOG_DIM);
    for by in 0..cells - 1 {
        for bx in 0..cells - 1 {
            let start = out.len();
            for (cy, cx) in [(by, bx), (by, bx + 1), (by + 1, bx), (by + 1, bx + 1)] {
                let c = cy * cells + cx;
                out.extend_from_slice(&hist[c * HOG_BINS..(c + 1) * HOG_BINS]);
            }
            let norm = out[start..].iter().map(|v| v * v).sum::<f32>().sqrt();
            if norm > 1e-12 {
                out[start..].iter_mut().for_each(|v| *v /= norm);
            }
        }
    }
    out
}
