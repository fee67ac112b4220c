//! Uniform local binary pattern histogram of a 20x20 patch.

use super::extract::{Patch, PATCH_SIDE};

pub const LBP_DIM: usize = 59;

/// Neighbor offsets (dx, dy) in bit order, clockwise from the top-left.
const NEIGHBORS: [(i32, i32); 8] = [(-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0)];

/// 8-neighbor radius-1 code; a neighbor >= center sets its bit.
pub fn lbp_code(p: &Patch, x: usize, y: usize) -> u8 {
    let c = p.get(x, y);
    NEIGHBORS.iter().enumerate().fold(0u8, |code, (bit, &(dx, dy))| {
        let v = p.get((x as i32 + dx) as usize, (y as i32 + dy) as usize);
        if v >= c {
            code | (1 << bit)
        } else {
            code
        }
    })
}

pub fn is_uniform(code: u8) -> bool {
    (code ^ code.rotate_left(1)).count_ones() <= 2
}

/// Maps each of the 256 codes to a histogram bin: the 58 uniform codes get
/// bins 0..58 in increasing code order, all others share bin 58.
pub fn uniform_bins() -> [u8; 256] {
    let mut table = [58u8; 256];
    let mut next = 0u8;
    for code in 0..=255u8 {
        if is_uniform(code) {
            table[code as usize] = next;
            next += 1;
        }
    }
    table
}

/// L1-normalized 59-bin histogram over the 18x18 interior.
pub fn lbp_descriptor(p: &Patch) -> Vec<f32> {
    let bins = uniform_bins();
    let mut hist = vec![0u32; LBP_DIM];
    for y in 1..PATCH_SIDE - 1 {
        for x in 1..PATCH_SIDE - 1 {
            hist[bins[lbp_code(p, x, y) as usize] as usize] += 1;
        }
    }
    let total = ((PATCH_SIDE - 2) * (PATCH_SIDE - 2)) as f32;
    hist.into_iter().map(|c| c as f32 / total).collect()
}
