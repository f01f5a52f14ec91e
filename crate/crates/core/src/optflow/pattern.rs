use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::PatternImage;
use crate::{Error, Result};

/// Squared Euclidean distance in RGB space.
#[inline]
pub fn rgb_dist2(a: [u8; 3], b: [u8; 3]) -> u32 {
    a.iter()
        .zip(b.iter())
        .map(|(&x, &y)| {
            let d = x as i32 - y as i32;
            (d * d) as u32
        })
        .sum()
}

/// Offsets of the 8-neighbourhood that are already assigned when patches are
/// filled in raster order (up-left, up, up-right, left).
pub const ASSIGNED_NEIGHBOURS: [(isize, isize); 4] = [(-1, -1), (0, -1), (1, -1), (-1, 0)];

/// Random colour pattern of `patches_x × patches_y` square patches of
/// `patch_px` pixels.
///
/// Patches are filled in raster order. For each patch `candidates_k` RGB
/// colours are drawn (three `u8` draws per candidate, R then G then B, from a
/// ChaCha8 stream seeded with `seed`); the candidate whose minimum distance to
/// the already-coloured neighbours is largest wins, first candidate on ties.
pub fn generate_pattern(
    patches_x: usize,
    patches_y: usize,
    patch_px: usize,
    candidates_k: usize,
    seed: u64,
) -> Result<PatternImage> {
    if patches_x == 0 || patches_y == 0 || patch_px == 0 || candidates_k == 0 {
        return Err(Error::InvalidArgument(format!(
            "pattern counts must be positive (patches {patches_x}x{patches_y}, \
             patch_px {patch_px}, candidates {candidates_k})"
        )));
    }
    let colours = patch_colours(patches_x, patches_y, candidates_k, seed);
    let (w, h) = (patches_x * patch_px, patches_y * patch_px);
    let mut pixels = Vec::with_capacity(w * h);
    for y in 0..h {
        let row = (y / patch_px) * patches_x;
        for x in 0..w {
            pixels.push(colours[row + x / patch_px]);
        }
    }
    PatternImage::from_pixels(w, h, pixels)
}

/// The per-patch colour grid behind [`generate_pattern`], row-major.
pub fn patch_colours(patches_x: usize, patches_y: usize, candidates_k: usize, seed: u64) -> Vec<[u8; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut grid: Vec<[u8; 3]> = Vec::with_capacity(patches_x * patches_y);
    let mut candidates = Vec::with_capacity(candidates_k);
    for py in 0..patches_y {
        for px in 0..patches_x {
            candidates.clear();
            for _ in 0..candidates_k {
                let r: u8 = rng.random();
                let g: u8 = rng.random();
                let b: u8 = rng.random();
                candidates.push([r, g, b]);
            }
            let neighbours: Vec<[u8; 3]> = ASSIGNED_NEIGHBOURS
                .iter()
                .filter_map(|&(dx, dy)| {
                    let nx = px as isize + dx;
                    let ny = py as isize + dy;
                    (nx >= 0 && ny >= 0 && (nx as usize) < patches_x)
                        .then(|| grid[ny as usize * patches_x + nx as usize])
                })
                .collect();
            let mut best = candidates[0];
            let mut best_score = min_dist2(best, &neighbours);
            for &c in &candidates[1..] {
                let s = min_dist2(c, &neighbours);
                if s > best_score {
                    best = c;
                    best_score = s;
                }
            }
            grid.push(best);
        }
    }
    grid
}

fn min_dist2(c: [u8; 3], neighbours: &[[u8; 3]]) -> u32 {
    neighbours.iter().map(|&n| rgb_dist2(c, n)).min().unwrap_or(u32::MAX)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_patch_is_uniform() {
        let img = generate_pattern(1, 1, 4, 8, 3).unwrap();
        assert_eq!(img.dims(), (4, 4));
        let c = img.get(0, 0);
        assert!(img.pixels().iter().all(|&p| p == c));
    }

    #[test]
    fn camera_raster() {
        let img = generate_pattern(160, 120, 4, 8, 1).unwrap();
        assert_eq!(img.dims(), (640, 480));
    }

    #[test]
    fn zero_counts_rejected() {
        assert!(generate_pattern(0, 1, 4, 8, 0).is_err());
        assert!(generate_pattern(1, 1, 4, 0, 0).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_pattern(10, 8, 2, 8, 9).unwrap();
        let b = generate_pattern(10, 8, 2, 8, 9).unwrap();
        let c = generate_pattern(10, 8, 2, 8, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn more_candidates_spread_neighbours_apart() {
        let mean_nn = |k| {
            let g = patch_colours(40, 40, k, 5);
            let mut s = 0.0;
            for y in 0..40 {
                for x in 1..40 {
                    s += (rgb_dist2(g[y * 40 + x], g[y * 40 + x - 1]) as f64).sqrt();
                }
            }
            s
        };
        assert!(mean_nn(16) > mean_nn(1));
    }
}
