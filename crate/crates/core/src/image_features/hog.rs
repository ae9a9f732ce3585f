use crate::ingest::{NormalizedImage, IMAGE_SIDE};
use crate::vector::FeatureVector;

const CELL: usize = 8;
const BINS: usize = 9;
const BLOCK_CELLS: usize = 2;
const CELLS: usize = IMAGE_SIDE / CELL;
const BLOCKS: usize = CELLS - BLOCK_CELLS + 1;
const BLOCK_LEN: usize = BLOCK_CELLS * BLOCK_CELLS * BINS;
const CLIP: f64 = 0.2;
const EPS: f64 = 1e-6;

/// 31 x 31 blocks x 36 values.
pub const HOG_DIM: usize = BLOCKS * BLOCKS * BLOCK_LEN;

/// Per-cell orientation histograms, `[cell_y][cell_x][bin]`.
///
/// Gradients are central differences with replicated borders. Orientation is
/// unsigned (0-180 degrees); bin `k` is centered at `20k` degrees and each
/// pixel splits its magnitude linearly between the two nearest centers.
pub(crate) fn cell_histograms(img: &NormalizedImage) -> Vec<[f64; BINS]> {
    let gray = img.grayscale();
    let at = |x: isize, y: isize| {
        let cx = x.clamp(0, IMAGE_SIDE as isize - 1) as usize;
        let cy = y.clamp(0, IMAGE_SIDE as isize - 1) as usize;
        gray[cy * IMAGE_SIDE + cx]
    };
    let bin_width = 180.0 / BINS as f64;
    let mut hist = vec![[0.0; BINS]; CELLS * CELLS];
    for y in 0..IMAGE_SIDE as isize {
        for x in 0..IMAGE_SIDE as isize {
            let gx = at(x + 1, y) - at(x - 1, y);
            let gy = at(x, y + 1) - at(x, y - 1);
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let angle = gy.atan2(gx).to_degrees().rem_euclid(180.0);
            let pos = angle / bin_width;
            let lo = pos.floor();
            let frac = pos - lo;
            let lo = lo as usize % BINS;
            let hi = (lo + 1) % BINS;
            let cell = &mut hist[(y as usize / CELL) * CELLS + x as usize / CELL];
            cell[lo] += mag * (1.0 - frac);
            cell[hi] += mag * frac;
        }
    }
    hist
}

fn l2_normalize(v: &mut [f64]) {
    let norm = (v.iter().map(|x| x * x).sum::<f64>() + EPS * EPS).sqrt();
    for x in v.iter_mut() {
        *x /= norm;
    }
}

/// HOG descriptor: 8x8 cells, 9 unsigned bins, 2x2-cell blocks at stride one,
/// L2-Hys block normalization (normalize, clip at 0.2, renormalize).
pub fn hog_features(img: &NormalizedImage) -> FeatureVector {
    let cells = cell_histograms(img);
    let mut out = Vec::with_capacity(HOG_DIM);
    let mut block = [0.0; BLOCK_LEN];
    for by in 0..BLOCKS {
        for bx in 0..BLOCKS {
            let mut k = 0;
            for cy in by..by + BLOCK_CELLS {
                for cx in bx..bx + BLOCK_CELLS {
                    block[k..k + BINS].copy_from_slice(&cells[cy * CELLS + cx]);
                    k += BINS;
                }
            }
            l2_normalize(&mut block);
            for x in block.iter_mut() {
                *x = x.min(CLIP);
            }
            l2_normalize(&mut block);
            out.extend_from_slice(&block);
        }
    }
    FeatureVector::from_dense(&out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dimension() {
        assert_eq!(HOG_DIM, 34_596);
        let img = NormalizedImage::from_fn(|x, y| [(x * 3 % 256) as u8, (y * 5 % 256) as u8, 9]);
        assert_eq!(hog_features(&img).dim(), HOG_DIM);
    }

    #[test]
    fn constant_image_is_zero() {
        let f = hog_features(&NormalizedImage::filled([120, 40, 200]));
        assert_eq!(f.nnz(), 0);
        assert_eq!(f.dim(), HOG_DIM);
    }

    #[test]
    fn vertical_step_votes_horizontal_gradient_bin() {
        let img = NormalizedImage::from_fn(|x, _| if x < 128 { [0, 0, 0] } else { [255, 255, 255] });
        let cells = cell_histograms(&img);
        for cy in 0..CELLS {
            for cx in 0..CELLS {
                let h = &cells[cy * CELLS + cx];
                if cx == 15 || cx == 16 {
                    // edge pixels x = 127 (cell 15) and x = 128 (cell 16), 8 rows each
                    assert!((h[0] - 8.0 * 255.0).abs() < 1e-9, "cell ({cy},{cx}) {:?}", h);
                    assert!(h[1..].iter().all(|&v| v == 0.0));
                } else {
                    assert!(h.iter().all(|&v| v == 0.0));
                }
            }
        }
        let f = hog_features(&img);
        // every nonzero entry is a bin-0 slot
        assert!(f.entries().iter().all(|&(i, _)| i as usize % BINS == 0));
        assert!(f.nnz() > 0);
    }

    #[test]
    fn entries_bounded_and_blocks_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let img = NormalizedImage::from_fn(|_, _| [rng.random(), rng.random(), rng.random()]);
        let dense = hog_features(&img).to_dense();
        assert!(dense.iter().all(|&v| (0.0..=1.0).contains(&v)));
        for block in dense.chunks(BLOCK_LEN) {
            let n = block.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(n <= (36.0f64).sqrt() * CLIP + 1e-12);
            assert!(n <= 1.0 + 1e-9);
        }
    }
}
