use std::collections::HashMap;

use crate::ingest::NormalizedImage;
use crate::vector::FeatureVector;

pub const PALETTE_SIZE: usize = 50;

const HUES: usize = 8;
const SATURATIONS: [f64; 3] = [1.0, 0.6, 0.3];
const VALUES: [f64; 2] = [1.0, 0.55];

/// Fixed 50-color reference palette: an HSV grid of 8 hues x 3 saturations x
/// 2 values, then pure black and pure white.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColorPalette {
    colors: Vec<[u8; 3]>,
}

fn hsv_to_rgb(h_deg: f64, s: f64, v: f64) -> [u8; 3] {
    let c = v * s;
    let hp = h_deg / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r, g, b].map(|ch| ((ch + m) * 255.0).round() as u8)
}

impl Default for ColorPalette {
    fn default() -> Self {
        let mut colors = Vec::with_capacity(PALETTE_SIZE);
        for h in 0..HUES {
            for &s in &SATURATIONS {
                for &v in &VALUES {
                    colors.push(hsv_to_rgb(h as f64 * 360.0 / HUES as f64, s, v));
                }
            }
        }
        colors.push([0, 0, 0]);
        colors.push([255, 255, 255]);
        debug_assert_eq!(colors.len(), PALETTE_SIZE);
        Self { colors }
    }
}

impl ColorPalette {
    pub fn colors(&self) -> &[[u8; 3]] {
        &self.colors
    }

    pub fn black_index(&self) -> usize {
        PALETTE_SIZE - 2
    }

    pub fn white_index(&self) -> usize {
        PALETTE_SIZE - 1
    }

    /// Nearest palette entry by Euclidean RGB distance; ties go to the lowest index.
    pub fn nearest(&self, rgb: [u8; 3]) -> usize {
        let mut best = (u32::MAX, 0usize);
        for (i, c) in self.colors.iter().enumerate() {
            let d: u32 = (0..3).map(|k| (rgb[k] as i32 - c[k] as i32).pow(2) as u32).sum();
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }
}

/// L1-normalized histogram of nearest palette colors over all pixels.
pub fn color_histogram(img: &NormalizedImage, palette: &ColorPalette) -> FeatureVector {
    let mut counts = [0u64; PALETTE_SIZE];
    let mut memo: HashMap<[u8; 3], usize> = HashMap::new();
    let mut total = 0u64;
    for p in img.pixels().chunks_exact(3) {
        let rgb = [p[0], p[1], p[2]];
        let idx = *memo.entry(rgb).or_insert_with(|| palette.nearest(rgb));
        counts[idx] += 1;
        total += 1;
    }
    let dense: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
    FeatureVector::from_dense(&dense)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::IMAGE_SIDE;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    #[test]
    fn palette_has_fifty_distinct_colors() {
        let p = ColorPalette::default();
        assert_eq!(p.colors().len(), 50);
        assert_eq!(p.colors().iter().collect::<HashSet<_>>().len(), 50);
        assert_eq!(p.colors()[p.black_index()], [0, 0, 0]);
        assert_eq!(p.colors()[p.white_index()], [255, 255, 255]);
        assert_eq!(p, ColorPalette::default());
    }

    #[test]
    fn all_black() {
        let p = ColorPalette::default();
        let h = color_histogram(&NormalizedImage::filled([0, 0, 0]), &p);
        assert_eq!(h.entries(), &[(p.black_index() as u32, 1.0)]);
    }

    #[test]
    fn half_black_half_white() {
        let p = ColorPalette::default();
        let img = NormalizedImage::from_fn(|x, _| if x < IMAGE_SIDE / 2 { [0, 0, 0] } else { [255, 255, 255] });
        let h = color_histogram(&img, &p);
        assert_eq!(h.get(p.black_index()), 0.5);
        assert_eq!(h.get(p.white_index()), 0.5);
        assert_eq!(h.nnz(), 2);
    }

    #[test]
    fn noise_matches_pixel_loop() {
        let p = ColorPalette::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let img = NormalizedImage::from_fn(|_, _| [rng.random(), rng.random(), rng.random()]);
        let h = color_histogram(&img, &p);
        assert!((h.l1_norm() - 1.0).abs() <= 1e-9);
        // independent brute-force assignment with f64 distances
        let mut counts = vec![0usize; PALETTE_SIZE];
        for px in img.pixels().chunks_exact(3) {
            let mut best = (f64::INFINITY, 0);
            for (i, c) in p.colors().iter().enumerate() {
                let d = ((px[0] as f64 - c[0] as f64).powi(2)
                    + (px[1] as f64 - c[1] as f64).powi(2)
                    + (px[2] as f64 - c[2] as f64).powi(2))
                .sqrt();
                if d < best.0 {
                    best = (d, i);
                }
            }
            counts[best.1] += 1;
        }
        let n = (IMAGE_SIDE * IMAGE_SIDE) as f64;
        for (i, c) in counts.iter().enumerate() {
            assert_eq!(h.get(i), *c as f64 / n);
        }
    }
}
