use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::image::{NormalizedImage, IMAGE_SIDE};

const SMALL: usize = 32;
const BLOCK: usize = 8;
/// Extra coefficient `(row, col)` that fills the 64th bit once DC is excluded.
const EXTRA_COEFF: (usize, usize) = (0, BLOCK);
/// Coefficients this small relative to the DC term are rounding noise.
const SNAP: f64 = 1e-9;

/// 64-bit DCT perceptual hash.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PerceptualHash(pub u64);

impl std::fmt::Display for PerceptualHash {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl std::str::FromStr for PerceptualHash {
    type Err = std::num::ParseIntError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        u64::from_str_radix(s, 16).map(PerceptualHash)
    }
}

pub fn hamming(a: PerceptualHash, b: PerceptualHash) -> u32 {
    (a.0 ^ b.0).count_ones()
}

/// Orthonormal DCT-II basis, `basis[u][x]`.
fn basis() -> &'static [[f64; SMALL]; SMALL] {
    static BASIS: OnceLock<[[f64; SMALL]; SMALL]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut b = [[0.0; SMALL]; SMALL];
        for (u, row) in b.iter_mut().enumerate() {
            let scale = if u == 0 { (1.0 / SMALL as f64).sqrt() } else { (2.0 / SMALL as f64).sqrt() };
            for (x, cell) in row.iter_mut().enumerate() {
                *cell = scale * (PI * (2 * x + 1) as f64 * u as f64 / (2 * SMALL) as f64).cos();
            }
        }
        b
    })
}

/// Box-downsamples the luma plane to 32x32 (each cell averages an 8x8 block).
fn downscale(img: &NormalizedImage) -> [[f64; SMALL]; SMALL] {
    let gray = img.grayscale();
    let f = IMAGE_SIDE / SMALL;
    let mut out = [[0.0; SMALL]; SMALL];
    for (cy, row) in out.iter_mut().enumerate() {
        for (cx, cell) in row.iter_mut().enumerate() {
            let mut sum = 0.0;
            for y in cy * f..(cy + 1) * f {
                sum += gray[y * IMAGE_SIDE + cx * f..y * IMAGE_SIDE + (cx + 1) * f].iter().sum::<f64>();
            }
            *cell = sum / (f * f) as f64;
        }
    }
    out
}

/// Separable 2-D DCT; only rows `0..=BLOCK` / cols `0..=BLOCK` are needed.
fn low_frequency_dct(px: &[[f64; SMALL]; SMALL]) -> [[f64; BLOCK + 1]; BLOCK + 1] {
    let b = basis();
    // rows transformed along x
    let mut tmp = [[0.0; BLOCK + 1]; SMALL];
    for y in 0..SMALL {
        for v in 0..=BLOCK {
            tmp[y][v] = (0..SMALL).map(|x| b[v][x] * px[y][x]).sum();
        }
    }
    let mut out = [[0.0; BLOCK + 1]; BLOCK + 1];
    for u in 0..=BLOCK {
        for v in 0..=BLOCK {
            out[u][v] = (0..SMALL).map(|y| b[u][y] * tmp[y][v]).sum();
        }
    }
    out
}

/// DCT perceptual hash.
///
/// Luma is averaged down to 32x32 and transformed; the 8x8 low-frequency block
/// minus the DC term (63 coefficients) plus coefficient (0, 8) gives 64
/// values. Bit `i` is set when value `i` exceeds the median of the 64.
pub fn phash64(img: &NormalizedImage) -> PerceptualHash {
    let dct = low_frequency_dct(&downscale(img));
    let snap = SNAP * (1.0 + dct[0][0].abs());
    let mut kept = Vec::with_capacity(64);
    for (u, row) in dct.iter().enumerate().take(BLOCK) {
        for (v, &c) in row.iter().enumerate().take(BLOCK) {
            if (u, v) != (0, 0) {
                kept.push(c);
            }
        }
    }
    kept.push(dct[EXTRA_COEFF.0][EXTRA_COEFF.1]);
    for c in kept.iter_mut() {
        if c.abs() <= snap {
            *c = 0.0;
        }
    }
    let mut sorted = kept.clone();
    sorted.sort_by(f64::total_cmp);
    let median = (sorted[31] + sorted[32]) / 2.0;
    let bits = kept
        .iter()
        .enumerate()
        .fold(0u64, |acc, (i, &c)| if c > median { acc | (1 << i) } else { acc });
    PerceptualHash(bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Random scene: a background, soft blobs of mixed sizes and a few
    /// hard-edged rectangles, kept below 229 so a 5% brightening does not clip.
    fn synthetic(seed: u64) -> NormalizedImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut color = |lo: f64, hi: f64| [rng.random_range(lo..hi), rng.random_range(lo..hi), rng.random_range(lo..hi)];
        let bg = color(20.0, 200.0);
        let tints: Vec<[f64; 3]> = (0..14).map(|_| color(-80.0, 80.0)).collect();
        let blobs: Vec<(f64, f64, f64, [f64; 3])> = tints[..10]
            .iter()
            .map(|&d| (rng.random_range(0.0..256.0), rng.random_range(0.0..256.0), rng.random_range(6.0..60.0), d))
            .collect();
        let rects: Vec<(f64, f64, f64, f64, [f64; 3])> = tints[10..]
            .iter()
            .map(|&d| {
                let (x0, y0) = (rng.random_range(0.0..200.0), rng.random_range(0.0..200.0));
                (x0, y0, x0 + rng.random_range(20.0..120.0), y0 + rng.random_range(20.0..120.0), d)
            })
            .collect();
        NormalizedImage::from_fn(|x, y| {
            let (xf, yf) = (x as f64, y as f64);
            let mut c = bg;
            for (bx, by, r, d) in &blobs {
                let w = (-((xf - bx).powi(2) + (yf - by).powi(2)) / (2.0 * r * r)).exp();
                for k in 0..3 {
                    c[k] += w * d[k];
                }
            }
            for (x0, y0, x1, y1, d) in &rects {
                if (*x0..*x1).contains(&xf) && (*y0..*y1).contains(&yf) {
                    for k in 0..3 {
                        c[k] += d[k];
                    }
                }
            }
            c.map(|v| v.clamp(0.0, 228.0).round() as u8)
        })
    }

    fn brighten(img: &NormalizedImage, factor: f64) -> NormalizedImage {
        let px = img.pixels().iter().map(|&p| (p as f64 * factor).round().min(255.0) as u8).collect();
        NormalizedImage::from_raw(px).unwrap()
    }

    #[test]
    fn identical_images_collide() {
        let a = synthetic(3);
        assert_eq!(hamming(phash64(&a), phash64(&a.clone())), 0);
    }

    #[test]
    fn constant_images_all_collide() {
        let h1 = phash64(&NormalizedImage::filled([0, 0, 0]));
        let h2 = phash64(&NormalizedImage::filled([200, 17, 90]));
        let h3 = phash64(&NormalizedImage::filled([255, 255, 255]));
        assert_eq!(h1, PerceptualHash(0));
        assert_eq!(h1, h2);
        assert_eq!(h2, h3);
    }

    #[test]
    fn brightness_robust_on_corpus() {
        for seed in 0..20 {
            let img = synthetic(seed);
            let d = hamming(phash64(&img), phash64(&brighten(&img, 1.05)));
            assert!(d <= 5, "seed {seed}: distance {d}");
        }
    }

    #[test]
    fn distinct_images_are_far_apart() {
        let hashes: Vec<_> = (0..20).map(|s| phash64(&synthetic(100 + s))).collect();
        let mut close = 0;
        for i in 0..hashes.len() {
            for j in i + 1..hashes.len() {
                if hamming(hashes[i], hashes[j]) <= 5 {
                    close += 1;
                }
            }
        }
        assert_eq!(close, 0);
    }

    #[test]
    fn dct_of_constant_is_dc_only() {
        let px = [[7.0; SMALL]; SMALL];
        let d = low_frequency_dct(&px);
        assert!((d[0][0] - 7.0 * SMALL as f64).abs() < 1e-9);
        for u in 0..=BLOCK {
            for v in 0..=BLOCK {
                if (u, v) != (0, 0) {
                    assert!(d[u][v].abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn hex_round_trip() {
        let h = PerceptualHash(0xdead_beef_0123_4567);
        assert_eq!(h.to_string().parse::<PerceptualHash>().unwrap(), h);
    }
}
