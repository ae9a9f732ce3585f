use crate::rng::{mix, streams};
use crate::vector::FeatureVector;

pub const DEFAULT_PROJECTED_DIM: usize = 2048;

#[derive(Debug, thiserror::Error)]
#[error("projection expects input dimension {expected}, got {actual}")]
pub struct ProjectionError {
    pub expected: usize,
    pub actual: usize,
}

/// Dense random sign projection `y = R v / sqrt(out_dim)`.
///
/// Entry `(row, col)` of `R` is +1 or -1 with equal probability. Signs come in
/// 64-bit words, word `w` of row `r` being `mix(seed, PROJECTION, r * words + w)`,
/// so any machine reproduces the same matrix from the seed alone. The matrix
/// is materialized as a bitset (a set bit means -1).
#[derive(Debug, Clone)]
pub struct SignProjection {
    in_dim: usize,
    out_dim: usize,
    seed: u64,
    words_per_row: usize,
    bits: Vec<u64>,
}

impl SignProjection {
    pub fn new(in_dim: usize, out_dim: usize, seed: u64) -> Self {
        let words_per_row = in_dim.div_ceil(64);
        let tail = in_dim % 64;
        let mut bits = Vec::with_capacity(words_per_row * out_dim);
        for r in 0..out_dim {
            for w in 0..words_per_row {
                let mut word = mix(seed, streams::PROJECTION, (r * words_per_row + w) as u64);
                if w + 1 == words_per_row && tail != 0 {
                    word &= (1u64 << tail) - 1;
                }
                bits.push(word);
            }
        }
        Self { in_dim, out_dim, seed, words_per_row, bits }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Sign of entry `(row, col)`.
    pub fn sign(&self, row: usize, col: usize) -> f64 {
        let word = self.bits[row * self.words_per_row + col / 64];
        if (word >> (col % 64)) & 1 == 1 {
            -1.0
        } else {
            1.0
        }
    }

    fn row_bits(&self, row: usize) -> &[u64] {
        &self.bits[row * self.words_per_row..(row + 1) * self.words_per_row]
    }

    pub fn project_dense(&self, v: &[f64]) -> Result<Vec<f64>, ProjectionError> {
        if v.len() != self.in_dim {
            return Err(ProjectionError { expected: self.in_dim, actual: v.len() });
        }
        let total: f64 = v.iter().sum();
        let scale = 1.0 / (self.out_dim as f64).sqrt();
        let out = (0..self.out_dim)
            .map(|r| {
                // sum over +1 entries minus sum over -1 entries = total - 2 * negatives
                let mut neg = 0.0;
                for (w, &word) in self.row_bits(r).iter().enumerate() {
                    let mut bitsleft = word;
                    let base = w * 64;
                    while bitsleft != 0 {
                        let b = bitsleft.trailing_zeros() as usize;
                        neg += v[base + b];
                        bitsleft &= bitsleft - 1;
                    }
                }
                (total - 2.0 * neg) * scale
            })
            .collect();
        Ok(out)
    }

    pub fn project(&self, v: &FeatureVector) -> Result<FeatureVector, ProjectionError> {
        if v.dim() != self.in_dim {
            return Err(ProjectionError { expected: self.in_dim, actual: v.dim() });
        }
        // dense path is cheaper once a tenth of the input is populated
        if v.nnz() * 10 >= self.in_dim {
            return Ok(FeatureVector::from_dense(&self.project_dense(&v.to_dense())?));
        }
        let scale = 1.0 / (self.out_dim as f64).sqrt();
        let out: Vec<f64> = (0..self.out_dim)
            .map(|r| v.entries().iter().map(|&(c, x)| self.sign(r, c as usize) * x).sum::<f64>() * scale)
            .collect();
        Ok(FeatureVector::from_dense(&out))
    }
}
