use serde::{Deserialize, Serialize};

/// Sparse feature vector over a declared dimension.
///
/// Entries are kept sorted by index with no duplicates; zero values are not
/// stored.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureVector {
    dim: usize,
    entries: Vec<(u32, f64)>,
}

impl FeatureVector {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, entries: Vec::new() }
    }

    pub fn from_dense(values: &[f64]) -> Self {
        let entries = values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i as u32, *v))
            .collect();
        Self { dim: values.len(), entries }
    }

    /// Builds from unsorted `(index, value)` pairs. Later duplicates win.
    ///
    /// Panics if an index is out of range.
    pub fn from_entries(dim: usize, mut entries: Vec<(u32, f64)>) -> Self {
        entries.sort_by_key(|e| e.0);
        let mut out: Vec<(u32, f64)> = Vec::with_capacity(entries.len());
        for (i, v) in entries {
            assert!((i as usize) < dim, "index {i} out of range for dim {dim}");
            match out.last_mut() {
                Some(last) if last.0 == i => last.1 = v,
                _ => out.push((i, v)),
            }
        }
        out.retain(|e| e.1 != 0.0);
        Self { dim, entries: out }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.entries
            .binary_search_by_key(&(index as u32), |e| e.0)
            .map(|p| self.entries[p].1)
            .unwrap_or(0.0)
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(i, v) in &self.entries {
            out[i as usize] = v;
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|e| e.1.is_finite())
    }

    /// Dot product with a dense vector of the same dimension.
    pub fn dot(&self, dense: &[f64]) -> f64 {
        debug_assert_eq!(dense.len(), self.dim);
        self.entries.iter().map(|&(i, v)| v * dense[i as usize]).sum()
    }

    /// Concatenates blocks, shifting each block's indices by the running offset.
    pub fn concat<'a>(blocks: impl IntoIterator<Item = &'a FeatureVector>) -> Self {
        let mut dim = 0usize;
        let mut entries = Vec::new();
        for b in blocks {
            entries.extend(b.entries.iter().map(|&(i, v)| (i + dim as u32, v)));
            dim += b.dim;
        }
        Self { dim, entries }
    }

    /// `self - other`, both in the same space.
    pub fn sub(&self, other: &FeatureVector) -> FeatureVector {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        let (a, b) = (&self.entries, &other.entries);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            let next = match (a.get(i), b.get(j)) {
                (Some(x), Some(y)) if x.0 == y.0 => {
                    i += 1;
                    j += 1;
                    (x.0, x.1 - y.1)
                }
                (Some(x), Some(y)) if x.0 < y.0 => {
                    i += 1;
                    *x
                }
                (Some(x), None) => {
                    i += 1;
                    *x
                }
                (_, Some(y)) => {
                    j += 1;
                    (y.0, -y.1)
                }
                (None, None) => unreachable!(),
            };
            if next.1 != 0.0 {
                out.push(next);
            }
        }
        FeatureVector { dim: self.dim, entries: out }
    }

    pub fn l1_norm(&self) -> f64 {
        self.entries.iter().map(|e| e.1.abs()).sum()
    }
}
