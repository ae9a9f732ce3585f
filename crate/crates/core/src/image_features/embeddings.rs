use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::vector::FeatureVector;

#[derive(Debug, thiserror::Error)]
pub enum EmbeddingError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    Format { line: usize, reason: String },
}

/// Externally computed per-submission vectors (one extractor per table).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub name: String,
    pub dim: usize,
    rows: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(name: impl Into<String>, dim: usize) -> Self {
        Self { name: name.into(), dim, rows: BTreeMap::new() }
    }

    /// Inserts a row; returns false (and leaves the table unchanged) on a
    /// length mismatch, a non-finite value or a repeated id.
    pub fn insert(&mut self, id: impl Into<String>, v: Vec<f64>) -> bool {
        let id = id.into();
        if v.len() != self.dim || !v.iter().all(|x| x.is_finite()) || self.rows.contains_key(&id) {
            return false;
        }
        self.rows.insert(id, v);
        true
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.rows.get(id).map(Vec::as_slice)
    }

    pub fn vector(&self, id: &str) -> Option<FeatureVector> {
        self.get(id).map(FeatureVector::from_dense)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.rows.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }
}

fn bad(line: usize, reason: impl Into<String>) -> EmbeddingError {
    EmbeddingError::Format { line, reason: reason.into() }
}

/// Reads `#dim<TAB>D<TAB>n<TAB>N` then `N` lines of `id<TAB>v1,...,vD`.
pub fn parse_embeddings<R: BufRead>(name: &str, reader: R) -> Result<EmbeddingTable, EmbeddingError> {
    let mut lines = reader.lines();
    let header = lines.next().ok_or_else(|| bad(1, "missing header"))??;
    let fields: Vec<&str> = header.split('\t').collect();
    let (dim, n) = match fields.as_slice() {
        ["#dim", d, "n", n] => (
            d.parse::<usize>().map_err(|e| bad(1, format!("dim: {e}")))?,
            n.parse::<usize>().map_err(|e| bad(1, format!("n: {e}")))?,
        ),
        _ => return Err(bad(1, format!("expected '#dim<TAB>D<TAB>n<TAB>N', got {header:?}"))),
    };
    let mut table = EmbeddingTable::new(name, dim);
    let mut rows = 0usize;
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let (id, values) = line.split_once('\t').ok_or_else(|| bad(line_no, "missing tab separator"))?;
        if id.is_empty() {
            return Err(bad(line_no, "empty id"));
        }
        let v = values
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| bad(line_no, format!("value: {e}")))?;
        if v.len() != dim {
            return Err(bad(line_no, format!("expected {dim} values, got {}", v.len())));
        }
        if !v.iter().all(|x| x.is_finite()) {
            return Err(bad(line_no, "non-finite value"));
        }
        if !table.insert(id, v) {
            return Err(bad(line_no, format!("duplicate id {id}")));
        }
        rows += 1;
    }
    if rows != n {
        return Err(bad(1, format!("header declares {n} rows, file has {rows}")));
    }
    Ok(table)
}

pub fn load_embeddings(name: &str, path: &Path) -> Result<EmbeddingTable, EmbeddingError> {
    parse_embeddings(name, BufReader::new(File::open(path)?))
}

/// Writes a table; values use the shortest representation that parses back
/// to the identical `f64`.
pub fn write_embeddings<W: Write>(mut out: W, table: &EmbeddingTable) -> std::io::Result<()> {
    writeln!(out, "#dim\t{}\tn\t{}", table.dim, table.len())?;
    for (id, v) in table.iter() {
        let joined: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
        writeln!(out, "{id}\t{}", joined.join(","))?;
    }
    Ok(())
}
