//! Word-vector tables and the two-slot modifier representation.
//!
//! Tables are read from the GloVe text format, one `token v1 v2 ... vD` line
//! per entry. Files ending in `.gz` are decompressed on the fly.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    entries: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::input("embedding dimension must be positive"));
        }
        Ok(EmbeddingTable {
            dim,
            entries: HashMap::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.entries.get(token).map(Vec::as_slice)
    }

    /// Inserts a vector unless the token is already present. Returns whether
    /// the vector was stored.
    pub fn insert(&mut self, token: impl Into<String>, vector: Vec<f64>) -> Result<bool> {
        if vector.len() != self.dim {
            return Err(Error::Shape {
                what: "embedding vector",
                expected: self.dim,
                found: vector.len(),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("embedding vector has non-finite components"));
        }
        let token = token.into();
        if self.entries.contains_key(&token) {
            return Ok(false);
        }
        self.entries.insert(token, vector);
        Ok(true)
    }

    /// Tokens in sorted order.
    pub fn tokens(&self) -> Vec<&str> {
        let mut tokens: Vec<&str> = self.entries.keys().map(String::as_str).collect();
        tokens.sort_unstable();
        tokens
    }

    /// Writes the table in text format with tokens sorted, so output bytes
    /// depend only on the table contents.
    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for token in self.tokens() {
            write!(out, "{token}")?;
            for v in &self.entries[token] {
                write!(out, " {v}")?;
            }
            writeln!(out)?;
        }
        out.flush()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_text(BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }
}

/// Parses embeddings from any reader. `origin` is only used in error messages.
pub fn read_embeddings<R: BufRead>(
    reader: R,
    expected_dim: usize,
    origin: &Path,
) -> Result<EmbeddingTable> {
    let mut table = EmbeddingTable::new(expected_dim)?;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else {
            continue;
        };
        let mut vector = Vec::with_capacity(expected_dim);
        for field in fields {
            let v: f64 = field.parse().map_err(|_| {
                Error::format(origin, line_no, format!("invalid number {field:?}"))
            })?;
            if !v.is_finite() {
                return Err(Error::format(origin, line_no, "non-finite component"));
            }
            vector.push(v);
        }
        if vector.len() != expected_dim {
            return Err(Error::format(
                origin,
                line_no,
                format!(
                    "expected {expected_dim} components for {token:?}, found {}",
                    vector.len()
                ),
            ));
        }
        table.insert(token, vector)?;
    }
    Ok(table)
}

fn open_text(path: &Path) -> Result<Box<dyn BufRead>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let gz = path
        .extension()
        .is_some_and(|ext| ext.eq_ignore_ascii_case("gz"));
    Ok(if gz {
        Box::new(BufReader::new(GzDecoder::new(file)))
    } else {
        Box::new(BufReader::new(file))
    })
}

/// Loads a GloVe-format text file, gzip-compressed when the name ends in `.gz`.
/// Duplicate tokens keep their first occurrence.
pub fn load_embeddings(path: &Path, expected_dim: usize) -> Result<EmbeddingTable> {
    read_embeddings(open_text(path)?, expected_dim, path)
}

/// Vector width of the first non-blank line.
pub fn detect_dim(path: &Path) -> Result<usize> {
    for (idx, line) in open_text(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let fields = line.split_whitespace().count();
        if fields == 1 {
            return Err(Error::format(path, idx + 1, "token without a vector"));
        }
        if fields > 1 {
            return Ok(fields - 1);
        }
    }
    Err(Error::input(format!("{} contains no embeddings", path.display())))
}

/// What to do when a modifier token is missing from the table.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OovPolicy {
    /// Use the zero vector for that slot and log a warning.
    #[default]
    Zero,
    /// Fail with an input error.
    Strict,
}

/// A modifier encoded as two concatenated word vectors. Single-token
/// modifiers leave the second slot zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedModifier {
    values: Vec<f64>,
    oov: Vec<String>,
}

impl EmbeddedModifier {
    pub fn from_values(values: Vec<f64>) -> Self {
        EmbeddedModifier {
            values,
            oov: Vec::new(),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        EmbeddedModifier::from_values(vec![0.0; 2 * dim])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Tokens that were not found and fell back to zero.
    pub fn oov_tokens(&self) -> &[String] {
        &self.oov
    }
}

/// Splits a modifier into normalized tokens (trimmed, lowercased).
pub fn modifier_tokens(modifier: &str) -> Vec<String> {
    modifier
        .split_whitespace()
        .map(str::to_lowercase)
        .collect()
}

pub fn embed_modifier(
    table: &EmbeddingTable,
    modifier: &str,
    policy: OovPolicy,
) -> Result<EmbeddedModifier> {
    let tokens = modifier_tokens(modifier);
    if tokens.is_empty() || tokens.len() > 2 {
        return Err(Error::input(format!(
            "modifier {modifier:?} must have one or two tokens, found {}",
            tokens.len()
        )));
    }
    let dim = table.dim();
    let mut values = vec![0.0; 2 * dim];
    let mut oov = Vec::new();
    for (slot, token) in tokens.iter().enumerate() {
        match table.get(token) {
            Some(v) => values[slot * dim..(slot + 1) * dim].copy_from_slice(v),
            None => match policy {
                OovPolicy::Strict => {
                    return Err(Error::input(format!(
                        "token {token:?} of modifier {modifier:?} is not in the embedding table"
                    )))
                }
                OovPolicy::Zero => {
                    log::warn!("token {token:?} not in embedding table, using zero vector");
                    oov.push(token.clone());
                }
            },
        }
    }
    Ok(EmbeddedModifier { values, oov })
}
