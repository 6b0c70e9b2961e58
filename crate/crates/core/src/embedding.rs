//! Pretrained word vectors and mean-pooled suggestion embeddings.
//!
//! Vectors are read from the common textual format: a header line
//! `vocab_size dim`, then one token per line followed by `dim` numbers.
//! Files ending in `.gz` are decompressed transparently.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use log::{debug, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::preprocess::{AuditCorpus, Stage};

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("vector file I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("cannot embed an empty token list")]
    EmptyTokens,
    #[error("vector JSON at line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
}

/// Immutable token -> vector table, keyed by lower-cased token.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorStore {
    dim: usize,
    table: HashMap<String, Vec<f32>>,
    order: Vec<String>,
}

impl VectorStore {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            table: HashMap::new(),
            order: Vec::new(),
        }
    }

    /// Builds a store from in-memory entries with the same collision rules
    /// as the file loader.
    pub fn from_entries<I>(dim: usize, entries: I) -> Result<Self, EmbeddingError>
    where
        I: IntoIterator<Item = (String, Vec<f32>)>,
    {
        let mut store = Self::new(dim);
        let mut originals = HashMap::new();
        for (i, (token, v)) in entries.into_iter().enumerate() {
            if v.len() != dim {
                return Err(EmbeddingError::Parse {
                    line: i + 1,
                    message: format!("expected {dim} components, found {}", v.len()),
                });
            }
            store.insert(&mut originals, token, v);
        }
        Ok(store)
    }

    fn insert(&mut self, originals: &mut HashMap<String, String>, token: String, v: Vec<f32>) {
        let key = token.to_lowercase();
        match originals.get(&key) {
            Some(orig) if *orig == token => {
                warn!("duplicate token {token:?} in vector file; keeping the last entry");
                self.table.insert(key, v);
            }
            Some(orig) => {
                debug!("{token:?} folds onto earlier {orig:?}; keeping the first entry");
            }
            None => {
                originals.insert(key.clone(), token);
                self.order.push(key.clone());
                self.table.insert(key, v);
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab_size(&self) -> usize {
        self.table.len()
    }

    pub fn get(&self, token: &str) -> Option<&[f32]> {
        self.table.get(&token.to_lowercase()).map(Vec::as_slice)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.get(token).is_some()
    }

    /// Tokens in load order.
    pub fn tokens(&self) -> &[String] {
        &self.order
    }
}

pub fn parse_vectors<R: BufRead>(reader: R) -> Result<VectorStore, EmbeddingError> {
    let mut lines = reader.lines().enumerate();
    let (declared, dim) = loop {
        let Some((i, line)) = lines.next() else {
            return Err(EmbeddingError::Parse {
                line: 1,
                message: "missing header".into(),
            });
        };
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let parse = |s: &str| s.parse::<usize>().ok();
        match parts.as_slice() {
            [v, d] => match (parse(v), parse(d)) {
                (Some(v), Some(d)) if d > 0 => break (v, d),
                _ => {
                    return Err(EmbeddingError::Parse {
                        line: i + 1,
                        message: format!("bad header {line:?}"),
                    })
                }
            },
            _ => {
                return Err(EmbeddingError::Parse {
                    line: i + 1,
                    message: format!("header must be \"vocab_size dim\", got {line:?}"),
                })
            }
        }
    };
    let mut store = VectorStore::new(dim);
    let mut originals = HashMap::new();
    let mut rows = 0;
    for (i, line) in lines {
        let line = line?;
        let mut parts = line.split_whitespace();
        let Some(token) = parts.next() else { continue };
        let values = parts
            .map(|p| p.parse::<f32>())
            .collect::<Result<Vec<f32>, _>>()
            .map_err(|e| EmbeddingError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
        if values.len() != dim {
            return Err(EmbeddingError::Parse {
                line: i + 1,
                message: format!("expected {dim} components, found {}", values.len()),
            });
        }
        rows += 1;
        store.insert(&mut originals, token.to_string(), values);
    }
    if rows != declared {
        warn!("vector header declares {declared} tokens, file has {rows}");
    }
    Ok(store)
}

pub fn load_vectors(path: impl AsRef<Path>) -> Result<VectorStore, EmbeddingError> {
    let path = path.as_ref();
    let file = fs::File::open(path)?;
    let reader: Box<dyn Read> = if path.extension().is_some_and(|e| e == "gz") {
        Box::new(GzDecoder::new(file))
    } else {
        Box::new(file)
    };
    parse_vectors(BufReader::new(reader))
}

/// Writes the store in the textual format, tokens in load order. Values
/// use the shortest representation that parses back to the same `f32`.
pub fn dump_vectors<W: Write>(store: &VectorStore, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{} {}", store.vocab_size(), store.dim())?;
    for token in &store.order {
        write!(w, "{token}")?;
        for v in &store.table[token] {
            write!(w, " {v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Embedding {
    Vector(Vec<f64>),
    /// At least one token has no vector; the listed tokens are missing.
    OutOfVocabulary(Vec<String>),
}

/// Component-wise mean of the token vectors, or the OOV drop signal.
pub fn embed(tokens: &[String], store: &VectorStore) -> Result<Embedding, EmbeddingError> {
    if tokens.is_empty() {
        return Err(EmbeddingError::EmptyTokens);
    }
    let missing: Vec<String> = tokens
        .iter()
        .filter(|t| !store.contains(t))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Ok(Embedding::OutOfVocabulary(missing));
    }
    let mut sum = vec![0.0f64; store.dim()];
    for t in tokens {
        for (acc, v) in sum.iter_mut().zip(store.get(t).expect("checked above")) {
            *acc += f64::from(*v);
        }
    }
    let n = tokens.len() as f64;
    Ok(Embedding::Vector(sum.into_iter().map(|s| s / n).collect()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestionVector {
    pub suggestion_id: String,
    pub n_tokens: usize,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vectorized {
    /// Sorted by suggestion id.
    pub vectors: Vec<SuggestionVector>,
    pub dropped: Vec<String>,
}

/// Embeds the global union of suggestions, removes OOV suggestions from
/// every root and appends the no-vector stage to the ledger.
pub fn vectorize_corpus(
    corpus: &mut AuditCorpus,
    store: &VectorStore,
) -> Result<Vectorized, EmbeddingError> {
    let mut vectors = Vec::new();
    let mut dropped = BTreeSet::new();
    for (id, tokens) in corpus.global_suggestions() {
        match embed(tokens, store)? {
            Embedding::Vector(vector) => vectors.push(SuggestionVector {
                suggestion_id: id.to_string(),
                n_tokens: tokens.len(),
                vector,
            }),
            Embedding::OutOfVocabulary(_) => {
                dropped.insert(id.to_string());
            }
        }
    }
    for set in corpus.per_root.values_mut() {
        set.retain(|id, _| !dropped.contains(id));
    }
    corpus.push_stage(Stage::NoVectorRemoval);
    Ok(Vectorized {
        vectors,
        dropped: dropped.into_iter().collect(),
    })
}

pub fn write_vectors_jsonl(path: impl AsRef<Path>, vectors: &[SuggestionVector]) -> std::io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for v in vectors {
        serde_json::to_writer(&mut w, v).expect("vector serialises");
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn read_vectors_jsonl(path: impl AsRef<Path>) -> Result<Vec<SuggestionVector>, EmbeddingError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(fs::File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|source| EmbeddingError::Json { line: i + 1, source })?,
        );
    }
    Ok(out)
}
