//! Vocabulary fitting plus raw-count and TF-IDF document-term matrices.
//!
//! idf is the smoothed variant `ln((1 + N) / (1 + df)) + 1`; TF-IDF rows are
//! optionally L2-normalized so Euclidean distance orders pairs the same way
//! cosine distance does.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::preprocess::TokenizedDoc;

#[derive(Debug, Error)]
pub enum VectorizeError {
    #[error("no documents")]
    NoDocuments,
    #[error("empty vocabulary")]
    EmptyVocabulary,
    #[error("invalid tfidf config: {0}")]
    InvalidConfig(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("triplet line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TfidfConfig {
    pub min_df: usize,
    pub max_df_ratio: f64,
    pub l2_normalize: bool,
}

impl Default for TfidfConfig {
    fn default() -> Self {
        TfidfConfig { min_df: 2, max_df_ratio: 0.95, l2_normalize: true }
    }
}

impl TfidfConfig {
    pub fn validate(&self) -> Result<(), VectorizeError> {
        if self.min_df < 1 {
            return Err(VectorizeError::InvalidConfig("min_df must be at least 1".into()));
        }
        if !(self.max_df_ratio > 0.0 && self.max_df_ratio <= 1.0) {
            return Err(VectorizeError::InvalidConfig(format!("max_df_ratio {} is outside (0, 1]", self.max_df_ratio)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    term_to_index: HashMap<String, usize>,
    index_to_term: Vec<String>,
    doc_frequency: Vec<usize>,
    n_docs: usize,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.index_to_term.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index_to_term.is_empty()
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.term_to_index.get(term).copied()
    }

    pub fn term(&self, index: usize) -> &str {
        &self.index_to_term[index]
    }

    pub fn terms(&self) -> &[String] {
        &self.index_to_term
    }

    pub fn doc_frequency(&self, index: usize) -> usize {
        self.doc_frequency[index]
    }

    /// Number of documents the vocabulary was fitted on.
    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn idf(&self, index: usize) -> f64 {
        smoothed_idf(self.n_docs, self.doc_frequency[index])
    }
}

pub fn smoothed_idf(n_docs: usize, df: usize) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
}

pub fn fit_vocabulary(docs: &[TokenizedDoc], cfg: &TfidfConfig) -> Result<Vocabulary, VectorizeError> {
    cfg.validate()?;
    if docs.is_empty() {
        return Err(VectorizeError::NoDocuments);
    }
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in docs {
        let mut seen: Vec<&str> = doc.tokens.iter().map(String::as_str).collect();
        seen.sort_unstable();
        seen.dedup();
        for t in seen {
            *df.entry(t).or_default() += 1;
        }
    }
    let max_df = cfg.max_df_ratio * docs.len() as f64;
    let (index_to_term, doc_frequency): (Vec<String>, Vec<usize>) =
        df.into_iter().filter(|&(_, n)| n >= cfg.min_df && n as f64 <= max_df).map(|(t, n)| (t.to_string(), n)).unzip();
    if index_to_term.is_empty() {
        return Err(VectorizeError::EmptyVocabulary);
    }
    let term_to_index = index_to_term.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    Ok(Vocabulary { term_to_index, index_to_term, doc_frequency, n_docs: docs.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Weighting {
    RawCount,
    TfIdf,
}

impl fmt::Display for Weighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Weighting::RawCount => "RawCount",
            Weighting::TfIdf => "TfIdf",
        })
    }
}

impl FromStr for Weighting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "RawCount" => Ok(Weighting::RawCount),
            "TfIdf" => Ok(Weighting::TfIdf),
            other => Err(format!("unknown weighting `{other}`")),
        }
    }
}

/// Sparse row-major matrix; each row holds `(term index, weight)` pairs
/// sorted by term index with strictly positive weights.
#[derive(Debug, Clone, PartialEq)]
pub struct DocTermMatrix {
    pub n_docs: usize,
    pub n_terms: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
    pub weighting: Weighting,
    /// Dialogue id of each row.
    pub doc_ids: Vec<String>,
    /// Term of each column.
    pub terms: Vec<String>,
}

impl DocTermMatrix {
    /// Rows expanded to dense vectors of length `n_terms`.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|row| {
                let mut v = vec![0.0; self.n_terms];
                for &(t, w) in row {
                    v[t] = w;
                }
                v
            })
            .collect()
    }

    /// Writes `n_docs n_terms weighting` then one `doc term weight` line per
    /// non-zero entry.
    pub fn write_triplets(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "{} {} {}", self.n_docs, self.n_terms, self.weighting)?;
        for (d, row) in self.rows.iter().enumerate() {
            for &(t, x) in row {
                writeln!(w, "{d} {t} {x}")?;
            }
        }
        Ok(())
    }

    /// Inverse of [`write_triplets`](Self::write_triplets). Row ids and
    /// terms are not part of the format and come back as indices.
    pub fn read_triplets(r: impl BufRead) -> Result<Self, VectorizeError> {
        let parse_err = |line: usize, message: String| VectorizeError::Parse { line, message };
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| parse_err(1, "missing header".into()))??;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(parse_err(1, "header must be `n_docs n_terms weighting`".into()));
        }
        let n_docs: usize = fields[0].parse().map_err(|e| parse_err(1, format!("{e}")))?;
        let n_terms: usize = fields[1].parse().map_err(|e| parse_err(1, format!("{e}")))?;
        let weighting: Weighting = fields[2].parse().map_err(|e| parse_err(1, e))?;
        let mut rows = vec![Vec::new(); n_docs];
        for (i, line) in lines.enumerate() {
            let line = line?;
            let no = i + 2;
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(parse_err(no, "expected `doc term weight`".into()));
            }
            let d: usize = parts[0].parse().map_err(|e| parse_err(no, format!("{e}")))?;
            let t: usize = parts[1].parse().map_err(|e| parse_err(no, format!("{e}")))?;
            let x: f64 = parts[2].parse().map_err(|e| parse_err(no, format!("{e}")))?;
            if d >= n_docs || t >= n_terms {
                return Err(parse_err(no, "index out of range".into()));
            }
            rows[d].push((t, x));
        }
        for row in &mut rows {
            row.sort_by_key(|&(t, _)| t);
        }
        let doc_ids = (0..n_docs).map(|d| d.to_string()).collect();
        let terms = (0..n_terms).map(|t| t.to_string()).collect();
        Ok(DocTermMatrix { n_docs, n_terms, rows, weighting, doc_ids, terms })
    }
}

fn count_row(doc: &TokenizedDoc, vocab: &Vocabulary) -> Vec<(usize, f64)> {
    let mut counts: BTreeMap<usize, u32> = BTreeMap::new();
    for t in &doc.tokens {
        if let Some(i) = vocab.index_of(t) {
            *counts.entry(i).or_default() += 1;
        }
    }
    counts.into_iter().map(|(i, c)| (i, f64::from(c))).collect()
}

pub fn count_matrix(docs: &[TokenizedDoc], vocab: &Vocabulary) -> DocTermMatrix {
    DocTermMatrix {
        n_docs: docs.len(),
        n_terms: vocab.len(),
        rows: docs.par_iter().map(|d| count_row(d, vocab)).collect(),
        weighting: Weighting::RawCount,
        doc_ids: docs.iter().map(|d| d.dialogue_id.clone()).collect(),
        terms: vocab.terms().to_vec(),
    }
}

pub fn tfidf_matrix(docs: &[TokenizedDoc], vocab: &Vocabulary, cfg: &TfidfConfig) -> DocTermMatrix {
    let rows = docs
        .par_iter()
        .map(|d| {
            let mut row: Vec<(usize, f64)> =
                count_row(d, vocab).into_iter().map(|(i, tf)| (i, tf * vocab.idf(i))).collect();
            if cfg.l2_normalize {
                let norm = row.iter().map(|&(_, w)| w * w).sum::<f64>().sqrt();
                if norm > 0.0 {
                    row.iter_mut().for_each(|(_, w)| *w /= norm);
                }
            }
            row
        })
        .collect();
    DocTermMatrix {
        n_docs: docs.len(),
        n_terms: vocab.len(),
        rows,
        weighting: Weighting::TfIdf,
        doc_ids: docs.iter().map(|d| d.dialogue_id.clone()).collect(),
        terms: vocab.terms().to_vec(),
    }
}
