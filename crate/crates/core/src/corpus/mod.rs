//! Dialogue data model, ingestion, descriptive statistics and synthesis.

mod io;
mod synth;

pub use io::{
    load_corpus, load_csv, load_jsonl, read_csv, read_jsonl, to_csv_string, to_jsonl_string, write_corpus, write_csv,
    write_jsonl, CorpusFormat,
};
pub use synth::{bundled_plan, synthesize_corpus, CoOccurrencePair, SynthesisPlan};

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("empty corpus")]
    Empty,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("missing column `{0}`")]
    MissingColumn(&'static str),
    #[error("duplicate dialogue id `{0}`")]
    DuplicateId(String),
    #[error("dialogue `{0}` has no turns")]
    EmptyTurns(String),
    #[error("dialogue `{id}`: turn {index} has empty text")]
    EmptyTurnText { id: String, index: usize },
    #[error("dialogue `{0}` does not start with a user turn")]
    FirstTurnNotUser(String),
    #[error("dialogue `{id}` has label `{label}` outside the condition set")]
    UnknownCondition { id: String, label: String },
    #[error("invalid synthesis plan: {0}")]
    InvalidPlan(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    User,
    Bot,
}

impl Speaker {
    /// Token used as role marker and as flat-text prefix.
    pub fn marker(self) -> &'static str {
        match self {
            Speaker::User => "user",
            Speaker::Bot => "bot",
        }
    }
}

impl fmt::Display for Speaker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.marker())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: Speaker,
    pub text: String,
}

impl Turn {
    pub fn new(speaker: Speaker, text: impl Into<String>) -> Self {
        Turn { speaker, text: text.into() }
    }
}

/// A labeled multi-turn exchange. Construct through [`Dialogue::new`] to
/// have the invariants checked.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dialogue {
    pub id: String,
    pub disease_label: String,
    pub turns: Vec<Turn>,
}

impl Dialogue {
    pub fn new(id: impl Into<String>, disease_label: impl Into<String>, turns: Vec<Turn>) -> Result<Self, CorpusError> {
        let id = id.into();
        if turns.is_empty() {
            return Err(CorpusError::EmptyTurns(id));
        }
        if let Some(index) = turns.iter().position(|t| t.text.trim().is_empty()) {
            return Err(CorpusError::EmptyTurnText { id, index });
        }
        if turns[0].speaker != Speaker::User {
            return Err(CorpusError::FirstTurnNotUser(id));
        }
        Ok(Dialogue { id, disease_label: disease_label.into(), turns })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    dialogues: Vec<Dialogue>,
    condition_names: BTreeSet<String>,
}

impl Corpus {
    /// Builds a corpus whose condition set is exactly the labels in use.
    pub fn from_dialogues(dialogues: Vec<Dialogue>) -> Result<Self, CorpusError> {
        let names = dialogues.iter().map(|d| d.disease_label.clone()).collect();
        Self::new(dialogues, names)
    }

    pub fn new(dialogues: Vec<Dialogue>, condition_names: BTreeSet<String>) -> Result<Self, CorpusError> {
        if dialogues.is_empty() || condition_names.is_empty() {
            return Err(CorpusError::Empty);
        }
        let mut seen = HashSet::with_capacity(dialogues.len());
        for d in &dialogues {
            if !seen.insert(d.id.as_str()) {
                return Err(CorpusError::DuplicateId(d.id.clone()));
            }
            if !condition_names.contains(&d.disease_label) {
                return Err(CorpusError::UnknownCondition { id: d.id.clone(), label: d.disease_label.clone() });
            }
        }
        Ok(Corpus { dialogues, condition_names })
    }

    pub fn dialogues(&self) -> &[Dialogue] {
        &self.dialogues
    }

    pub fn condition_names(&self) -> &BTreeSet<String> {
        &self.condition_names
    }

    pub fn len(&self) -> usize {
        self.dialogues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dialogues.is_empty()
    }

    /// SHA-256 of the canonical JSONL serialization, hex encoded. Used to
    /// check that stage outputs were computed from the same corpus.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(to_jsonl_string(self).as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_dialogues: usize,
    pub n_conditions: usize,
    pub mean_turns: f64,
    pub per_condition_counts: BTreeMap<String, usize>,
}

pub fn compute_stats(corpus: &Corpus) -> Result<CorpusStats, CorpusError> {
    if corpus.is_empty() {
        return Err(CorpusError::Empty);
    }
    let mut per_condition_counts: BTreeMap<String, usize> =
        corpus.condition_names.iter().map(|c| (c.clone(), 0)).collect();
    let mut total_turns = 0usize;
    for d in &corpus.dialogues {
        *per_condition_counts.entry(d.disease_label.clone()).or_default() += 1;
        total_turns += d.turns.len();
    }
    Ok(CorpusStats {
        n_dialogues: corpus.len(),
        n_conditions: corpus.condition_names.len(),
        mean_turns: total_turns as f64 / corpus.len() as f64,
        per_condition_counts,
    })
}
