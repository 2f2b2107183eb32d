//! Dialogue normalization: role markers, lowercasing, punctuation
//! stripping, stop-word removal and lemmatization.

mod lemma;

pub use lemma::Lemmatizer;

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Dialogue};

const BUNDLED_STOPWORDS: &str = include_str!("../../data/stopwords.txt");

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("lexicon line {line}: {message}")]
    Lexicon { line: usize, message: String },
    #[error("stop word `{0}` must be lowercase and free of punctuation")]
    InvalidStopword(String),
}

/// The bundled English stop-word list. Role markers and `yes`/`no` are
/// deliberately absent; the association miner filters those instead.
pub fn default_stopwords() -> BTreeSet<String> {
    lemma::content_lines(BUNDLED_STOPWORDS).map(str::to_string).collect()
}

pub fn load_stopwords(path: impl AsRef<Path>) -> Result<BTreeSet<String>, PreprocessError> {
    let src = std::fs::read_to_string(path)?;
    Ok(lemma::content_lines(&src).map(str::to_string).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub lowercase: bool,
    pub strip_punctuation: bool,
    pub stopwords: BTreeSet<String>,
    pub lemmatize: bool,
    pub insert_role_markers: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            lowercase: true,
            strip_punctuation: true,
            stopwords: default_stopwords(),
            lemmatize: true,
            insert_role_markers: true,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<(), PreprocessError> {
        for w in &self.stopwords {
            let clean = w.chars().all(|c| c.is_alphanumeric() && !c.is_uppercase());
            if w.is_empty() || !clean {
                return Err(PreprocessError::InvalidStopword(w.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedDoc {
    pub dialogue_id: String,
    pub tokens: Vec<String>,
    pub disease_label: String,
}

fn is_apostrophe(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}' | '\u{2018}' | '\u{02bc}')
}

/// A configured normalizer. Construction validates the configuration.
#[derive(Debug, Clone, Default)]
pub struct Preprocessor {
    config: PreprocessConfig,
    lemmatizer: Lemmatizer,
}

impl Preprocessor {
    pub fn new(config: PreprocessConfig, lemmatizer: Lemmatizer) -> Result<Self, PreprocessError> {
        config.validate()?;
        Ok(Preprocessor { config, lemmatizer })
    }

    pub fn config(&self) -> &PreprocessConfig {
        &self.config
    }

    pub fn lemmatizer(&self) -> &Lemmatizer {
        &self.lemmatizer
    }

    /// Normalizes free text into word tokens (no role marker).
    pub fn tokenize(&self, text: &str) -> Vec<String> {
        let cfg = &self.config;
        let mut s: String = text.chars().filter(|&c| !is_apostrophe(c)).collect();
        if cfg.lowercase {
            s = s.to_lowercase();
        }
        if cfg.strip_punctuation {
            s = s.chars().map(|c| if c.is_alphanumeric() || c.is_whitespace() { c } else { ' ' }).collect();
        }
        s.split_whitespace()
            .filter(|w| !cfg.stopwords.contains(*w))
            .map(|w| if cfg.lemmatize { self.lemmatizer.lemmatize(w) } else { w.to_string() })
            // a lemma can itself be a stop word ("thems" -> "them")
            .filter(|w| !cfg.stopwords.contains(w))
            .collect()
    }

    pub fn preprocess_dialogue(&self, d: &Dialogue) -> TokenizedDoc {
        let mut tokens = Vec::new();
        for turn in &d.turns {
            if self.config.insert_role_markers {
                tokens.push(turn.speaker.marker().to_string());
            }
            tokens.extend(self.tokenize(&turn.text));
        }
        TokenizedDoc { dialogue_id: d.id.clone(), tokens, disease_label: d.disease_label.clone() }
    }

    /// Preprocesses every dialogue; output order follows corpus order.
    pub fn preprocess_corpus(&self, corpus: &Corpus) -> Vec<TokenizedDoc> {
        corpus.dialogues().par_iter().map(|d| self.preprocess_dialogue(d)).collect()
    }
}

pub fn preprocess_dialogue(d: &Dialogue, pre: &Preprocessor) -> TokenizedDoc {
    pre.preprocess_dialogue(d)
}

/// Lemmatizes with the bundled lexicon.
pub fn lemmatize_token(token: &str) -> String {
    static DEFAULT: OnceLock<Lemmatizer> = OnceLock::new();
    DEFAULT.get_or_init(Lemmatizer::default).lemmatize(token)
}
