//! Rule and lexicon lemmatizer for conversational clinical English.
//!
//! Lookup order: irregular-form lexicon, then suffix rules in priority order
//! (`-ies`, sibilant `-es`, `-s`, `-ing`). Rules are reapplied until the
//! token stops changing, which makes the mapping idempotent.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use super::PreprocessError;

const BUNDLED_LEXICON: &str = include_str!("../../data/lemma_lexicon.tsv");
const BUNDLED_SILENT_E: &str = include_str!("../../data/silent_e_stems.txt");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lemmatizer {
    irregular: HashMap<String, String>,
    silent_e: HashSet<String>,
}

impl Default for Lemmatizer {
    fn default() -> Self {
        let irregular = parse_lexicon(BUNDLED_LEXICON).expect("bundled lemma lexicon is valid");
        let silent_e = content_lines(BUNDLED_SILENT_E).map(str::to_string).collect();
        Lemmatizer { irregular, silent_e }
    }
}

pub(crate) fn content_lines(src: &str) -> impl Iterator<Item = &str> {
    src.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'))
}

fn parse_lexicon(src: &str) -> Result<HashMap<String, String>, PreprocessError> {
    let mut map = HashMap::new();
    for (i, raw) in src.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (surface, lemma) = line
            .split_once('\t')
            .ok_or_else(|| PreprocessError::Lexicon { line: i + 1, message: "expected `surface<TAB>lemma`".into() })?;
        let (surface, lemma) = (surface.trim(), lemma.trim());
        if surface.is_empty() || lemma.is_empty() {
            return Err(PreprocessError::Lexicon { line: i + 1, message: "empty field".into() });
        }
        map.insert(surface.to_string(), lemma.to_string());
    }
    Ok(map)
}

fn has_vowel(s: &str) -> bool {
    s.chars().any(|c| matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y'))
}

impl Lemmatizer {
    /// Bundled silent-e stems with a replacement irregular-form lexicon.
    pub fn with_lexicon_file(path: impl AsRef<Path>) -> Result<Self, PreprocessError> {
        let src = std::fs::read_to_string(path)?;
        Ok(Lemmatizer { irregular: parse_lexicon(&src)?, ..Self::default() })
    }

    pub fn from_parts(irregular: HashMap<String, String>, silent_e: HashSet<String>) -> Self {
        Lemmatizer { irregular, silent_e }
    }

    pub fn irregular(&self) -> &HashMap<String, String> {
        &self.irregular
    }

    pub fn lemmatize(&self, token: &str) -> String {
        let mut current = token.to_string();
        loop {
            if let Some(lemma) = self.irregular.get(&current) {
                return lemma.clone();
            }
            match self.strip_suffix(&current) {
                Some(next) => current = next,
                None => return current,
            }
        }
    }

    fn strip_suffix(&self, t: &str) -> Option<String> {
        let len = t.chars().count();
        if len > 4 && t.ends_with("ies") {
            return Some(format!("{}y", &t[..t.len() - 3]));
        }
        let sibilant = ["ches", "shes", "xes", "ses", "zes"].iter().any(|s| t.ends_with(s));
        if len >= 5 && sibilant && !t.ends_with("aches") {
            return Some(t[..t.len() - 2].to_string());
        }
        if len > 3 && t.ends_with('s') && !["ss", "us", "is"].iter().any(|s| t.ends_with(s)) {
            return Some(t[..t.len() - 1].to_string());
        }
        if let Some(stem) = t.strip_suffix("ing") {
            if stem.chars().count() >= 3 && has_vowel(stem) {
                if self.silent_e.contains(stem) {
                    return Some(format!("{stem}e"));
                }
                let b = stem.as_bytes();
                let n = b.len();
                if n >= 2 && b[n - 1] == b[n - 2] && b"bdgmnprt".contains(&b[n - 1]) {
                    return Some(stem[..n - 1].to_string());
                }
                return Some(stem.to_string());
            }
        }
        None
    }
}
