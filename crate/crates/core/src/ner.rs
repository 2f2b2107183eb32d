//! Gazetteer symptom extraction.
//!
//! Surface phrases are normalized with the same [`Preprocessor`] as the
//! documents, then matched left to right, longest phrase first, without
//! overlaps.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::preprocess::{Preprocessor, TokenizedDoc};

const BUNDLED_LEXICON: &str = include_str!("../data/symptom_lexicon.tsv");

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("lexicon is empty")]
    Empty,
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: surface `{surface}` normalizes to nothing")]
    EmptySurface { line: usize, surface: String },
    #[error("line {line}: phrase `{phrase}` already maps to `{existing}`, cannot also map to `{canonical}`")]
    Conflict { line: usize, phrase: String, existing: String, canonical: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymptomLexicon {
    entries: BTreeMap<String, BTreeSet<Vec<String>>>,
    phrases: HashMap<Vec<String>, String>,
    max_phrase_len: usize,
}

impl SymptomLexicon {
    /// Builds from `(canonical, surface)` pairs tagged with source line
    /// numbers.
    fn build<'a>(
        pairs: impl IntoIterator<Item = (usize, &'a str, &'a str)>,
        pre: &Preprocessor,
    ) -> Result<Self, LexiconError> {
        let mut entries: BTreeMap<String, BTreeSet<Vec<String>>> = BTreeMap::new();
        let mut phrases: HashMap<Vec<String>, String> = HashMap::new();
        for (line, canonical, surface) in pairs {
            let phrase = pre.tokenize(surface);
            if phrase.is_empty() {
                return Err(LexiconError::EmptySurface { line, surface: surface.to_string() });
            }
            if let Some(existing) = phrases.get(&phrase) {
                if existing != canonical {
                    return Err(LexiconError::Conflict {
                        line,
                        phrase: phrase.join(" "),
                        existing: existing.clone(),
                        canonical: canonical.to_string(),
                    });
                }
            }
            phrases.insert(phrase.clone(), canonical.to_string());
            entries.entry(canonical.to_string()).or_default().insert(phrase);
        }
        if entries.is_empty() {
            return Err(LexiconError::Empty);
        }
        let max_phrase_len = phrases.keys().map(Vec::len).max().unwrap_or(0);
        Ok(SymptomLexicon { entries, phrases, max_phrase_len })
    }

    /// Parses `canonical<TAB>surface phrase` lines; `#` starts a comment.
    pub fn parse(src: &str, pre: &Preprocessor) -> Result<Self, LexiconError> {
        let mut pairs = Vec::new();
        for (i, raw) in src.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (canonical, surface) = line.split_once('\t').ok_or_else(|| LexiconError::Malformed {
                line: i + 1,
                message: "expected `canonical<TAB>surface`".into(),
            })?;
            let canonical = canonical.trim();
            if canonical.is_empty() {
                return Err(LexiconError::Malformed { line: i + 1, message: "empty canonical".into() });
            }
            pairs.push((i + 1, canonical, surface.trim()));
        }
        Self::build(pairs, pre)
    }

    pub fn bundled(pre: &Preprocessor) -> Result<Self, LexiconError> {
        Self::parse(BUNDLED_LEXICON, pre)
    }

    pub fn entries(&self) -> &BTreeMap<String, BTreeSet<Vec<String>>> {
        &self.entries
    }

    pub fn canonical_of(&self, phrase: &[String]) -> Option<&str> {
        self.phrases.get(phrase).map(String::as_str)
    }

    pub fn n_canonicals(&self) -> usize {
        self.entries.len()
    }
}

pub fn load_lexicon(path: impl AsRef<Path>, pre: &Preprocessor) -> Result<SymptomLexicon, LexiconError> {
    SymptomLexicon::parse(&std::fs::read_to_string(path)?, pre)
}

/// Bundled lexicon source text, for echoing and digests.
pub fn bundled_lexicon_source() -> &'static str {
    BUNDLED_LEXICON
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntitySpan {
    pub canonical: String,
    pub surface: Vec<String>,
    pub dialogue_id: String,
    pub token_start: usize,
    pub token_end: usize,
}

pub fn extract_entities(doc: &TokenizedDoc, lex: &SymptomLexicon) -> Vec<EntitySpan> {
    let toks = &doc.tokens;
    let mut spans = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        let longest = (1..=lex.max_phrase_len.min(toks.len() - i))
            .rev()
            .find_map(|len| lex.canonical_of(&toks[i..i + len]).map(|c| (len, c)));
        match longest {
            Some((len, canonical)) => {
                spans.push(EntitySpan {
                    canonical: canonical.to_string(),
                    surface: toks[i..i + len].to_vec(),
                    dialogue_id: doc.dialogue_id.clone(),
                    token_start: i,
                    token_end: i + len,
                });
                i += len;
            }
            None => i += 1,
        }
    }
    spans
}

/// Spans for every document, in document order.
pub fn extract_all(docs: &[TokenizedDoc], lex: &SymptomLexicon) -> Vec<Vec<EntitySpan>> {
    docs.par_iter().map(|d| extract_entities(d, lex)).collect()
}

/// Deduplicated canonical symptoms per dialogue. Dialogues without hits
/// keep an empty set.
pub fn entity_profile(docs: &[TokenizedDoc], lex: &SymptomLexicon) -> BTreeMap<String, BTreeSet<String>> {
    docs.iter()
        .zip(extract_all(docs, lex))
        .map(|(d, spans)| (d.dialogue_id.clone(), spans.into_iter().map(|s| s.canonical).collect()))
        .collect()
}

/// CSV with header `dialogue_id,canonical,surface,start,end`.
pub fn write_entities_csv<'a>(
    spans: impl IntoIterator<Item = &'a EntitySpan>,
    w: impl Write,
) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["dialogue_id", "canonical", "surface", "start", "end"])?;
    for s in spans {
        wtr.write_record([
            s.dialogue_id.as_str(),
            s.canonical.as_str(),
            s.surface.join(" ").as_str(),
            s.token_start.to_string().as_str(),
            s.token_end.to_string().as_str(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(tokens: &str) -> TokenizedDoc {
        TokenizedDoc {
            dialogue_id: "d0".into(),
            tokens: tokens.split_whitespace().map(str::to_string).collect(),
            disease_label: "Allergy".into(),
        }
    }

    fn lex(src: &str) -> SymptomLexicon {
        SymptomLexicon::parse(src, &Preprocessor::default()).unwrap()
    }

    #[test]
    fn two_surfaces_one_canonical() {
        let l = lex("nasal congestion\tcongested nose\nnasal congestion\tstuffy nose\n");
        assert_eq!(l.n_canonicals(), 1);
        assert_eq!(l.entries()["nasal congestion"].len(), 2);
    }

    #[test]
    fn conflict_names_phrase() {
        let err = SymptomLexicon::parse("chill\tchills\nfever\tchills\n", &Preprocessor::default()).unwrap_err();
        match err {
            LexiconError::Conflict { line, phrase, .. } => {
                assert_eq!(line, 2);
                assert_eq!(phrase, "chill");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err_is_empty(SymptomLexicon::parse("# only a comment\n", &Preprocessor::default())));
    }

    fn err_is_empty(r: Result<SymptomLexicon, LexiconError>) -> bool {
        matches!(r, Err(LexiconError::Empty))
    }

    #[test]
    fn surfaces_are_normalized() {
        let l = lex("sore throat\tSore throats!\nshortness of breath\tshortness of breath\n");
        assert_eq!(l.canonical_of(&["sore".into(), "throat".into()]), Some("sore throat"));
        assert_eq!(l.canonical_of(&["shortness".into(), "breath".into()]), Some("shortness of breath"));
        assert!(matches!(
            SymptomLexicon::parse("x\tthe of\n", &Preprocessor::default()),
            Err(LexiconError::EmptySurface { line: 1, .. })
        ));
    }

    #[test]
    fn bundled_lexicon_loads() {
        let l = SymptomLexicon::bundled(&Preprocessor::default()).unwrap();
        assert!(l.n_canonicals() >= 60, "{}", l.n_canonicals());
        for s in [
            "fever",
            "headache",
            "rash",
            "itching",
            "sneezing",
            "cough",
            "sore throat",
            "chills",
            "joint pain",
            "nosebleed",
            "diarrhea",
            "swelling",
            "varicose veins",
            "yellow urine",
            "blisters",
            "chest pain",
        ] {
            assert!(l.entries().contains_key(s), "{s}");
        }
    }

    #[test]
    fn multi_word_surfaces_in_a_row() {
        let l = lex("sneezing\tsneeze\nnasal congestion\tnose congest\n");
        let spans = extract_entities(&doc("user ive sneeze lot today nose congest"), &l);
        let canon: Vec<&str> = spans.iter().map(|s| s.canonical.as_str()).collect();
        assert_eq!(canon, ["sneezing", "nasal congestion"]);
        assert_eq!((spans[1].token_start, spans[1].token_end), (5, 7));
    }

    #[test]
    fn longest_match_wins() {
        let l = lex("throat pain\tthroat\nsore throat\tsore throat\n");
        let spans = extract_entities(&doc("sore throat"), &l);
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].canonical, "sore throat");
        assert!(extract_entities(&doc(""), &l).is_empty());
    }

    #[test]
    fn profile_dedups_and_keeps_empty() {
        let l = lex("fever\tfever\nheadache\theadache\n");
        let mut a = doc("user fever bot ok user fever headache");
        a.dialogue_id = "a".into();
        let mut b = doc("user nothing");
        b.dialogue_id = "b".into();
        let profile = entity_profile(&[a, b], &l);
        assert_eq!(profile["a"], ["fever", "headache"].iter().map(|s| s.to_string()).collect());
        assert!(profile["b"].is_empty());
    }

    #[test]
    fn csv_export() {
        let l = lex("sore throat\tsore throat\n");
        let spans = extract_entities(&doc("user sore throat"), &l);
        let mut buf = Vec::new();
        write_entities_csv(&spans, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "dialogue_id,canonical,surface,start,end\nd0,sore throat,sore throat,1,3\n"
        );
    }
}
