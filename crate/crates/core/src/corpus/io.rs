use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError, Dialogue, Speaker, Turn};

/// On-disk corpus encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    #[default]
    Jsonl,
    Csv,
}

impl std::fmt::Display for CorpusFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CorpusFormat::Jsonl => "jsonl",
            CorpusFormat::Csv => "csv",
        })
    }
}

impl std::str::FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" => Ok(CorpusFormat::Jsonl),
            "csv" => Ok(CorpusFormat::Csv),
            other => Err(format!("unknown corpus format `{other}` (expected jsonl or csv)")),
        }
    }
}

pub fn load_corpus(path: impl AsRef<Path>, format: CorpusFormat) -> Result<Corpus, CorpusError> {
    match format {
        CorpusFormat::Jsonl => load_jsonl(path),
        CorpusFormat::Csv => load_csv(path),
    }
}

pub fn write_corpus(corpus: &Corpus, path: impl AsRef<Path>, format: CorpusFormat) -> Result<(), CorpusError> {
    match format {
        CorpusFormat::Jsonl => write_jsonl(corpus, path),
        CorpusFormat::Csv => write_csv(corpus, path),
    }
}

#[derive(Serialize, Deserialize)]
struct DialogueRecord {
    id: String,
    disease: String,
    turns: Vec<Turn>,
}

pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    read_jsonl(BufReader::new(File::open(path)?))
}

pub fn read_jsonl(reader: impl BufRead) -> Result<Corpus, CorpusError> {
    let mut dialogues = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: DialogueRecord =
            serde_json::from_str(&line).map_err(|e| CorpusError::Parse { line: i + 1, message: e.to_string() })?;
        dialogues.push(Dialogue::new(record.id, record.disease, record.turns)?);
    }
    Corpus::from_dialogues(dialogues)
}

pub fn to_jsonl_string(corpus: &Corpus) -> String {
    let mut out = String::new();
    for d in corpus.dialogues() {
        let record = DialogueRecord { id: d.id.clone(), disease: d.disease_label.clone(), turns: d.turns.clone() };
        out.push_str(&serde_json::to_string(&record).expect("dialogue serializes"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl(corpus: &Corpus, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let mut f = File::create(path)?;
    f.write_all(to_jsonl_string(corpus).as_bytes())?;
    Ok(())
}

fn speaker_prefix() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)(?:^|\s)(user|bot):").expect("valid regex"))
}

/// Splits flat dialogue text on `user:` / `bot:` prefixes.
fn split_turns(text: &str) -> Option<Vec<Turn>> {
    let re = speaker_prefix();
    let marks: Vec<_> = re
        .captures_iter(text)
        .map(|c| {
            let role = c.get(1).unwrap();
            let speaker = if role.as_str().eq_ignore_ascii_case("user") { Speaker::User } else { Speaker::Bot };
            (speaker, role.start(), c.get(0).unwrap().end())
        })
        .collect();
    let (_, first_start, _) = *marks.first()?;
    if !text[..first_start].trim().is_empty() {
        return None;
    }
    let turns = marks
        .iter()
        .enumerate()
        .map(|(i, &(speaker, _, body_start))| {
            let body_end = marks.get(i + 1).map_or(text.len(), |m| m.1);
            Turn::new(speaker, text[body_start..body_end].trim())
        })
        .collect();
    Some(turns)
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    read_csv(File::open(path)?)
}

pub fn read_csv(reader: impl Read) -> Result<Corpus, CorpusError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers().map_err(|e| CorpusError::Parse { line: 1, message: e.to_string() })?.clone();
    let column =
        |name: &'static str| headers.iter().position(|h| h.trim() == name).ok_or(CorpusError::MissingColumn(name));
    let (id_col, disease_col, text_col) = (column("id")?, column("disease")?, column("text")?);

    let mut dialogues = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| CorpusError::Parse { line, message: e.to_string() })?;
        let field = |c: usize| row.get(c).unwrap_or_default();
        let turns = split_turns(field(text_col)).ok_or_else(|| CorpusError::Parse {
            line,
            message: "text has no leading `user:` or `bot:` speaker prefix".into(),
        })?;
        dialogues.push(Dialogue::new(field(id_col), field(disease_col), turns)?);
    }
    Corpus::from_dialogues(dialogues)
}

pub fn to_csv_string(corpus: &Corpus) -> String {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["id", "disease", "text"]).expect("in-memory write");
    for d in corpus.dialogues() {
        let text = d.turns.iter().map(|t| format!("{}: {}", t.speaker.marker(), t.text)).collect::<Vec<_>>().join(" ");
        wtr.write_record([d.id.as_str(), d.disease_label.as_str(), text.as_str()]).expect("in-memory write");
    }
    String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

pub fn write_csv(corpus: &Corpus, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let mut f = File::create(path)?;
    f.write_all(to_csv_string(corpus).as_bytes())?;
    Ok(())
}
