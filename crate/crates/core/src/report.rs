//! Report assembly and rendering (markdown, JSON, CSV tables).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assoc::{self, AssociationRule};
use crate::corpus::CorpusStats;
use crate::ner::{self, EntitySpan};
use crate::pipeline::{ClusterOutput, EntitiesOutput, RulesOutput, StatsOutput, TopicsOutput};
use crate::topics::TopicSummary;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("stage `{stage}` ran on corpus {found}, expected {expected}")]
    CorpusMismatch { stage: &'static str, expected: String, found: String },
    #[error("cluster assignments cover {found} dialogues, corpus has {expected}")]
    ClusterCount { expected: usize, found: usize },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// One row of the cleaned-text / entity-list table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityRow {
    pub dialogue_id: String,
    pub cleaned_text: String,
    pub entities: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub config: serde_json::Value,
    pub methods: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub corpus_digest: String,
    pub stats: CorpusStats,
    pub topic_summaries: Vec<TopicSummary>,
    pub coherence: f64,
    pub silhouette: f64,
    pub cluster_sizes: BTreeMap<usize, usize>,
    /// `(dialogue_id, cluster)` in corpus order.
    pub cluster_assignments: Vec<(String, usize)>,
    pub entity_table: Vec<EntityRow>,
    pub entities: Vec<EntitySpan>,
    pub rules: Vec<AssociationRule>,
    pub max_confidence: f64,
    pub config_echo: ConfigEcho,
}

fn check_digest(stage: &'static str, expected: &str, found: &str) -> Result<(), ReportError> {
    if expected == found {
        Ok(())
    } else {
        Err(ReportError::CorpusMismatch { stage, expected: expected.to_string(), found: found.to_string() })
    }
}

/// Copies stage outputs into a report. Fails if any stage ran on a
/// different corpus than the statistics.
pub fn build_report(
    stats: &StatsOutput,
    topics: &TopicsOutput,
    clusters: &ClusterOutput,
    entities: &EntitiesOutput,
    rules: &RulesOutput,
    config_echo: ConfigEcho,
) -> Result<AnalysisReport, ReportError> {
    let digest = &stats.corpus_digest;
    check_digest("topics", digest, &topics.corpus_digest)?;
    check_digest("cluster", digest, &clusters.corpus_digest)?;
    check_digest("entities", digest, &entities.corpus_digest)?;
    check_digest("rules", digest, &rules.corpus_digest)?;
    let n = stats.stats.n_dialogues;
    if clusters.model.assignments.len() != n || clusters.doc_ids.len() != n {
        return Err(ReportError::ClusterCount { expected: n, found: clusters.model.assignments.len() });
    }

    let cluster_sizes = clusters.model.cluster_sizes().into_iter().enumerate().collect();
    let cluster_assignments =
        clusters.doc_ids.iter().cloned().zip(clusters.model.assignments.iter().copied()).collect();
    let max_confidence = rules.rules.iter().map(|r| r.confidence).fold(0.0, f64::max);
    Ok(AnalysisReport {
        corpus_digest: digest.clone(),
        stats: stats.stats.clone(),
        topic_summaries: topics.summaries.clone(),
        coherence: topics.coherence,
        silhouette: clusters.silhouette,
        cluster_sizes,
        cluster_assignments,
        entity_table: entities.table.clone(),
        entities: entities.spans.clone(),
        rules: rules.rules.clone(),
        max_confidence,
        config_echo,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderFormat {
    Markdown,
    Json,
    CsvBundle,
}

/// The three evaluation rows: method, metric, formatted value.
pub fn metric_rows(report: &AnalysisReport) -> [(&'static str, &'static str, String); 3] {
    [
        ("LDA", "UMass topic coherence", format!("{:.2}", report.coherence)),
        ("K-Means", "Silhouette score", format!("{:.5}", report.silhouette)),
        ("Apriori", "Maximum rule confidence", format!("{:.6}", report.max_confidence)),
    ]
}

pub fn to_json(report: &AnalysisReport) -> Result<String, ReportError> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

pub fn from_json(src: &str) -> Result<AnalysisReport, ReportError> {
    Ok(serde_json::from_str(src)?)
}

fn md_cell(s: &str) -> String {
    s.replace('|', "\\|")
}

fn items(v: &[String]) -> String {
    format!("({})", v.join(", "))
}

pub fn to_markdown(report: &AnalysisReport) -> String {
    let mut md = String::new();
    let s = &report.stats;
    // writing to a String cannot fail
    let _ = writeln!(md, "# Symptom mining report\n");
    let _ = writeln!(md, "Corpus digest: `{}`\n", report.corpus_digest);

    let _ = writeln!(md, "## Corpus statistics\n");
    let _ = writeln!(md, "| Statistic | Value |\n|---|---|");
    let _ = writeln!(md, "| Dialogues | {} |", s.n_dialogues);
    let _ = writeln!(md, "| Conditions | {} |", s.n_conditions);
    let _ = writeln!(md, "| Mean turns per dialogue | {:.2} |\n", s.mean_turns);
    let _ = writeln!(md, "| Condition | Dialogues |\n|---|---|");
    for (c, n) in &s.per_condition_counts {
        let _ = writeln!(md, "| {} | {} |", md_cell(c), n);
    }

    let _ = writeln!(md, "\n## Topics\n");
    for t in &report.topic_summaries {
        let _ = writeln!(md, "Topic {}: {}\n", t.topic_index, t.render());
    }

    let _ = writeln!(md, "## Clusters\n");
    let _ = writeln!(md, "| Cluster | Dialogues |\n|---|---|");
    for (c, n) in &report.cluster_sizes {
        let _ = writeln!(md, "| {} | {} |", c, n);
    }

    let _ = writeln!(md, "\n## Extracted entities\n");
    let _ = writeln!(md, "| Dialogue | Cleaned text | Entities |\n|---|---|---|");
    for row in &report.entity_table {
        let _ = writeln!(
            md,
            "| {} | {} | {} |",
            md_cell(&row.dialogue_id),
            md_cell(&row.cleaned_text),
            md_cell(&row.entities.join(", "))
        );
    }
    let _ = writeln!(md, "\n{} entity spans in total.", report.entities.len());

    let _ = writeln!(md, "\n## Association rules\n");
    if report.rules.is_empty() {
        let _ = writeln!(md, "No rules reach the configured thresholds.");
    } else {
        let _ = writeln!(md, "| Antecedents | Consequents | Support | Confidence | Lift |\n|---|---|---|---|---|");
        for r in &report.rules {
            let _ = writeln!(
                md,
                "| {} | {} | {:.6} | {:.6} | {:.6} |",
                md_cell(&items(&r.antecedent)),
                md_cell(&items(&r.consequent)),
                r.support,
                r.confidence,
                r.lift
            );
        }
    }

    let _ = writeln!(md, "\n## Evaluation metrics\n");
    let _ = writeln!(md, "| Method | Metric | Value |\n|---|---|---|");
    for (method, metric, value) in metric_rows(report) {
        let _ = writeln!(md, "| {} | {} | {} |", method, metric, value);
    }

    let _ = writeln!(md, "\n## Configuration\n");
    let config = serde_json::to_string_pretty(&report.config_echo).expect("echo serializes");
    let _ = writeln!(md, "```json\n{}\n```", config);
    md
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>, ReportError> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(header)?;
    for r in rows {
        wtr.write_record(&r)?;
    }
    wtr.into_inner().map_err(|e| ReportError::Csv(e.into_error().into()))
}

/// CSV `topic,rank,word,probability`.
pub fn topics_table(summaries: &[TopicSummary]) -> Result<Vec<u8>, ReportError> {
    csv_bytes(
        &["topic", "rank", "word", "probability"],
        summaries.iter().flat_map(|t| {
            t.top_words.iter().enumerate().map(move |(rank, (w, p))| {
                vec![t.topic_index.to_string(), (rank + 1).to_string(), w.clone(), format!("{:.6}", p)]
            })
        }),
    )
}

/// CSV `dialogue_id,cluster`.
pub fn clusters_table(assignments: &[(String, usize)]) -> Result<Vec<u8>, ReportError> {
    csv_bytes(&["dialogue_id", "cluster"], assignments.iter().map(|(id, c)| vec![id.clone(), c.to_string()]))
}

/// `(file name, contents)` for every table.
pub fn csv_tables(report: &AnalysisReport) -> Result<Vec<(&'static str, Vec<u8>)>, ReportError> {
    let s = &report.stats;
    let mut stats_rows = vec![
        vec!["corpus".into(), "n_dialogues".into(), s.n_dialogues.to_string()],
        vec!["corpus".into(), "n_conditions".into(), s.n_conditions.to_string()],
        vec!["corpus".into(), "mean_turns".into(), format!("{:.6}", s.mean_turns)],
    ];
    stats_rows.extend(s.per_condition_counts.iter().map(|(c, n)| vec!["condition".into(), c.clone(), n.to_string()]));
    let stats = csv_bytes(&["section", "key", "value"], stats_rows)?;

    let topics = topics_table(&report.topic_summaries)?;
    let clusters = clusters_table(&report.cluster_assignments)?;

    let mut entities = Vec::new();
    ner::write_entities_csv(&report.entities, &mut entities)?;
    let mut rules = Vec::new();
    assoc::write_rules_csv(&report.rules, &mut rules)?;

    let metrics = csv_bytes(
        &["method", "metric", "value"],
        metric_rows(report).into_iter().map(|(a, b, c)| vec![a.to_string(), b.to_string(), c]),
    )?;

    Ok(vec![
        ("stats.csv", stats),
        ("topics.csv", topics),
        ("clusters.csv", clusters),
        ("entities.csv", entities),
        ("rules.csv", rules),
        ("metrics.csv", metrics),
    ])
}

fn write_file(path: PathBuf, bytes: &[u8]) -> Result<PathBuf, ReportError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| ReportError::Write { path: parent.to_path_buf(), source })?;
    }
    fs::write(&path, bytes).map_err(|source| ReportError::Write { path: path.clone(), source })?;
    Ok(path)
}

/// Writes one format under `dir` (`report.md`, `report.json` or
/// `tables/*.csv`) and returns the written paths.
pub fn render(report: &AnalysisReport, format: RenderFormat, dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    match format {
        RenderFormat::Markdown => Ok(vec![write_file(dir.join("report.md"), to_markdown(report).as_bytes())?]),
        RenderFormat::Json => Ok(vec![write_file(dir.join("report.json"), to_json(report)?.as_bytes())?]),
        RenderFormat::CsvBundle => csv_tables(report)?
            .into_iter()
            .map(|(name, bytes)| write_file(dir.join("tables").join(name), &bytes))
            .collect(),
    }
}

/// All three formats.
pub fn write_report_dir(report: &AnalysisReport, dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let mut paths = Vec::new();
    for f in [RenderFormat::Markdown, RenderFormat::Json, RenderFormat::CsvBundle] {
        paths.extend(render(report, f, dir)?);
    }
    Ok(paths)
}
