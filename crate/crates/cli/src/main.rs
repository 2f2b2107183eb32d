//! `symptomine` command-line front end.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use symptomine::assoc;
use symptomine::cluster;
use symptomine::corpus::{self, Corpus, CorpusFormat, SynthesisPlan};
use symptomine::ner;
use symptomine::pipeline::{Pipeline, PipelineConfig};
use symptomine::report;

#[derive(Parser, Debug)]
#[command(name = "symptomine", version, about = "Mine symptom knowledge from patient-chatbot dialogues")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// JSON pipeline configuration; explicit flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Keep bot/user/yes/no tokens in rule-mining transactions.
    #[arg(long, global = true)]
    no_marker_filter: bool,
    /// Symptom lexicon (`surface<TAB>canonical` per line).
    #[arg(long, global = true)]
    lexicon: Option<PathBuf>,
    /// Stop-word list, one word per line.
    #[arg(long, global = true)]
    stopwords: Option<PathBuf>,
    /// Irregular lemma lexicon (`surface<TAB>lemma` per line).
    #[arg(long, global = true)]
    lemma_lexicon: Option<PathBuf>,
    /// Corpus file format.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Jsonl,
    Csv,
}

impl From<Format> for CorpusFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Jsonl => CorpusFormat::Jsonl,
            Format::Csv => CorpusFormat::Csv,
        }
    }
}

#[derive(Args, Debug)]
struct StageArgs {
    /// Input corpus; falls back to `input` in the config.
    corpus: Option<PathBuf>,
    /// Output directory; falls back to `output_dir` in the config.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print corpus statistics as JSON.
    Stats { corpus: Option<PathBuf> },
    /// Write a synthesized corpus.
    Synth {
        /// Synthesis plan (JSON); the bundled plan when omitted.
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Fit the topic model; writes topics.csv and lda_model.txt.
    Topics(StageArgs),
    /// Cluster dialogues; writes clusters.csv and centroids.txt.
    Cluster(StageArgs),
    /// Extract symptom entities; writes entities.csv.
    Entities(StageArgs),
    /// Mine association rules; writes rules.csv.
    Rules(StageArgs),
    /// Run every stage and write the report directory.
    RunAll(StageArgs),
}

fn effective_config(g: &GlobalArgs, corpus: Option<&PathBuf>, output: Option<&PathBuf>) -> Result<PipelineConfig> {
    let mut cfg = match &g.config {
        Some(path) => PipelineConfig::from_json_file(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    if g.no_marker_filter {
        cfg.mining.marker_filter.clear();
    }
    if let Some(p) = &g.lexicon {
        cfg.lexicon = Some(p.clone());
    }
    if let Some(p) = &g.stopwords {
        cfg.stopwords = Some(p.clone());
    }
    if let Some(p) = &g.lemma_lexicon {
        cfg.lemma_lexicon = Some(p.clone());
    }
    if let Some(f) = g.format {
        cfg.input_format = f.into();
    }
    if let Some(t) = g.threads {
        cfg.threads = t;
    }
    if let Some(p) = corpus {
        cfg.input = Some(p.clone());
    }
    if let Some(p) = output {
        cfg.output_dir = Some(p.clone());
    }
    Ok(cfg)
}

fn log(msg: &str) {
    eprintln!("[symptomine] {msg}");
}

fn output_dir(p: &Pipeline) -> Result<PathBuf> {
    let dir = p.config().output_dir.clone().ok_or_else(|| anyhow!("no output directory (use -o or output_dir)"))?;
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    Ok(dir)
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
    log(&format!("wrote {}", path.display()));
    Ok(())
}

fn load(p: &Pipeline) -> Result<Corpus> {
    let corpus = p.load_corpus()?;
    log(&format!("loaded {} dialogues", corpus.len()));
    Ok(corpus)
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Stats { corpus } => {
            let p = Pipeline::new(effective_config(g, corpus.as_ref(), None)?)?;
            let stats = p.stats(&load(&p)?)?;
            let mut out = std::io::stdout().lock();
            serde_json::to_writer_pretty(&mut out, &stats.stats)?;
            writeln!(out)?;
        }
        Command::Synth { plan, output } => {
            let plan = match plan {
                Some(path) => {
                    let src = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
                    serde_json::from_str::<SynthesisPlan>(&src)
                        .with_context(|| format!("invalid plan {}", path.display()))?
                }
                None => corpus::bundled_plan(),
            };
            let mut cfg = effective_config(g, None, None)?;
            if g.config.is_none() && g.format.is_none() {
                cfg.input_format = match output.extension().and_then(|e| e.to_str()) {
                    Some("csv") => CorpusFormat::Csv,
                    _ => CorpusFormat::Jsonl,
                };
            }
            let c = corpus::synthesize_corpus(&plan)?;
            corpus::write_corpus(&c, output, cfg.input_format)?;
            log(&format!("wrote {} dialogues to {}", c.len(), output.display()));
        }
        Command::Topics(a) => {
            let p = Pipeline::new(effective_config(g, a.corpus.as_ref(), a.output.as_ref())?)?;
            let dir = output_dir(&p)?;
            let corpus = load(&p)?;
            let topics = p.install(|p| -> Result<_> { Ok(p.topics(&p.prepare(&corpus)?)?) })?;
            log(&format!("coherence {:.2}", topics.coherence));
            write(&dir.join("topics.csv"), &report::topics_table(&topics.summaries)?)?;
            let mut model = Vec::new();
            topics.model.write_text(&mut model)?;
            write(&dir.join("lda_model.txt"), &model)?;
            for t in &topics.summaries {
                println!("Topic {}: {}", t.topic_index, t.render());
            }
        }
        Command::Cluster(a) => {
            let p = Pipeline::new(effective_config(g, a.corpus.as_ref(), a.output.as_ref())?)?;
            let dir = output_dir(&p)?;
            let corpus = load(&p)?;
            let (prep, out) = p.install(|p| -> Result<_> {
                let prep = p.prepare(&corpus)?;
                let out = p.cluster(&prep)?;
                Ok((prep, out))
            })?;
            let assignments: Vec<(String, usize)> =
                out.doc_ids.iter().cloned().zip(out.model.assignments.iter().copied()).collect();
            write(&dir.join("clusters.csv"), &report::clusters_table(&assignments)?)?;
            let mut centroids = Vec::new();
            cluster::centroid_matrix(&out.model, &prep.tfidf).write_triplets(&mut centroids)?;
            write(&dir.join("centroids.txt"), &centroids)?;
            println!("inertia {:.6}", out.model.inertia);
            println!("silhouette {:.5}", out.silhouette);
        }
        Command::Entities(a) => {
            let p = Pipeline::new(effective_config(g, a.corpus.as_ref(), a.output.as_ref())?)?;
            let dir = output_dir(&p)?;
            let corpus = load(&p)?;
            let out = p.install(|p| -> Result<_> { Ok(p.entities(&p.prepare(&corpus)?)) })?;
            let mut buf = Vec::new();
            ner::write_entities_csv(&out.spans, &mut buf)?;
            write(&dir.join("entities.csv"), &buf)?;
            println!("{} spans", out.spans.len());
        }
        Command::Rules(a) => {
            let p = Pipeline::new(effective_config(g, a.corpus.as_ref(), a.output.as_ref())?)?;
            let dir = output_dir(&p)?;
            let corpus = load(&p)?;
            let out = p.install(|p| -> Result<_> { Ok(p.rules(&p.entities(&p.prepare(&corpus)?))?) })?;
            let mut buf = Vec::new();
            assoc::write_rules_csv(&out.rules, &mut buf)?;
            write(&dir.join("rules.csv"), &buf)?;
            println!("{} frequent itemsets, {} rules", out.frequent.len(), out.rules.len());
        }
        Command::RunAll(a) => {
            let p = Pipeline::new(effective_config(g, a.corpus.as_ref(), a.output.as_ref())?)?;
            let dir = output_dir(&p)?;
            let corpus = load(&p)?;
            let rep = p.run_all(&corpus, &log)?;
            for path in report::write_report_dir(&rep, &dir)? {
                log(&format!("wrote {}", path.display()));
            }
            for (method, metric, value) in report::metric_rows(&rep) {
                println!("{method}\t{metric}\t{value}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
