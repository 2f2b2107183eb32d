//! Stage orchestration: configuration, seed propagation and the stage
//! runners used by the command-line front end.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assoc::{self, AssociationRule, FrequentItemset, MiningConfig, MiningError, TransactionSet};
use crate::cluster::{self, ClusterError, KMeansConfig, KMeansModel};
use crate::corpus::{self, compute_stats, Corpus, CorpusError, CorpusFormat, CorpusStats};
use crate::ner::{self, EntitySpan, LexiconError, SymptomLexicon};
use crate::preprocess::{load_stopwords, Lemmatizer, PreprocessConfig, PreprocessError, Preprocessor, TokenizedDoc};
use crate::report::{self, AnalysisReport, EntityRow, ReportError};
use crate::seed;
use crate::topics::{self, LdaConfig, LdaError, LdaModel, TopicSummary};
use crate::vectorize::{self, DocTermMatrix, TfidfConfig, VectorizeError, Vocabulary};

/// Conversational tokens offered to rule mining alongside symptoms; the
/// marker filter decides whether they survive.
pub const MARKER_TOKENS: [&str; 4] = ["bot", "no", "user", "yes"];

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid config: {field}: {reason}")]
    InvalidConfig { field: String, reason: String },
    #[error("cannot read config {path}: {message}")]
    ConfigFile { path: PathBuf, message: String },
    #[error("no input corpus given")]
    MissingInput,
    #[error("input {path}: {source}")]
    Corpus {
        path: PathBuf,
        #[source]
        source: CorpusError,
    },
    #[error(transparent)]
    CorpusData(#[from] CorpusError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Vectorize(#[from] VectorizeError),
    #[error(transparent)]
    Lda(#[from] LdaError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Mining(#[from] MiningError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

fn invalid(field: &str, reason: impl ToString) -> PipelineError {
    PipelineError::InvalidConfig { field: field.to_string(), reason: reason.to_string() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: Option<PathBuf>,
    pub input_format: CorpusFormat,
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
    pub threads: usize,
    /// Symptom gazetteer; the bundled one when absent.
    pub lexicon: Option<PathBuf>,
    /// Replaces `preprocess.stopwords` when set.
    pub stopwords: Option<PathBuf>,
    /// Irregular lemma lexicon; the bundled one when absent.
    pub lemma_lexicon: Option<PathBuf>,
    /// Words listed per topic.
    pub top_n_words: usize,
    /// Words per topic entering the coherence score.
    pub coherence_top_n: usize,
    /// Dialogues shown in the entity table.
    pub entity_sample: usize,
    pub preprocess: PreprocessConfig,
    pub tfidf: TfidfConfig,
    pub lda: LdaConfig,
    pub kmeans: KMeansConfig,
    pub mining: MiningConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            input: None,
            input_format: CorpusFormat::Jsonl,
            output_dir: None,
            seed: 42,
            threads: 1,
            lexicon: None,
            stopwords: None,
            lemma_lexicon: None,
            top_n_words: 10,
            coherence_top_n: 10,
            entity_sample: 10,
            preprocess: PreprocessConfig::default(),
            tfidf: TfidfConfig::default(),
            lda: LdaConfig::default(),
            kmeans: KMeansConfig::default(),
            mining: MiningConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_json_str(src: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(src)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let err = |message: String| PipelineError::ConfigFile { path: path.to_path_buf(), message };
        let src = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        Self::from_json_str(&src).map_err(|e| err(e.to_string()))
    }

    /// Overwrites the stage seeds with streams derived from the global seed.
    pub fn resolve_seeds(&mut self) {
        self.lda.seed = seed::derive(self.seed, "topics");
        self.kmeans.seed = seed::derive(self.seed, "cluster");
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.threads == 0 {
            return Err(invalid("threads", "must be at least 1"));
        }
        if self.top_n_words == 0 {
            return Err(invalid("top_n_words", "must be at least 1"));
        }
        if self.coherence_top_n < 2 {
            return Err(invalid("coherence_top_n", "must be at least 2"));
        }
        self.preprocess.validate().map_err(|e| invalid("preprocess", e))?;
        self.tfidf.validate().map_err(|e| invalid("tfidf", e))?;
        self.lda.validate().map_err(|e| invalid("lda", e))?;
        self.kmeans.validate().map_err(|e| invalid("kmeans", e))?;
        self.mining.validate().map_err(|e| invalid("mining", e))?;
        Ok(())
    }

    /// The configuration as echoed into reports: everything that affects
    /// results, nothing that only says where or how fast to write them.
    pub fn echo(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = v.as_object_mut() {
            map.remove("output_dir");
            map.remove("threads");
        }
        v
    }
}

/// Fixed method choices, echoed next to the configuration.
pub fn method_notes() -> BTreeMap<String, String> {
    [
        ("tokenizer", "lowercase, apostrophes dropped, split on non-alphanumerics, role marker per turn"),
        ("lemmatizer", "irregular lexicon then suffix rules, iterated to a fixed point"),
        ("idf", "smoothed: ln((1+N)/(1+df)) + 1, rows L2-normalized"),
        ("topic_model", "LDA, collapsed Gibbs sampling, posterior mean over post-burn-in sweeps"),
        ("topic_input", "raw term counts over the TF-IDF vocabulary"),
        ("coherence", "UMass: ln((D(wm,wl)+1)/D(wl)) averaged over top-word pairs and topics"),
        ("clustering", "k-means++ seeding, Lloyd iterations, best of n_init by inertia"),
        ("distance", "Euclidean on L2-normalized TF-IDF rows"),
        ("silhouette", "exact, Euclidean, singleton clusters score 0"),
        ("entities", "gazetteer, longest match left to right, no overlap"),
        ("transactions", "per-dialogue set of canonical symptoms plus role markers, minus marker_filter"),
        ("seeds", "stage seeds derived from the global seed and the stage name"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

#[derive(Debug, Clone)]
pub struct Prepared {
    pub corpus_digest: String,
    pub docs: Vec<TokenizedDoc>,
    pub vocab: Vocabulary,
    pub counts: DocTermMatrix,
    pub tfidf: DocTermMatrix,
}

#[derive(Debug, Clone)]
pub struct StatsOutput {
    pub corpus_digest: String,
    pub stats: CorpusStats,
}

#[derive(Debug, Clone)]
pub struct TopicsOutput {
    pub corpus_digest: String,
    pub model: LdaModel,
    pub summaries: Vec<TopicSummary>,
    pub coherence: f64,
}

#[derive(Debug, Clone)]
pub struct ClusterOutput {
    pub corpus_digest: String,
    pub model: KMeansModel,
    pub doc_ids: Vec<String>,
    pub silhouette: f64,
}

#[derive(Debug, Clone)]
pub struct EntitiesOutput {
    pub corpus_digest: String,
    pub spans: Vec<EntitySpan>,
    pub table: Vec<EntityRow>,
    pub profiles: BTreeMap<String, BTreeSet<String>>,
}

#[derive(Debug, Clone)]
pub struct RulesOutput {
    pub corpus_digest: String,
    pub transactions: TransactionSet,
    pub frequent: Vec<FrequentItemset>,
    pub rules: Vec<AssociationRule>,
}

/// A validated configuration with its loaded resources.
#[derive(Debug)]
pub struct Pipeline {
    config: PipelineConfig,
    preprocessor: Preprocessor,
    lexicon: SymptomLexicon,
    pool: rayon::ThreadPool,
}

impl Pipeline {
    pub fn new(mut config: PipelineConfig) -> Result<Self, PipelineError> {
        config.resolve_seeds();
        if let Some(path) = &config.stopwords {
            config.preprocess.stopwords = load_stopwords(path)?;
        }
        config.validate()?;
        let lemmatizer = match &config.lemma_lexicon {
            Some(path) => Lemmatizer::with_lexicon_file(path)?,
            None => Lemmatizer::default(),
        };
        let preprocessor = Preprocessor::new(config.preprocess.clone(), lemmatizer)?;
        let lexicon = match &config.lexicon {
            Some(path) => ner::load_lexicon(path, &preprocessor)?,
            None => SymptomLexicon::bundled(&preprocessor)?,
        };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| PipelineError::ThreadPool(e.to_string()))?;
        Ok(Pipeline { config, preprocessor, lexicon, pool })
    }

    /// Effective configuration, stage seeds resolved.
    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn preprocessor(&self) -> &Preprocessor {
        &self.preprocessor
    }

    pub fn lexicon(&self) -> &SymptomLexicon {
        &self.lexicon
    }

    /// Runs `f` inside this pipeline's thread pool.
    pub fn install<R: Send>(&self, f: impl FnOnce(&Self) -> R + Send) -> R {
        self.pool.install(|| f(self))
    }

    pub fn load_corpus(&self) -> Result<Corpus, PipelineError> {
        let path = self.config.input.as_ref().ok_or(PipelineError::MissingInput)?;
        corpus::load_corpus(path, self.config.input_format)
            .map_err(|source| PipelineError::Corpus { path: path.clone(), source })
    }

    pub fn stats(&self, corpus: &Corpus) -> Result<StatsOutput, PipelineError> {
        Ok(StatsOutput { corpus_digest: corpus.digest(), stats: compute_stats(corpus)? })
    }

    pub fn prepare(&self, corpus: &Corpus) -> Result<Prepared, PipelineError> {
        let docs = self.preprocessor.preprocess_corpus(corpus);
        let vocab = vectorize::fit_vocabulary(&docs, &self.config.tfidf)?;
        let counts = vectorize::count_matrix(&docs, &vocab);
        let tfidf = vectorize::tfidf_matrix(&docs, &vocab, &self.config.tfidf);
        Ok(Prepared { corpus_digest: corpus.digest(), docs, vocab, counts, tfidf })
    }

    pub fn topics(&self, prep: &Prepared) -> Result<TopicsOutput, PipelineError> {
        let model = topics::fit_lda(&prep.counts, &self.config.lda)?;
        let summaries = (0..model.n_topics())
            .map(|k| topics::top_words(&model, k, self.config.top_n_words))
            .collect::<Result<Vec<_>, _>>()?;
        let coherence = topics::umass_coherence(&model, &prep.counts, self.config.coherence_top_n)?;
        Ok(TopicsOutput { corpus_digest: prep.corpus_digest.clone(), model, summaries, coherence })
    }

    pub fn cluster(&self, prep: &Prepared) -> Result<ClusterOutput, PipelineError> {
        let model = cluster::fit_kmeans(&prep.tfidf, &self.config.kmeans)?;
        let silhouette = cluster::silhouette_score(&prep.tfidf, &model.assignments)?;
        let doc_ids = prep.docs.iter().map(|d| d.dialogue_id.clone()).collect();
        Ok(ClusterOutput { corpus_digest: prep.corpus_digest.clone(), model, doc_ids, silhouette })
    }

    pub fn entities(&self, prep: &Prepared) -> EntitiesOutput {
        let per_doc = ner::extract_all(&prep.docs, &self.lexicon);
        let table = prep
            .docs
            .iter()
            .zip(&per_doc)
            .take(self.config.entity_sample)
            .map(|(d, spans)| EntityRow {
                dialogue_id: d.dialogue_id.clone(),
                cleaned_text: d.tokens.join(" "),
                entities: spans.iter().map(|s| s.canonical.clone()).collect(),
            })
            .collect();
        let markers: BTreeSet<&str> = MARKER_TOKENS.into_iter().collect();
        let profiles = prep
            .docs
            .iter()
            .zip(&per_doc)
            .map(|(d, spans)| {
                let mut items: BTreeSet<String> = spans.iter().map(|s| s.canonical.clone()).collect();
                items.extend(d.tokens.iter().filter(|t| markers.contains(t.as_str())).cloned());
                (d.dialogue_id.clone(), items)
            })
            .collect();
        EntitiesOutput {
            corpus_digest: prep.corpus_digest.clone(),
            spans: per_doc.into_iter().flatten().collect(),
            table,
            profiles,
        }
    }

    pub fn rules(&self, entities: &EntitiesOutput) -> Result<RulesOutput, PipelineError> {
        let cfg = &self.config.mining;
        let transactions = assoc::build_transactions(&entities.profiles, cfg);
        let frequent = assoc::apriori(&transactions, cfg)?;
        let rules = assoc::generate_rules(&frequent, &transactions, cfg);
        Ok(RulesOutput { corpus_digest: entities.corpus_digest.clone(), transactions, frequent, rules })
    }

    /// Every stage in order, inside the pipeline's thread pool. `log`
    /// receives one line per finished stage.
    pub fn run_all(&self, corpus: &Corpus, log: &(dyn Fn(&str) + Sync)) -> Result<AnalysisReport, PipelineError> {
        self.install(|p| {
            let stats = p.stats(corpus)?;
            log(&format!("stats: {} dialogues, {} conditions", stats.stats.n_dialogues, stats.stats.n_conditions));
            let prep = p.prepare(corpus)?;
            log(&format!("preprocess: {} terms in vocabulary", prep.vocab.len()));
            let topics = p.topics(&prep)?;
            log(&format!("topics: {} topics, coherence {:.2}", topics.model.n_topics(), topics.coherence));
            let clusters = p.cluster(&prep)?;
            log(&format!("cluster: inertia {:.6}, silhouette {:.5}", clusters.model.inertia, clusters.silhouette));
            let entities = p.entities(&prep);
            log(&format!("entities: {} spans", entities.spans.len()));
            let rules = p.rules(&entities)?;
            log(&format!("rules: {} frequent itemsets, {} rules", rules.frequent.len(), rules.rules.len()));
            let report = report::build_report(
                &stats,
                &topics,
                &clusters,
                &entities,
                &rules,
                report::ConfigEcho { config: p.config.echo(), methods: method_notes() },
            )?;
            Ok(report)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        PipelineConfig::default().validate().unwrap();
    }

    #[test]
    fn stage_seeds_follow_global_seed() {
        let mut a = PipelineConfig { seed: 7, ..PipelineConfig::default() };
        let mut b = a.clone();
        a.resolve_seeds();
        b.resolve_seeds();
        assert_eq!(a.lda.seed, b.lda.seed);
        assert_ne!(a.lda.seed, a.kmeans.seed);
        let mut c = PipelineConfig { seed: 8, ..PipelineConfig::default() };
        c.resolve_seeds();
        assert_ne!(a.lda.seed, c.lda.seed);
    }

    #[test]
    fn invalid_config_names_field() {
        let mut cfg = PipelineConfig::default();
        cfg.kmeans.k = 1;
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("kmeans") && err.contains("k must be at least 2"), "{err}");
        let cfg = PipelineConfig { threads: 0, ..PipelineConfig::default() };
        assert!(cfg.validate().unwrap_err().to_string().contains("threads"));
    }

    #[test]
    fn json_config_partial_and_strict() {
        let cfg = PipelineConfig::from_json_str(r#"{"seed": 9, "lda": {"n_topics": 3}}"#).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.lda.n_topics, 3);
        assert_eq!(cfg.lda.beta, 0.01);
        assert!(PipelineConfig::from_json_str(r#"{"sed": 9}"#).is_err());
    }

    #[test]
    fn echo_drops_output_location() {
        let cfg = PipelineConfig { output_dir: Some("/tmp/x".into()), threads: 4, ..PipelineConfig::default() };
        let echo = cfg.echo();
        assert!(echo.get("output_dir").is_none());
        assert!(echo.get("threads").is_none());
        assert_eq!(echo["mining"]["min_support"], 0.05);
    }
}
