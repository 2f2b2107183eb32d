//! Latent Dirichlet Allocation by collapsed Gibbs sampling, top-word
//! summaries and UMass coherence.

mod coherence;
mod gibbs;

pub use coherence::{umass_coherence, umass_for_lists};
pub use gibbs::{GibbsSampler, GibbsState};

use std::cmp::Ordering;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vectorize::{DocTermMatrix, Weighting};

#[derive(Debug, Error)]
pub enum LdaError {
    #[error("LDA needs a RawCount matrix, got {0}")]
    WrongWeighting(Weighting),
    #[error("count matrix has no tokens")]
    EmptyMatrix,
    #[error("entry ({doc}, {term}) is not a non-negative integer count")]
    NonIntegerCount { doc: usize, term: usize },
    #[error("invalid LDA config: {0}")]
    InvalidConfig(String),
    #[error("topic {topic} out of range for a {n_topics}-topic model")]
    TopicOutOfRange { topic: usize, n_topics: usize },
    #[error("Gibbs state inconsistent after sweep {sweep}: {message}")]
    Inconsistent { sweep: usize, message: String },
    #[error("term {0} never occurs in the reference documents")]
    UnseenTerm(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LdaConfig {
    pub n_topics: usize,
    /// Document-topic prior; `None` means `50 / n_topics`.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub n_iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// Verify the count invariants after every sweep.
    pub check_invariants: bool,
}

impl Default for LdaConfig {
    fn default() -> Self {
        LdaConfig {
            n_topics: 5,
            alpha: None,
            beta: 0.01,
            n_iterations: 1000,
            burn_in: 800,
            seed: 0,
            check_invariants: false,
        }
    }
}

impl LdaConfig {
    pub fn effective_alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.n_topics as f64)
    }

    pub fn validate(&self) -> Result<(), LdaError> {
        let bad = |m: String| Err(LdaError::InvalidConfig(m));
        if self.n_topics == 0 || self.n_topics > usize::from(u16::MAX) {
            return bad(format!("n_topics {} is out of range", self.n_topics));
        }
        let alpha = self.effective_alpha();
        if !(alpha > 0.0 && alpha.is_finite()) {
            return bad(format!("alpha must be positive, got {alpha}"));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be positive, got {}", self.beta));
        }
        if self.burn_in >= self.n_iterations {
            return bad(format!("burn_in ({}) must be below n_iterations ({})", self.burn_in, self.n_iterations));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdaModel {
    /// K x V topic-word distributions.
    pub phi: Vec<Vec<f64>>,
    /// D x K document-topic distributions, rows in matrix order.
    pub theta: Vec<Vec<f64>>,
    pub config: LdaConfig,
    pub terms: Vec<String>,
    pub doc_ids: Vec<String>,
}

impl LdaModel {
    pub fn n_topics(&self) -> usize {
        self.phi.len()
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    /// Term indices of topic `k` by decreasing probability, ties broken by
    /// term.
    pub fn ranked_terms(&self, k: usize) -> Result<Vec<usize>, LdaError> {
        let row = self.phi.get(k).ok_or(LdaError::TopicOutOfRange { topic: k, n_topics: self.n_topics() })?;
        let mut idx: Vec<usize> = (0..row.len()).collect();
        idx.sort_by(|&a, &b| {
            row[b].partial_cmp(&row[a]).unwrap_or(Ordering::Equal).then_with(|| self.terms[a].cmp(&self.terms[b]))
        });
        Ok(idx)
    }

    /// Plain-text export: a header line, then the phi and theta blocks.
    pub fn write_text(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(
            w,
            "K={} V={} alpha={} beta={} seed={}",
            self.n_topics(),
            self.n_terms(),
            self.config.effective_alpha(),
            self.config.beta,
            self.config.seed
        )?;
        writeln!(w, "phi")?;
        for row in &self.phi {
            writeln!(w, "{}", join_values(row))?;
        }
        writeln!(w, "theta")?;
        for row in &self.theta {
            writeln!(w, "{}", join_values(row))?;
        }
        Ok(())
    }
}

fn join_values(row: &[f64]) -> String {
    row.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicSummary {
    pub topic_index: usize,
    pub top_words: Vec<(String, f64)>,
}

impl TopicSummary {
    /// `w1 | w2 | ...`
    pub fn render(&self) -> String {
        self.top_words.iter().map(|(w, _)| w.as_str()).collect::<Vec<_>>().join(" | ")
    }
}

/// The `n` most probable terms of topic `k`; `n` is clamped to V.
pub fn top_words(model: &LdaModel, k: usize, n: usize) -> Result<TopicSummary, LdaError> {
    let ranked = model.ranked_terms(k)?;
    let top_words = ranked.into_iter().take(n).map(|t| (model.terms[t].clone(), model.phi[k][t])).collect();
    Ok(TopicSummary { topic_index: k, top_words })
}

pub fn fit_lda(counts: &DocTermMatrix, cfg: &LdaConfig) -> Result<LdaModel, LdaError> {
    let mut sampler = GibbsSampler::new(counts, cfg)?;
    let n_samples = cfg.n_iterations - cfg.burn_in;
    for sweep in 0..cfg.n_iterations {
        sampler.sweep();
        if cfg.check_invariants {
            sampler.state().check_consistency().map_err(|message| LdaError::Inconsistent { sweep, message })?;
        }
        if sweep >= cfg.burn_in {
            sampler.accumulate();
        }
    }
    Ok(sampler.posterior_mean(n_samples, counts))
}
