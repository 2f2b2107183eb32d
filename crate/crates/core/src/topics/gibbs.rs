use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{LdaConfig, LdaError, LdaModel};
use crate::seed;
use crate::vectorize::{DocTermMatrix, Weighting};

/// Collapsed-Gibbs sufficient statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsState {
    pub n_topics: usize,
    pub n_terms: usize,
    /// Term id of every token, per document.
    pub words: Vec<Vec<u32>>,
    /// Topic of every token, per document.
    pub z: Vec<Vec<u16>>,
    /// D x K, row-major.
    pub n_dk: Vec<u32>,
    /// V x K, term-major.
    pub n_kw: Vec<u32>,
    pub n_k: Vec<u32>,
}

impl GibbsState {
    pub fn doc_topic(&self, d: usize, k: usize) -> u32 {
        self.n_dk[d * self.n_topics + k]
    }

    pub fn topic_term(&self, k: usize, w: usize) -> u32 {
        self.n_kw[w * self.n_topics + k]
    }

    /// Recounts everything from `z` and compares against the stored tables.
    pub fn check_consistency(&self) -> Result<(), String> {
        let k = self.n_topics;
        let mut n_dk = vec![0u32; self.n_dk.len()];
        let mut n_kw = vec![0u32; self.n_kw.len()];
        let mut n_k = vec![0u32; k];
        for (d, (words, topics)) in self.words.iter().zip(&self.z).enumerate() {
            if words.len() != topics.len() {
                return Err(format!("doc {d}: {} tokens but {} assignments", words.len(), topics.len()));
            }
            for (&w, &t) in words.iter().zip(topics) {
                let t = usize::from(t);
                if t >= k {
                    return Err(format!("doc {d}: topic {t} out of range"));
                }
                n_dk[d * k + t] += 1;
                n_kw[w as usize * k + t] += 1;
                n_k[t] += 1;
            }
        }
        if n_dk != self.n_dk {
            return Err("doc-topic counts disagree with assignments".into());
        }
        if n_kw != self.n_kw {
            return Err("topic-term counts disagree with assignments".into());
        }
        if n_k != self.n_k {
            return Err("topic totals disagree with assignments".into());
        }
        for t in 0..k {
            let col: u64 = (0..self.n_terms).map(|w| u64::from(self.topic_term(t, w))).sum();
            if col != u64::from(self.n_k[t]) {
                return Err(format!("topic {t}: term counts sum to {col}, total is {}", self.n_k[t]));
            }
        }
        Ok(())
    }
}

/// Sequential collapsed Gibbs sampler.
///
/// Each document owns a random stream keyed by `(seed, doc id)` and
/// documents are swept in id order, so the chain does not depend on the row
/// order of the input matrix.
pub struct GibbsSampler {
    state: GibbsState,
    rngs: Vec<ChaCha8Rng>,
    order: Vec<usize>,
    alpha: f64,
    beta: f64,
    sum_dk: Vec<u64>,
    sum_kw: Vec<u64>,
    config: LdaConfig,
}

impl GibbsSampler {
    pub fn new(counts: &DocTermMatrix, cfg: &LdaConfig) -> Result<Self, LdaError> {
        cfg.validate()?;
        if counts.weighting != Weighting::RawCount {
            return Err(LdaError::WrongWeighting(counts.weighting));
        }
        let k = cfg.n_topics;
        let v = counts.n_terms;
        let mut words = Vec::with_capacity(counts.n_docs);
        for (d, row) in counts.rows.iter().enumerate() {
            let mut toks = Vec::new();
            for &(t, c) in row {
                if c < 0.0 || c.fract() != 0.0 || t >= v {
                    return Err(LdaError::NonIntegerCount { doc: d, term: t });
                }
                toks.extend(std::iter::repeat_n(t as u32, c as usize));
            }
            words.push(toks);
        }
        if words.iter().all(Vec::is_empty) {
            return Err(LdaError::EmptyMatrix);
        }

        let mut order: Vec<usize> = (0..words.len()).collect();
        order.sort_by(|&a, &b| counts.doc_ids[a].cmp(&counts.doc_ids[b]).then(a.cmp(&b)));
        let mut rngs: Vec<ChaCha8Rng> = counts.doc_ids.iter().map(|id| seed::rng(seed::derive(cfg.seed, id))).collect();

        let mut state = GibbsState {
            n_topics: k,
            n_terms: v,
            z: words.iter().map(|w| vec![0u16; w.len()]).collect(),
            words,
            n_dk: vec![0; counts.n_docs * k],
            n_kw: vec![0; v * k],
            n_k: vec![0; k],
        };
        for &d in &order {
            for i in 0..state.words[d].len() {
                let t = rngs[d].gen_range(0..k);
                let w = state.words[d][i] as usize;
                state.z[d][i] = t as u16;
                state.n_dk[d * k + t] += 1;
                state.n_kw[w * k + t] += 1;
                state.n_k[t] += 1;
            }
        }
        Ok(GibbsSampler {
            sum_dk: vec![0; state.n_dk.len()],
            sum_kw: vec![0; state.n_kw.len()],
            state,
            rngs,
            order,
            alpha: cfg.effective_alpha(),
            beta: cfg.beta,
            config: cfg.clone(),
        })
    }

    pub fn state(&self) -> &GibbsState {
        &self.state
    }

    /// Resamples every token once.
    pub fn sweep(&mut self) {
        let k = self.state.n_topics;
        let v_beta = self.state.n_terms as f64 * self.beta;
        let mut probs = vec![0.0f64; k];
        let GibbsState { words, z, n_dk, n_kw, n_k, .. } = &mut self.state;
        for &d in &self.order {
            let rng = &mut self.rngs[d];
            let doc_counts = &mut n_dk[d * k..(d + 1) * k];
            for (i, &w) in words[d].iter().enumerate() {
                let w = w as usize;
                let word_counts = &mut n_kw[w * k..(w + 1) * k];
                let old = usize::from(z[d][i]);
                doc_counts[old] -= 1;
                word_counts[old] -= 1;
                n_k[old] -= 1;

                let mut total = 0.0;
                for t in 0..k {
                    total += (f64::from(doc_counts[t]) + self.alpha) * (f64::from(word_counts[t]) + self.beta)
                        / (f64::from(n_k[t]) + v_beta);
                    probs[t] = total;
                }
                let u = rng.gen::<f64>() * total;
                let new = probs.iter().position(|&c| u < c).unwrap_or(k - 1);

                z[d][i] = new as u16;
                doc_counts[new] += 1;
                word_counts[new] += 1;
                n_k[new] += 1;
            }
        }
    }

    /// Adds the current counts to the posterior-mean accumulators.
    pub fn accumulate(&mut self) {
        for (s, &c) in self.sum_dk.iter_mut().zip(&self.state.n_dk) {
            *s += u64::from(c);
        }
        for (s, &c) in self.sum_kw.iter_mut().zip(&self.state.n_kw) {
            *s += u64::from(c);
        }
    }

    /// Posterior-mean phi and theta from `n_samples` accumulated sweeps.
    pub(super) fn posterior_mean(&self, n_samples: usize, counts: &DocTermMatrix) -> LdaModel {
        let k = self.state.n_topics;
        let v = self.state.n_terms;
        let ns = n_samples as f64;
        let v_beta = v as f64 * self.beta;
        let k_alpha = k as f64 * self.alpha;

        let phi = (0..k)
            .map(|t| {
                let total: u64 = (0..v).map(|w| self.sum_kw[w * k + t]).sum();
                let denom = total as f64 / ns + v_beta;
                (0..v).map(|w| (self.sum_kw[w * k + t] as f64 / ns + self.beta) / denom).collect()
            })
            .collect();
        let theta = self
            .state
            .words
            .iter()
            .enumerate()
            .map(|(d, toks)| {
                let denom = toks.len() as f64 + k_alpha;
                (0..k).map(|t| (self.sum_dk[d * k + t] as f64 / ns + self.alpha) / denom).collect()
            })
            .collect();
        LdaModel {
            phi,
            theta,
            config: self.config.clone(),
            terms: counts.terms.clone(),
            doc_ids: counts.doc_ids.clone(),
        }
    }
}
