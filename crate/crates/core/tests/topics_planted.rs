//! Planted two-topic corpus: recovery, coherence against shuffled lists,
//! and coherence stability under corpus duplication.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use symptomine::preprocess::TokenizedDoc;
use symptomine::topics::{fit_lda, top_words, umass_coherence, umass_for_lists, LdaConfig};
use symptomine::vectorize::{count_matrix, fit_vocabulary, DocTermMatrix, TfidfConfig};

const DOC_LEN: usize = 80;
const OWN_SHARE: f64 = 0.9;

fn planted_docs(seed: u64) -> Vec<TokenizedDoc> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..40)
        .map(|d| {
            let own = if d < 20 { 'a' } else { 'b' };
            let other = if own == 'a' { 'b' } else { 'a' };
            let tokens = (0..DOC_LEN)
                .map(|_| {
                    let vocab = if rng.gen_bool(OWN_SHARE) { own } else { other };
                    format!("{vocab}{}", rng.gen_range(0..10))
                })
                .collect();
            TokenizedDoc { dialogue_id: format!("doc-{d:02}"), tokens, disease_label: own.to_string() }
        })
        .collect()
}

fn counts(docs: &[TokenizedDoc]) -> DocTermMatrix {
    let permissive = TfidfConfig { min_df: 1, max_df_ratio: 1.0, ..TfidfConfig::default() };
    count_matrix(docs, &fit_vocabulary(docs, &permissive).unwrap())
}

fn config(seed: u64) -> LdaConfig {
    LdaConfig { n_topics: 2, n_iterations: 300, burn_in: 200, seed, check_invariants: true, ..LdaConfig::default() }
}

/// Largest share of a topic's top-10 drawn from one planted vocabulary.
fn purity(words: &[(String, f64)]) -> usize {
    let a = words.iter().filter(|(w, _)| w.starts_with('a')).count();
    a.max(words.len() - a)
}

#[test]
fn planted_topics_recovered_for_ten_seeds() {
    for seed in 0..10 {
        let m = counts(&planted_docs(seed));
        let model = fit_lda(&m, &config(seed)).unwrap();
        for k in 0..2 {
            let top = top_words(&model, k, 10).unwrap();
            assert!(purity(&top.top_words) >= 9, "seed {seed} topic {k}: {}", top.render());
        }
    }
}

#[test]
fn fitted_topics_beat_shuffled_lists() {
    for seed in 0..10 {
        let m = counts(&planted_docs(seed));
        let model = fit_lda(&m, &config(seed)).unwrap();
        let fitted = umass_coherence(&model, &m, 10).unwrap();
        let mut pool: Vec<usize> = (0..2).flat_map(|k| model.ranked_terms(k).unwrap().into_iter().take(10)).collect();
        pool.shuffle(&mut ChaCha8Rng::seed_from_u64(1000 + seed));
        let shuffled: Vec<Vec<usize>> = pool.chunks(10).map(<[usize]>::to_vec).collect();
        let null = umass_for_lists(&shuffled, &m).unwrap();
        assert!(fitted > null, "seed {seed}: fitted {fitted} vs shuffled {null}");
    }
}

#[test]
fn duplicated_corpus_keeps_coherence() {
    let docs = planted_docs(3);
    let m = counts(&docs);
    let model = fit_lda(&m, &config(3)).unwrap();
    let mut doubled = docs.clone();
    doubled.extend(docs.iter().map(|d| TokenizedDoc { dialogue_id: format!("{}-copy", d.dialogue_id), ..d.clone() }));
    let m2 = counts(&doubled);
    assert_eq!(m2.terms, m.terms);
    let once = umass_coherence(&model, &m, 10).unwrap();
    let twice = umass_coherence(&model, &m2, 10).unwrap();
    assert!((once - twice).abs() <= 0.02, "{once} vs {twice}");
}

#[test]
fn rows_sum_to_one_on_planted_fits() {
    let m = counts(&planted_docs(11));
    let model = fit_lda(&m, &LdaConfig { n_topics: 3, ..config(11) }).unwrap();
    for row in model.phi.iter().chain(&model.theta) {
        assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        assert!(row.iter().all(|&p| p > 0.0));
    }
}
