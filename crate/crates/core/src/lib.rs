//! Symptom knowledge mining for patient-chatbot dialogue corpora.
//!
//! The pipeline runs in stages, each in its own module:
//!
//! * [`corpus`]: dialogue data model, JSONL/CSV ingestion, statistics and a
//!   synthetic generator with planted structure.
//! * [`preprocess`]: role markers, normalization, stop words, lemmatization.
//! * [`vectorize`]: vocabulary, raw-count and TF-IDF document-term matrices.
//! * [`topics`]: LDA by collapsed Gibbs sampling and UMass coherence.
//! * [`cluster`]: k-means++ / Lloyd clustering and exact silhouette.
//! * [`ner`]: gazetteer symptom extraction with longest-match scanning.
//! * [`assoc`]: Apriori frequent itemsets and association rules.
//! * [`report`]: assembly and rendering of the analysis report.
//! * [`pipeline`]: configuration and end-to-end orchestration.

pub mod assoc;
pub mod cluster;
pub mod corpus;
pub mod ner;
pub mod pipeline;
pub mod preprocess;
pub mod report;
pub mod seed;
pub mod topics;
pub mod vectorize;
