//! Planted-structure corpus generator.
//!
//! Each dialogue draws a symptom set from its condition's vocabulary, then
//! every co-occurrence pair `(a, b, p)` is enforced on dialogues that contain
//! `a`: `b` is present with probability `p` and absent otherwise. User turns
//! mention the chosen symptoms through fixed sentence templates; bot turns
//! follow a fixed interview script that contains no symptom phrases.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError, Dialogue, Speaker, Turn};
use crate::seed;

const USER_TEMPLATES: &[&str] = &[
    "I have {}.",
    "I've been dealing with {} for a while.",
    "There is also {}.",
    "Yes, I also have {}.",
    "No, but I have {}.",
    "My main problem is {}.",
];

const BOT_TEMPLATES: &[&str] = &[
    "I see. How long has that been going on?",
    "Thank you for telling me. Anything else?",
    "Okay. Do you have any other symptoms?",
    "Understood. Has it changed since it started?",
    "Please tell me more.",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoOccurrencePair {
    pub symptom_a: String,
    pub symptom_b: String,
    pub joint_probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisPlan {
    pub n_conditions: usize,
    pub dialogues_per_condition: usize,
    pub turns_per_dialogue: usize,
    pub condition_vocabularies: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub co_occurrence_pairs: Vec<CoOccurrencePair>,
    pub seed: u64,
    /// Distinct symptoms drawn per dialogue before pair enforcement.
    #[serde(default = "default_symptoms_per_dialogue")]
    pub symptoms_per_dialogue: usize,
}

fn default_symptoms_per_dialogue() -> usize {
    3
}

impl SynthesisPlan {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let invalid = |msg: String| Err(CorpusError::InvalidPlan(msg));
        if self.condition_vocabularies.is_empty() {
            return invalid("no conditions".into());
        }
        if self.n_conditions != self.condition_vocabularies.len() {
            return invalid(format!(
                "n_conditions is {} but {} vocabularies are given",
                self.n_conditions,
                self.condition_vocabularies.len()
            ));
        }
        if self.dialogues_per_condition == 0 || self.turns_per_dialogue == 0 {
            return invalid("dialogues_per_condition and turns_per_dialogue must be positive".into());
        }
        if self.symptoms_per_dialogue == 0 {
            return invalid("symptoms_per_dialogue must be positive".into());
        }
        for (condition, vocab) in &self.condition_vocabularies {
            if condition.trim().is_empty() {
                return invalid("blank condition name".into());
            }
            if vocab.is_empty() || vocab.iter().any(|w| w.trim().is_empty()) {
                return invalid(format!("vocabulary of `{condition}` is empty or has blank entries"));
            }
        }
        for pair in &self.co_occurrence_pairs {
            if !(0.0..=1.0).contains(&pair.joint_probability) {
                return invalid(format!(
                    "joint_probability {} for ({}, {}) is outside [0, 1]",
                    pair.joint_probability, pair.symptom_a, pair.symptom_b
                ));
            }
        }
        Ok(())
    }
}

/// The plan behind the bundled 960-dialogue corpus: 24 conditions grouped
/// into five body-system families, 40 dialogues each, 15 turns per dialogue,
/// and a planted fever/headache co-occurrence at 0.9.
pub fn bundled_plan() -> SynthesisPlan {
    serde_json::from_str(include_str!("../../data/bundled_plan.json")).expect("bundled plan parses")
}

fn slug(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '-' }).collect()
}

pub fn synthesize_corpus(plan: &SynthesisPlan) -> Result<Corpus, CorpusError> {
    plan.validate()?;
    let mut dialogues = Vec::with_capacity(plan.condition_vocabularies.len() * plan.dialogues_per_condition);
    for (condition, vocab) in &plan.condition_vocabularies {
        for j in 0..plan.dialogues_per_condition {
            let id = format!("{}-{j:04}", slug(condition));
            let mut rng = seed::rng(seed::derive(plan.seed, &id));

            let n = plan.symptoms_per_dialogue.min(vocab.len());
            let mut symptoms: Vec<String> =
                index::sample(&mut rng, vocab.len(), n).into_iter().map(|i| vocab[i].clone()).collect();
            for pair in &plan.co_occurrence_pairs {
                if !symptoms.contains(&pair.symptom_a) {
                    continue;
                }
                if rng.gen_bool(pair.joint_probability) {
                    if !symptoms.contains(&pair.symptom_b) {
                        symptoms.push(pair.symptom_b.clone());
                    }
                } else {
                    symptoms.retain(|s| s != &pair.symptom_b);
                }
            }

            let n_user = plan.turns_per_dialogue.div_ceil(2);
            let mut turns = Vec::with_capacity(plan.turns_per_dialogue);
            for t in 0..plan.turns_per_dialogue {
                if t % 2 == 0 {
                    let u = t / 2;
                    let mentioned: Vec<&str> = if symptoms.len() >= n_user {
                        symptoms.iter().skip(u).step_by(n_user).map(String::as_str).collect()
                    } else {
                        vec![symptoms[u % symptoms.len()].as_str()]
                    };
                    let phrase = mentioned.join(" and ");
                    let template =
                        if u == 0 { USER_TEMPLATES[0] } else { USER_TEMPLATES[rng.gen_range(0..USER_TEMPLATES.len())] };
                    turns.push(Turn::new(Speaker::User, template.replace("{}", &phrase)));
                } else {
                    let template = BOT_TEMPLATES[(t / 2) % BOT_TEMPLATES.len()];
                    turns.push(Turn::new(Speaker::Bot, template));
                }
            }
            dialogues.push(Dialogue::new(id, condition.clone(), turns)?);
        }
    }
    let names: BTreeSet<String> = plan.condition_vocabularies.keys().cloned().collect();
    Corpus::new(dialogues, names)
}
