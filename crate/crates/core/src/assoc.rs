//! Apriori frequent-itemset mining and association rules.
//!
//! Supports are kept as integer transaction counts; every reported ratio is
//! a single division of integers, so rule metrics satisfy their defining
//! identities exactly when checked in rational arithmetic.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest item universe the exhaustive oracle accepts.
pub const BRUTE_FORCE_MAX_ITEMS: usize = 20;

#[derive(Debug, Error)]
pub enum MiningError {
    #[error("invalid mining config: {0}")]
    InvalidConfig(String),
    #[error("empty transaction set")]
    NoTransactions,
    #[error("item universe has {0} items; exhaustive enumeration supports at most {BRUTE_FORCE_MAX_ITEMS}")]
    UniverseTooLarge(usize),
}

pub fn default_marker_filter() -> BTreeSet<String> {
    ["bot", "user", "yes", "no"].iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MiningConfig {
    pub min_support: f64,
    pub min_confidence: f64,
    pub max_itemset_size: usize,
    pub marker_filter: BTreeSet<String>,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig {
            min_support: 0.05,
            min_confidence: 0.5,
            max_itemset_size: 4,
            marker_filter: default_marker_filter(),
        }
    }
}

impl MiningConfig {
    pub fn validate(&self) -> Result<(), MiningError> {
        let unit = |x: f64| x > 0.0 && x <= 1.0;
        if !unit(self.min_support) {
            return Err(MiningError::InvalidConfig(format!("min_support {} is outside (0, 1]", self.min_support)));
        }
        if !unit(self.min_confidence) {
            return Err(MiningError::InvalidConfig(format!(
                "min_confidence {} is outside (0, 1]",
                self.min_confidence
            )));
        }
        if self.max_itemset_size == 0 {
            return Err(MiningError::InvalidConfig("max_itemset_size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransactionSet {
    pub transactions: Vec<(String, BTreeSet<String>)>,
    pub item_universe: BTreeSet<String>,
}

impl TransactionSet {
    pub fn new(transactions: Vec<(String, BTreeSet<String>)>) -> Self {
        let item_universe = transactions.iter().flat_map(|(_, t)| t.iter().cloned()).collect();
        TransactionSet { transactions, item_universe }
    }

    pub fn len(&self) -> usize {
        self.transactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transactions.is_empty()
    }

    /// Transactions containing every item of `items`.
    pub fn count(&self, items: &[String]) -> usize {
        self.transactions.iter().filter(|(_, t)| items.iter().all(|i| t.contains(i))).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequentItemset {
    /// Sorted, distinct.
    pub items: Vec<String>,
    pub count: usize,
    pub support: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationRule {
    pub antecedent: Vec<String>,
    pub consequent: Vec<String>,
    pub support: f64,
    pub confidence: f64,
    pub lift: f64,
    /// Transactions containing antecedent and consequent.
    pub joint_count: usize,
    pub antecedent_count: usize,
    pub consequent_count: usize,
    pub n_transactions: usize,
}

/// Removes filtered markers; empty transactions stay in the set.
pub fn build_transactions(profiles: &BTreeMap<String, BTreeSet<String>>, cfg: &MiningConfig) -> TransactionSet {
    let transactions = profiles
        .iter()
        .map(|(id, items)| (id.clone(), items.iter().filter(|i| !cfg.marker_filter.contains(*i)).cloned().collect()))
        .collect();
    TransactionSet::new(transactions)
}

fn is_frequent(count: usize, n: usize, min_support: f64) -> bool {
    count > 0 && count as f64 / n as f64 >= min_support
}

/// Item-index view of a transaction set; indices follow item order.
struct Encoded {
    items: Vec<String>,
    rows: Vec<Vec<u32>>,
}

fn encode(ts: &TransactionSet) -> Encoded {
    let items: Vec<String> = ts.item_universe.iter().cloned().collect();
    let index: HashMap<&str, u32> = items.iter().enumerate().map(|(i, s)| (s.as_str(), i as u32)).collect();
    let rows = ts
        .transactions
        .iter()
        .map(|(_, t)| {
            let mut row: Vec<u32> = t.iter().filter_map(|i| index.get(i.as_str()).copied()).collect();
            row.sort_unstable();
            row
        })
        .collect();
    Encoded { items, rows }
}

fn contains_sorted(haystack: &[u32], needle: &[u32]) -> bool {
    let mut h = haystack.iter();
    needle.iter().all(|n| h.any(|x| x == n))
}

fn count_in(rows: &[Vec<u32>], set: &[u32]) -> usize {
    rows.iter().filter(|r| contains_sorted(r, set)).count()
}

fn decode(enc: &Encoded, found: Vec<(Vec<u32>, usize)>, n: usize) -> Vec<FrequentItemset> {
    let mut out: Vec<FrequentItemset> = found
        .into_iter()
        .map(|(set, count)| FrequentItemset {
            items: set.iter().map(|&i| enc.items[i as usize].clone()).collect(),
            count,
            support: count as f64 / n as f64,
        })
        .collect();
    out.sort_by(|a, b| a.items.len().cmp(&b.items.len()).then_with(|| a.items.cmp(&b.items)));
    out
}

/// Level-wise Apriori: join frequent (k-1)-itemsets sharing a (k-2)-prefix,
/// prune candidates with an infrequent subset, count survivors in one pass.
pub fn apriori(ts: &TransactionSet, cfg: &MiningConfig) -> Result<Vec<FrequentItemset>, MiningError> {
    cfg.validate()?;
    if ts.is_empty() {
        return Err(MiningError::NoTransactions);
    }
    let n = ts.len();
    let enc = encode(ts);
    let mut item_counts = vec![0usize; enc.items.len()];
    for row in &enc.rows {
        for &i in row {
            item_counts[i as usize] += 1;
        }
    }
    let mut level: Vec<(Vec<u32>, usize)> = item_counts
        .iter()
        .enumerate()
        .filter(|&(_, &c)| is_frequent(c, n, cfg.min_support))
        .map(|(i, &c)| (vec![i as u32], c))
        .collect();
    let mut found = level.clone();

    for size in 2..=cfg.max_itemset_size {
        if level.len() < 2 {
            break;
        }
        let previous: HashSet<&[u32]> = level.iter().map(|(s, _)| s.as_slice()).collect();
        let mut candidates = Vec::new();
        for (a_idx, (a, _)) in level.iter().enumerate() {
            for (b, _) in &level[a_idx + 1..] {
                if a[..size - 2] != b[..size - 2] {
                    // level is sorted, so no later b shares the prefix
                    break;
                }
                let mut cand = a.clone();
                cand.push(b[size - 2]);
                let all_subsets_frequent = (0..size).all(|drop| {
                    let sub: Vec<u32> = cand.iter().enumerate().filter(|&(i, _)| i != drop).map(|(_, &x)| x).collect();
                    previous.contains(sub.as_slice())
                });
                if all_subsets_frequent {
                    candidates.push(cand);
                }
            }
        }
        level = candidates
            .into_par_iter()
            .map(|c| {
                let count = count_in(&enc.rows, &c);
                (c, count)
            })
            .filter(|&(_, count)| is_frequent(count, n, cfg.min_support))
            .collect();
        found.extend(level.iter().cloned());
    }
    Ok(decode(&enc, found, n))
}

/// Exhaustive oracle: counts every subset of the item universe up to
/// `max_itemset_size` directly.
pub fn brute_force_frequent(ts: &TransactionSet, cfg: &MiningConfig) -> Result<Vec<FrequentItemset>, MiningError> {
    cfg.validate()?;
    if ts.is_empty() {
        return Err(MiningError::NoTransactions);
    }
    let universe = ts.item_universe.len();
    if universe > BRUTE_FORCE_MAX_ITEMS {
        return Err(MiningError::UniverseTooLarge(universe));
    }
    let n = ts.len();
    let enc = encode(ts);
    let mut found = Vec::new();
    for mask in 1u32..(1u32 << universe) {
        if mask.count_ones() as usize > cfg.max_itemset_size {
            continue;
        }
        let set: Vec<u32> = (0..universe as u32).filter(|b| mask & (1 << b) != 0).collect();
        let count = enc.rows.iter().filter(|r| set.iter().all(|i| r.contains(i))).count();
        if is_frequent(count, n, cfg.min_support) {
            found.push((set, count));
        }
    }
    Ok(decode(&enc, found, n))
}

fn compare_rules(a: &AssociationRule, b: &AssociationRule) -> Ordering {
    // confidence descending, compared exactly: a.j/a.a vs b.j/b.a
    let lhs = a.joint_count as u128 * b.antecedent_count as u128;
    let rhs = b.joint_count as u128 * a.antecedent_count as u128;
    rhs.cmp(&lhs)
        .then_with(|| b.joint_count.cmp(&a.joint_count))
        .then_with(|| a.antecedent.cmp(&b.antecedent))
        .then_with(|| a.consequent.cmp(&b.consequent))
}

/// Every split `A -> C` of every frequent itemset of size >= 2 whose
/// confidence reaches `min_confidence`.
pub fn generate_rules(frequents: &[FrequentItemset], ts: &TransactionSet, cfg: &MiningConfig) -> Vec<AssociationRule> {
    let n = ts.len();
    let counts: HashMap<&[String], usize> = frequents.iter().map(|f| (f.items.as_slice(), f.count)).collect();
    let lookup = |items: &[String]| counts.get(items).copied().unwrap_or_else(|| ts.count(items));

    let mut rules = Vec::new();
    for f in frequents.iter().filter(|f| f.items.len() >= 2) {
        let size = f.items.len();
        for mask in 1u32..(1u32 << size) - 1 {
            let (antecedent, consequent): (Vec<String>, Vec<String>) = {
                let mut a = Vec::new();
                let mut c = Vec::new();
                for (i, item) in f.items.iter().enumerate() {
                    if mask & (1 << i) != 0 {
                        a.push(item.clone())
                    } else {
                        c.push(item.clone())
                    }
                }
                (a, c)
            };
            let a_count = lookup(&antecedent);
            let c_count = lookup(&consequent);
            let confidence = f.count as f64 / a_count as f64;
            if confidence < cfg.min_confidence {
                continue;
            }
            let lift = (f.count as u128 * n as u128) as f64 / (a_count as u128 * c_count as u128) as f64;
            rules.push(AssociationRule {
                antecedent,
                consequent,
                support: f.count as f64 / n as f64,
                confidence,
                lift,
                joint_count: f.count,
                antecedent_count: a_count,
                consequent_count: c_count,
                n_transactions: n,
            });
        }
    }
    rules.sort_by(compare_rules);
    rules
}

/// CSV `antecedents,consequents,support,confidence,lift`; items are
/// `;`-joined and metrics carry six decimals.
pub fn write_rules_csv<'a>(
    rules: impl IntoIterator<Item = &'a AssociationRule>,
    w: impl Write,
) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["antecedents", "consequents", "support", "confidence", "lift"])?;
    for r in rules {
        wtr.write_record([
            r.antecedent.join(";"),
            r.consequent.join(";"),
            format!("{:.6}", r.support),
            format!("{:.6}", r.confidence),
            format!("{:.6}", r.lift),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
