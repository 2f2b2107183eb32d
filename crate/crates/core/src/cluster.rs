//! K-Means (k-means++ seeding, Lloyd iterations, best of several restarts)
//! and exact silhouette scoring under Euclidean distance.

use std::collections::HashSet;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;
use crate::vectorize::DocTermMatrix;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("invalid k-means config: {0}")]
    InvalidConfig(String),
    #[error("k = {k} exceeds the number of points ({n})")]
    KTooLarge { k: usize, n: usize },
    #[error("only {distinct} distinct points for k = {k}")]
    TooFewDistinct { k: usize, distinct: usize },
    #[error("points have inconsistent dimensions")]
    DimensionMismatch,
    #[error("{labels} labels for {points} points")]
    LabelCountMismatch { labels: usize, points: usize },
    #[error("silhouette needs at least two non-empty clusters")]
    SingleCluster,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansConfig {
    pub k: usize,
    pub n_init: usize,
    pub max_iter: usize,
    /// Threshold on the summed squared centroid shift.
    pub tol: f64,
    pub seed: u64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig { k: 5, n_init: 10, max_iter: 300, tol: 1e-6, seed: 0 }
    }
}

impl KMeansConfig {
    pub fn validate(&self) -> Result<(), ClusterError> {
        let bad = |m: &str| Err(ClusterError::InvalidConfig(m.to_string()));
        if self.k < 2 {
            return bad("k must be at least 2");
        }
        if self.n_init == 0 {
            return bad("n_init must be at least 1");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1");
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return bad("tol must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub inertia: f64,
    /// Inertia after every assignment step of the winning restart.
    pub inertia_history: Vec<f64>,
}

impl KMeansModel {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.centroids.len()];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_points(points: &[Vec<f64>]) -> Result<usize, ClusterError> {
    let dim = points.first().map_or(0, Vec::len);
    if points.iter().any(|p| p.len() != dim) {
        return Err(ClusterError::DimensionMismatch);
    }
    Ok(dim)
}

fn distinct_count(points: &[Vec<f64>]) -> usize {
    // +0.0 and -0.0 are the same point
    let key = |p: &Vec<f64>| p.iter().map(|x| (x + 0.0).to_bits()).collect::<Vec<u64>>();
    points.iter().map(key).collect::<HashSet<_>>().len()
}

/// Nearest centroid (lowest index on ties) and squared distance per point.
fn assign(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> (Vec<usize>, Vec<f64>) {
    points
        .par_iter()
        .map(|p| {
            let mut best = (0, f64::INFINITY);
            for (j, c) in centroids.iter().enumerate() {
                let d = squared_distance(p, c);
                if d < best.1 {
                    best = (j, d);
                }
            }
            best
        })
        .unzip()
}

fn plus_plus_init(points: &[Vec<f64>], k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids = vec![points[rng.gen_range(0..n)].clone()];
    let mut nearest: Vec<f64> = points.iter().map(|p| squared_distance(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = nearest.iter().sum();
        let u = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, &d) in nearest.iter().enumerate() {
            if d <= 0.0 {
                continue;
            }
            acc += d;
            pick = Some(i);
            if u < acc {
                break;
            }
        }
        let pick = pick.expect("a point at positive distance exists while distinct points remain");
        let c = points[pick].clone();
        for (d, p) in nearest.iter_mut().zip(points) {
            *d = d.min(squared_distance(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

fn update(points: &[Vec<f64>], labels: &[usize], dists: &[f64], k: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &l) in points.iter().zip(labels) {
        counts[l] += 1;
        for (s, x) in sums[l].iter_mut().zip(p) {
            *s += x;
        }
    }
    let mut used = HashSet::new();
    for j in 0..k {
        if counts[j] > 0 {
            let n = counts[j] as f64;
            sums[j].iter_mut().for_each(|s| *s /= n);
            continue;
        }
        // empty cluster: move it onto the point farthest from its centroid
        let far = (0..points.len())
            .filter(|i| !used.contains(i))
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if dists[b] >= dists[i] => Some(b),
                _ => Some(i),
            })
            .expect("k <= n");
        used.insert(far);
        sums[j] = points[far].clone();
    }
    sums
}

fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>, cfg: &KMeansConfig, dim: usize) -> KMeansModel {
    let mut history = Vec::new();
    let mut labels: Option<Vec<usize>> = None;
    let mut iterations = 0;
    let mut last_pass = false;
    loop {
        let (new_labels, dists) = assign(points, &centroids);
        history.push(dists.iter().sum::<f64>());
        let stable = labels.as_ref() == Some(&new_labels);
        labels = Some(new_labels);
        if stable || last_pass || iterations == cfg.max_iter {
            break;
        }
        iterations += 1;
        let updated = update(points, labels.as_ref().unwrap(), &dists, cfg.k, dim);
        let shift: f64 = updated.iter().zip(&centroids).map(|(a, b)| squared_distance(a, b)).sum();
        centroids = updated;
        last_pass = shift < cfg.tol;
    }
    KMeansModel { centroids, assignments: labels.unwrap(), inertia: *history.last().unwrap(), inertia_history: history }
}

/// Clusters dense points. Restarts run independently (possibly in
/// parallel); the lowest inertia wins, earliest restart on ties.
pub fn fit_kmeans_points(points: &[Vec<f64>], cfg: &KMeansConfig) -> Result<KMeansModel, ClusterError> {
    cfg.validate()?;
    let dim = check_points(points)?;
    if cfg.k > points.len() {
        return Err(ClusterError::KTooLarge { k: cfg.k, n: points.len() });
    }
    let distinct = distinct_count(points);
    if distinct < cfg.k {
        return Err(ClusterError::TooFewDistinct { k: cfg.k, distinct });
    }
    let runs: Vec<KMeansModel> = (0..cfg.n_init)
        .into_par_iter()
        .map(|r| {
            let mut rng = seed::rng(seed::derive_index(cfg.seed, r as u64));
            let init = plus_plus_init(points, cfg.k, &mut rng);
            lloyd(points, init, cfg, dim)
        })
        .collect();
    let best =
        runs.into_iter().reduce(|best, run| if run.inertia < best.inertia { run } else { best }).expect("n_init >= 1");
    Ok(best)
}

pub fn fit_kmeans(m: &DocTermMatrix, cfg: &KMeansConfig) -> Result<KMeansModel, ClusterError> {
    fit_kmeans_points(&m.to_dense(), cfg)
}

/// Centroids as a sparse matrix over the columns of `m`, rows named
/// `centroid-<k>`, for export with [`DocTermMatrix::write_triplets`].
pub fn centroid_matrix(model: &KMeansModel, m: &DocTermMatrix) -> DocTermMatrix {
    DocTermMatrix {
        n_docs: model.centroids.len(),
        n_terms: m.n_terms,
        rows: model
            .centroids
            .iter()
            .map(|c| c.iter().enumerate().filter(|&(_, &x)| x != 0.0).map(|(t, &x)| (t, x)).collect())
            .collect(),
        weighting: m.weighting,
        doc_ids: (0..model.centroids.len()).map(|k| format!("centroid-{k}")).collect(),
        terms: m.terms.clone(),
    }
}

/// Exact O(n^2) silhouette. Points in singleton clusters score 0, as do
/// points whose `a` and `b` are both 0.
pub fn silhouette_points(points: &[Vec<f64>], labels: &[usize]) -> Result<f64, ClusterError> {
    check_points(points)?;
    if labels.len() != points.len() {
        return Err(ClusterError::LabelCountMismatch { labels: labels.len(), points: points.len() });
    }
    let n_clusters = labels.iter().max().map_or(0, |&m| m + 1);
    let mut sizes = vec![0usize; n_clusters];
    for &l in labels {
        sizes[l] += 1;
    }
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(ClusterError::SingleCluster);
    }
    let scores: Vec<f64> = (0..points.len())
        .into_par_iter()
        .map(|i| {
            let own = labels[i];
            if sizes[own] == 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; n_clusters];
            for (j, q) in points.iter().enumerate() {
                if j != i {
                    sums[labels[j]] += squared_distance(&points[i], q).sqrt();
                }
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..n_clusters)
                .filter(|&c| c != own && sizes[c] > 0)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom == 0.0 {
                0.0
            } else {
                (b - a) / denom
            }
        })
        .collect();
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

pub fn silhouette_score(m: &DocTermMatrix, assignments: &[usize]) -> Result<f64, ClusterError> {
    silhouette_points(&m.to_dense(), assignments)
}
