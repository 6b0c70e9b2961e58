//! k-means with k-means++ seeding, silhouette analysis and k selection.
//!
//! Distances are Euclidean. Assignment ties go to the lowest cluster
//! index and all randomness comes from the explicit seed, so a fit is a
//! pure function of (data order, parameters).

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::derive;

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("no data points")]
    Empty,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("k = {k} exceeds the number of points ({n})")]
    TooFewPoints { k: usize, n: usize },
    #[error("point {index} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("silhouette needs at least two non-empty clusters")]
    UndefinedSilhouette,
    #[error("assignment vector has {found} entries for {expected} points")]
    AssignmentLength { expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansParams {
    pub k: usize,
    pub seed: u64,
    pub n_restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl KMeansParams {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            seed,
            n_restarts: 10,
            max_iter: 300,
            tol: 1e-6,
        }
    }
}

/// One Lloyd run from one seeding.
#[derive(Debug, Clone, PartialEq)]
pub struct LloydRun {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub sse: f64,
    pub iterations: usize,
    /// SSE after every assignment step, then the SSE of the final model.
    pub sse_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub dim: usize,
    pub seed: u64,
    pub n_restarts: usize,
    pub iterations: usize,
    pub sse: f64,
    pub centroids: Vec<Vec<f64>>,
    #[serde(skip)]
    pub assignments: Vec<usize>,
    #[serde(skip)]
    pub sse_history: Vec<f64>,
}

#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check(data: &[Vec<f64>], k: usize) -> Result<usize, ClusterError> {
    if data.is_empty() {
        return Err(ClusterError::Empty);
    }
    if k == 0 {
        return Err(ClusterError::ZeroK);
    }
    if k > data.len() {
        return Err(ClusterError::TooFewPoints { k, n: data.len() });
    }
    let dim = data[0].len();
    if let Some((index, p)) = data.iter().enumerate().find(|(_, p)| p.len() != dim) {
        return Err(ClusterError::DimensionMismatch {
            index,
            expected: dim,
            found: p.len(),
        });
    }
    Ok(dim)
}

fn seed_plus_plus(data: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = data.len();
    let mut centroids = vec![data[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = data.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, d) in d2.iter().enumerate() {
                acc += d;
                if acc > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = data[pick].clone();
        for (d, p) in d2.iter_mut().zip(data) {
            *d = d.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Lloyd iterations from a k-means++ seeding drawn with `seed`.
///
/// An empty cluster is repaired by moving the point farthest from its
/// centroid (taken from a cluster with more than one member) into it.
pub fn lloyd(
    data: &[Vec<f64>],
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<LloydRun, ClusterError> {
    let dim = check(data, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_plus_plus(data, k, &mut rng);
    let mut assignments = vec![0usize; data.len()];
    let mut history = Vec::new();
    let mut iterations = 0;
    for _ in 0..max_iter.max(1) {
        iterations += 1;
        let nearest_all: Vec<(usize, f64)> =
            data.par_iter().map(|p| nearest(p, &centroids)).collect();
        let mut d2: Vec<f64> = Vec::with_capacity(data.len());
        for (i, (j, d)) in nearest_all.into_iter().enumerate() {
            assignments[i] = j;
            d2.push(d);
        }
        let mut counts = vec![0usize; k];
        for &a in &assignments {
            counts[a] += 1;
        }
        for j in 0..k {
            if counts[j] > 0 {
                continue;
            }
            let mut far: Option<usize> = None;
            for i in 0..data.len() {
                if counts[assignments[i]] > 1 && far.is_none_or(|f| d2[i] > d2[f]) {
                    far = Some(i);
                }
            }
            let i = far.expect("k <= n leaves a cluster with spare points");
            counts[assignments[i]] -= 1;
            assignments[i] = j;
            counts[j] = 1;
            d2[i] = 0.0;
            centroids[j] = data[i].clone();
        }
        history.push(d2.iter().sum());

        let mut sums = vec![vec![0.0f64; dim]; k];
        for (p, &a) in data.iter().zip(&assignments) {
            for (s, v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        let mut shift = 0.0f64;
        for (j, s) in sums.into_iter().enumerate() {
            let n = counts[j] as f64;
            let c: Vec<f64> = s.into_iter().map(|v| v / n).collect();
            shift = shift.max(sq_dist(&c, &centroids[j]).sqrt());
            centroids[j] = c;
        }
        if shift < tol {
            break;
        }
    }
    let sse: f64 = data
        .iter()
        .zip(&assignments)
        .map(|(p, &a)| sq_dist(p, &centroids[a]))
        .sum();
    history.push(sse);
    Ok(LloydRun {
        centroids,
        assignments,
        sse,
        iterations,
        sse_history: history,
    })
}

/// Best-of-`n_restarts` Lloyd fit; restart `r` uses a sub-seed derived
/// from `params.seed`.
pub fn kmeans(data: &[Vec<f64>], params: &KMeansParams) -> Result<ClusterModel, ClusterError> {
    let dim = check(data, params.k)?;
    let runs = (0..params.n_restarts.max(1))
        .into_par_iter()
        .map(|r| {
            lloyd(
                data,
                params.k,
                derive(params.seed, &format!("restart-{r}")),
                params.max_iter,
                params.tol,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let best = runs
        .into_iter()
        .reduce(|a, b| if b.sse < a.sse { b } else { a })
        .expect("at least one restart");
    Ok(ClusterModel {
        k: params.k,
        dim,
        seed: params.seed,
        n_restarts: params.n_restarts.max(1),
        iterations: best.iterations,
        sse: best.sse,
        centroids: best.centroids,
        assignments: best.assignments,
        sse_history: best.sse_history,
    })
}

/// Mean silhouette width over all points.
///
/// Points in singleton clusters score 0; a point whose own and nearest
/// other cluster are both at distance 0 also scores 0.
pub fn silhouette(data: &[Vec<f64>], assignments: &[usize]) -> Result<f64, ClusterError> {
    if assignments.len() != data.len() {
        return Err(ClusterError::AssignmentLength {
            expected: data.len(),
            found: assignments.len(),
        });
    }
    let mut labels: BTreeMap<usize, usize> = BTreeMap::new();
    for &a in assignments {
        let next = labels.len();
        labels.entry(a).or_insert(next);
    }
    if labels.len() < 2 {
        return Err(ClusterError::UndefinedSilhouette);
    }
    let dense: Vec<usize> = assignments.iter().map(|a| labels[a]).collect();
    let k = labels.len();
    let mut sizes = vec![0usize; k];
    for &a in &dense {
        sizes[a] += 1;
    }
    let widths: Vec<f64> = (0..data.len())
        .into_par_iter()
        .map(|i| {
            let own = dense[i];
            if sizes[own] == 1 {
                return 0.0;
            }
            let mut sums = vec![0.0f64; k];
            for (j, p) in data.iter().enumerate() {
                sums[dense[j]] += sq_dist(&data[i], p).sqrt();
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != own)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let m = a.max(b);
            if m == 0.0 {
                0.0
            } else {
                (b - a) / m
            }
        })
        .collect();
    // sequential sum keeps the result independent of the thread count
    Ok(widths.iter().sum::<f64>() / data.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KScore {
    pub k: usize,
    pub sse: f64,
    pub mean_silhouette: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelectionDiagnostics {
    pub per_k: Vec<KScore>,
    pub chosen_k: usize,
}

/// Fits every k in `k_min..=k_max` and picks the k with the highest mean
/// silhouette (smaller k on ties). k = 1 has no silhouette and is chosen
/// only when it is the sole candidate.
pub fn select_k(
    data: &[Vec<f64>],
    k_min: usize,
    k_max: usize,
    base: &KMeansParams,
) -> Result<(KSelectionDiagnostics, ClusterModel), ClusterError> {
    if k_min == 0 || k_min > k_max {
        return Err(ClusterError::ZeroK);
    }
    check(data, k_max)?;
    let mut per_k = Vec::new();
    let mut best: Option<(f64, ClusterModel)> = None;
    let mut fallback = None;
    for k in k_min..=k_max {
        let model = kmeans(data, &KMeansParams { k, ..*base })?;
        let sil = if k >= 2 {
            Some(silhouette(data, &model.assignments)?)
        } else {
            None
        };
        per_k.push(KScore {
            k,
            sse: model.sse,
            mean_silhouette: sil,
        });
        match sil {
            Some(s) if best.as_ref().is_none_or(|(b, _)| s > *b) => best = Some((s, model)),
            None => fallback = Some(model),
            _ => {}
        }
    }
    let model = best.map(|(_, m)| m).or(fallback).expect("non-empty k range");
    Ok((
        KSelectionDiagnostics {
            per_k,
            chosen_k: model.k,
        },
        model,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterLabel {
    pub cluster: usize,
    pub size: usize,
    /// Suggestions closest to the centroid.
    pub nearest: Vec<String>,
    /// Most frequent tokens with their counts.
    pub top_tokens: Vec<(String, usize)>,
}

/// Evidence for naming clusters by hand: the suggestions nearest each
/// centroid and the most frequent tokens among its members.
pub fn label_clusters(
    model: &ClusterModel,
    ids: &[String],
    tokens: &[Vec<String>],
    data: &[Vec<f64>],
    top_n: usize,
) -> Vec<ClusterLabel> {
    (0..model.k)
        .map(|c| {
            let members: Vec<usize> = (0..ids.len())
                .filter(|&i| model.assignments[i] == c)
                .collect();
            let mut by_dist: Vec<(f64, &str)> = members
                .iter()
                .map(|&i| (sq_dist(&data[i], &model.centroids[c]), ids[i].as_str()))
                .collect();
            by_dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(b.1)));
            let mut counts: HashMap<&str, usize> = HashMap::new();
            for &i in &members {
                for t in &tokens[i] {
                    *counts.entry(t.as_str()).or_default() += 1;
                }
            }
            let mut top: Vec<(String, usize)> =
                counts.into_iter().map(|(t, n)| (t.to_string(), n)).collect();
            top.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            top.truncate(top_n);
            ClusterLabel {
                cluster: c,
                size: members.len(),
                nearest: by_dist.into_iter().take(top_n).map(|(_, s)| s.to_string()).collect(),
                top_tokens: top,
            }
        })
        .collect()
}
