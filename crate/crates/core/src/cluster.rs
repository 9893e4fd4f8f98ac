//! K-Means with k-means++ seeding, Davies-Bouldin scoring and model
//! selection over a set of cluster counts.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::rng::{derive, stream, Domain};

pub const DEFAULT_MAX_ITERS: usize = 300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusterError {
    #[error("k = {0} is invalid (need k >= 2)")]
    InvalidK(usize),
    #[error("{n} vectors cannot form {k} clusters")]
    TooFewVectors { n: usize, k: usize },
    #[error("vector {index} has dimension {got}, expected {expected}")]
    DimensionMismatch { index: usize, got: usize, expected: usize },
    #[error("centroids {0} and {1} coincide")]
    DuplicateCentroids(usize, usize),
    #[error("k_set is empty")]
    EmptyKSet,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterModel {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub inertia: f64,
    /// `+inf` when two centroids coincide.
    pub dbi: f64,
    /// Inertia after the seeding assignment and after every Lloyd iteration.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

impl ClusterModel {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == cluster)
            .collect()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

fn check_dims<V: AsRef<[f64]>>(vectors: &[V]) -> Result<usize, ClusterError> {
    let dim = vectors.first().map_or(0, |v| v.as_ref().len());
    for (index, v) in vectors.iter().enumerate() {
        if v.as_ref().len() != dim {
            return Err(ClusterError::DimensionMismatch {
                index,
                got: v.as_ref().len(),
                expected: dim,
            });
        }
    }
    Ok(dim)
}

/// Index of the nearest centroid; ties go to the smaller index.
fn nearest(v: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(v, c);
        if d < best.0 {
            best = (d, j);
        }
    }
    best.1
}

fn inertia<V: AsRef<[f64]> + Sync>(vectors: &[V], centroids: &[Vec<f64>], assignments: &[usize]) -> f64 {
    vectors
        .iter()
        .zip(assignments)
        .map(|(v, &a)| sq_dist(v.as_ref(), &centroids[a]))
        .sum()
}

fn plus_plus_seeds<V: AsRef<[f64]>>(vectors: &[V], k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let n = vectors.len();
    let mut chosen = vec![rng.gen_range(0..n)];
    let mut d2: Vec<f64> = vectors
        .iter()
        .map(|v| sq_dist(v.as_ref(), vectors[chosen[0]].as_ref()))
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave the target past the running sum
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            // every point already coincides with a seed
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.gen_range(0..free.len())]
        };
        chosen.push(next);
        for (i, v) in vectors.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(v.as_ref(), vectors[next].as_ref()));
        }
    }
    chosen.iter().map(|&i| vectors[i].as_ref().to_vec()).collect()
}

/// Nearest-centroid assignment, then every empty cluster is reseeded with
/// the point farthest from its own centroid (taken from a cluster that can
/// spare it). Returns the assignment.
fn assign_and_repair<V: AsRef<[f64]> + Sync>(vectors: &[V], centroids: &mut [Vec<f64>]) -> Vec<usize> {
    let mut assignments: Vec<usize> = vectors
        .par_iter()
        .map(|v| nearest(v.as_ref(), centroids))
        .collect();
    let k = centroids.len();
    loop {
        let mut sizes = vec![0usize; k];
        for &a in &assignments {
            sizes[a] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return assignments;
        };
        let mut far = (-1.0, usize::MAX);
        for (i, v) in vectors.iter().enumerate() {
            let a = assignments[i];
            if sizes[a] < 2 {
                continue;
            }
            let d = sq_dist(v.as_ref(), &centroids[a]);
            if d > far.0 {
                far = (d, i);
            }
        }
        let p = far.1;
        centroids[empty] = vectors[p].as_ref().to_vec();
        assignments[p] = empty;
    }
}

fn update_centroids<V: AsRef<[f64]>>(vectors: &[V], assignments: &[usize], k: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (v, &a) in vectors.iter().zip(assignments) {
        counts[a] += 1;
        for (s, x) in sums[a].iter_mut().zip(v.as_ref()) {
            *s += x;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        s.iter_mut().for_each(|x| *x /= c as f64);
    }
    sums
}

pub fn kmeans<V: AsRef<[f64]> + Sync>(vectors: &[V], k: usize, seed: u64) -> Result<ClusterModel, ClusterError> {
    kmeans_with(vectors, k, seed, DEFAULT_MAX_ITERS)
}

/// Lloyd's algorithm from k-means++ seeds; stops when assignments repeat or
/// after `max_iters` iterations.
pub fn kmeans_with<V: AsRef<[f64]> + Sync>(
    vectors: &[V],
    k: usize,
    seed: u64,
    max_iters: usize,
) -> Result<ClusterModel, ClusterError> {
    if k < 2 {
        return Err(ClusterError::InvalidK(k));
    }
    if vectors.len() < k {
        return Err(ClusterError::TooFewVectors { n: vectors.len(), k });
    }
    let dim = check_dims(vectors)?;
    let mut rng = stream(seed, Domain::KMeans, 0);
    let mut centroids = plus_plus_seeds(vectors, k, &mut rng);
    let mut assignments = assign_and_repair(vectors, &mut centroids);
    let mut history = vec![inertia(vectors, &centroids, &assignments)];
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        centroids = update_centroids(vectors, &assignments, k, dim);
        let next = assign_and_repair(vectors, &mut centroids);
        history.push(inertia(vectors, &centroids, &next));
        let stable = next == assignments;
        assignments = next;
        if stable {
            break;
        }
    }
    let mut model = ClusterModel {
        k,
        inertia: *history.last().unwrap(),
        centroids,
        assignments,
        dbi: 0.0,
        inertia_history: history,
        iterations,
    };
    model.dbi = davies_bouldin(vectors, &model).unwrap_or(f64::INFINITY);
    Ok(model)
}

/// `(1/k) * sum_i max_{j != i} (s_i + s_j) / d(c_i, c_j)` with `s_i` the mean
/// member-to-centroid distance.
pub fn davies_bouldin<V: AsRef<[f64]>>(vectors: &[V], model: &ClusterModel) -> Result<f64, ClusterError> {
    let k = model.k;
    let mut scatter = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for (v, &a) in vectors.iter().zip(&model.assignments) {
        scatter[a] += dist(v.as_ref(), &model.centroids[a]);
        counts[a] += 1;
    }
    for (s, &c) in scatter.iter_mut().zip(&counts) {
        if c > 0 {
            *s /= c as f64;
        }
    }
    let mut total = 0.0;
    for i in 0..k {
        let mut worst = 0.0f64;
        for j in 0..k {
            if i == j {
                continue;
            }
            let d = dist(&model.centroids[i], &model.centroids[j]);
            if d == 0.0 {
                return Err(ClusterError::DuplicateCentroids(i.min(j), i.max(j)));
            }
            worst = worst.max((scatter[i] + scatter[j]) / d);
        }
        total += worst;
    }
    Ok(total / k as f64)
}

/// Outcome of model selection: the winner plus the score of every k tried.
#[derive(Debug, Clone, PartialEq)]
pub struct KSelection {
    pub model: ClusterModel,
    /// `(k, dbi)` in ascending k.
    pub scores: Vec<(usize, f64)>,
}

pub fn select_k<V: AsRef<[f64]> + Sync>(vectors: &[V], k_set: &[usize], seed: u64) -> Result<ClusterModel, ClusterError> {
    select_k_scored(vectors, k_set, seed).map(|s| s.model)
}

/// Runs K-Means for every k (ascending, duplicates removed) with a seed
/// derived from `(seed, k)` and keeps the lowest DBI; ties go to smaller k.
pub fn select_k_scored<V: AsRef<[f64]> + Sync>(
    vectors: &[V],
    k_set: &[usize],
    seed: u64,
) -> Result<KSelection, ClusterError> {
    let mut ks = k_set.to_vec();
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() {
        return Err(ClusterError::EmptyKSet);
    }
    let models = ks
        .par_iter()
        .map(|&k| kmeans(vectors, k, derive(seed, k as u64)))
        .collect::<Result<Vec<_>, _>>()?;
    let scores = models.iter().map(|m| (m.k, m.dbi)).collect();
    let mut best = 0;
    for (i, m) in models.iter().enumerate() {
        if m.dbi < models[best].dbi {
            best = i;
        }
    }
    Ok(KSelection {
        model: models.into_iter().nth(best).unwrap(),
        scores,
    })
}

/// The cluster with the most members; ties by smaller mean member distance,
/// then smaller id. Members come back in ascending order.
pub fn largest_cluster<V: AsRef<[f64]>>(vectors: &[V], model: &ClusterModel) -> (usize, Vec<usize>) {
    let sizes = model.cluster_sizes();
    let mut scatter = vec![0.0; model.k];
    for (v, &a) in vectors.iter().zip(&model.assignments) {
        scatter[a] += dist(v.as_ref(), &model.centroids[a]);
    }
    let mean = |c: usize| if sizes[c] > 0 { scatter[c] / sizes[c] as f64 } else { f64::INFINITY };
    let mut best = 0;
    for c in 1..model.k {
        if sizes[c] > sizes[best] || (sizes[c] == sizes[best] && mean(c) < mean(best)) {
            best = c;
        }
    }
    (best, model.members(best))
}
