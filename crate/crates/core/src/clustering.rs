//! Seeded k-means: k-means++ seeding, Lloyd iterations, best of several
//! restarts.

use alloc::vec::Vec;

use rand::{Rng as _, SeedableRng};
use thiserror::Error;

use crate::rng;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClusterError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("k = {k} exceeds the number of points ({points})")]
    TooFewPoints { k: usize, points: usize },
    #[error("point {index} has length {found}, expected {expected}")]
    DimensionMismatch { index: usize, expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KMeansParams {
    pub max_iter: usize,
    pub restarts: usize,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self { max_iter: 100, restarts: 5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClusterModel {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    /// Sum of squared distances from each point to its centroid.
    pub objective: f64,
    /// Objective after seeding and after every Lloyd iteration of the
    /// winning restart.
    pub trace: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid; ties go to the lowest index.
fn nearest(centroids: &[Vec<f64>], x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(c, x);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn objective<P: AsRef<[f64]>>(points: &[P], centroids: &[Vec<f64>], assign: &[usize]) -> f64 {
    points.iter().zip(assign).map(|(p, &a)| sq_dist(p.as_ref(), &centroids[a])).sum()
}

pub fn kmeans<P: AsRef<[f64]>>(
    points: &[P],
    k: usize,
    params: &KMeansParams,
    seed: u64,
) -> Result<ClusterModel, ClusterError> {
    if k == 0 {
        return Err(ClusterError::ZeroK);
    }
    if points.len() < k {
        return Err(ClusterError::TooFewPoints { k, points: points.len() });
    }
    let dim = points[0].as_ref().len();
    for (index, p) in points.iter().enumerate() {
        if p.as_ref().len() != dim {
            return Err(ClusterError::DimensionMismatch { index, expected: dim, found: p.as_ref().len() });
        }
    }

    let mut best: Option<ClusterModel> = None;
    for restart in 0..params.restarts.max(1) {
        let seed = rng::sub_seed_indexed(seed, "kmeans", restart as u64);
        let model = lloyd(points, k, params.max_iter, seed);
        if best.as_ref().is_none_or(|b| model.objective < b.objective) {
            best = Some(model);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn seed_centroids<P: AsRef<[f64]>>(points: &[P], k: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng::Rng::seed_from_u64(seed);
    let n = points.len();
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..n)].as_ref().to_vec());
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p.as_ref(), &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && r < d {
                    pick = i;
                    break;
                }
                r -= d;
            }
            // Guard against rounding landing on a zero-weight tail.
            while d2[pick] == 0.0 {
                pick -= 1;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        let c = points[pick].as_ref().to_vec();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p.as_ref(), &c));
        }
        centroids.push(c);
    }
    centroids
}

fn lloyd<P: AsRef<[f64]>>(points: &[P], k: usize, max_iter: usize, seed: u64) -> ClusterModel {
    let n = points.len();
    let dim = points[0].as_ref().len();
    let mut centroids = seed_centroids(points, k, seed);
    let mut assignments: Vec<usize> = points.iter().map(|p| nearest(&centroids, p.as_ref()).0).collect();
    repair_empty(points, &mut centroids, &mut assignments);
    let mut trace = alloc::vec![objective(points, &centroids, &assignments)];

    for _ in 0..max_iter {
        // update
        let mut sums = alloc::vec![alloc::vec![0.0; dim]; k];
        let mut counts = alloc::vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignments) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p.as_ref()) {
                *s += v;
            }
        }
        for ((c, s), &m) in centroids.iter_mut().zip(sums).zip(&counts) {
            if m > 0 {
                *c = s.into_iter().map(|v| v / m as f64).collect();
            }
        }
        trace.push(objective(points, &centroids, &assignments));

        // assign
        let mut changed = false;
        for (p, a) in points.iter().zip(assignments.iter_mut()) {
            let (j, d) = nearest(&centroids, p.as_ref());
            // Only move when strictly closer, so exact ties never oscillate.
            if j != *a && d < sq_dist(p.as_ref(), &centroids[*a]) {
                *a = j;
                changed = true;
            }
        }
        changed |= repair_empty(points, &mut centroids, &mut assignments);
        if !changed {
            break;
        }
    }

    // Settle on the nearest-centroid labelling for the final centroids.
    for (p, a) in points.iter().zip(assignments.iter_mut()) {
        let (j, d) = nearest(&centroids, p.as_ref());
        if d < sq_dist(p.as_ref(), &centroids[*a]) {
            *a = j;
        }
    }
    repair_empty(points, &mut centroids, &mut assignments);
    debug_assert!(assignments.iter().all(|&a| a < k) && n >= k);
    let objective = objective(points, &centroids, &assignments);
    ClusterModel { k, centroids, assignments, objective, trace }
}

/// Gives every empty cluster the point currently farthest from its own
/// centroid, taken from a cluster that can spare it.
fn repair_empty<P: AsRef<[f64]>>(points: &[P], centroids: &mut [Vec<f64>], assignments: &mut [usize]) -> bool {
    let k = centroids.len();
    let mut repaired = false;
    loop {
        let mut counts = alloc::vec![0usize; k];
        for &a in assignments.iter() {
            counts[a] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return repaired;
        };
        let mut far = None;
        let mut far_d = -1.0;
        for (i, p) in points.iter().enumerate() {
            let a = assignments[i];
            if counts[a] < 2 {
                continue;
            }
            let d = sq_dist(p.as_ref(), &centroids[a]);
            if d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        let i = far.expect("n >= k leaves a cluster with two or more points");
        assignments[i] = empty;
        centroids[empty] = points[i].as_ref().to_vec();
        repaired = true;
    }
}

/// Index of the centroid nearest to `x`; ties go to the lowest index.
pub fn assign(model: &ClusterModel, x: &[f64]) -> Result<usize, ClusterError> {
    let expected = model.centroids.first().map_or(0, Vec::len);
    if x.len() != expected {
        return Err(ClusterError::DimensionMismatch { index: 0, expected, found: x.len() });
    }
    Ok(nearest(&model.centroids, x).0)
}
