//! Seeded k-means with greedy k-means++ initialisation.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansParams {
    pub max_iterations: usize,
    /// Stop once no centroid moves further than this.
    pub tolerance: f64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub centroids: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    pub iterations: usize,
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Greedy k-means++: each new centre is the best of a few D²-weighted
/// candidates by total potential.
fn init_plus_plus(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let trials = 2 + (k as f64).ln().floor() as usize;
    let mut centroids = vec![points[rng.gen_range(0..points.len())].clone()];
    let mut closest: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = closest.iter().sum();
        let candidates: Vec<usize> = if total > 0.0 {
            let dist = WeightedIndex::new(&closest).expect("positive total weight");
            (0..trials).map(|_| dist.sample(rng)).collect()
        } else {
            // every point coincides with a centre already
            (0..trials).map(|_| rng.gen_range(0..points.len())).collect()
        };
        let mut best: Option<(usize, f64, Vec<f64>)> = None;
        for c in candidates {
            let updated: Vec<f64> = points
                .iter()
                .zip(&closest)
                .map(|(p, &d)| d.min(sq_dist(p, &points[c])))
                .collect();
            let potential: f64 = updated.iter().sum();
            if best.as_ref().is_none_or(|b| potential < b.1) {
                best = Some((c, potential, updated));
            }
        }
        let (c, _, updated) = best.expect("at least one candidate");
        centroids.push(points[c].clone());
        closest = updated;
    }
    centroids
}

/// Lloyd iterations from a k-means++ start. `points` must be non-empty,
/// equal-length, and `1 <= k <= points.len()`.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, params: &KMeansParams) -> Clustering {
    assert!(k >= 1 && k <= points.len(), "k out of range");
    let dim = points[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = init_plus_plus(points, k, &mut rng);
    let mut assignment = vec![0usize; points.len()];
    let mut iterations = 0;

    while iterations < params.max_iterations {
        iterations += 1;
        for (a, p) in assignment.iter_mut().zip(points) {
            *a = nearest(p, &centroids).0;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignment) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        // An empty cluster takes over the point furthest from its centre.
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let far = (0..points.len())
                .filter(|&i| counts[assignment[i]] > 1)
                .max_by(|&i, &j| {
                    sq_dist(&points[i], &centroids[assignment[i]])
                        .total_cmp(&sq_dist(&points[j], &centroids[assignment[j]]))
                        .then(j.cmp(&i))
                });
            if let Some(i) = far {
                let old = assignment[i];
                counts[old] -= 1;
                for (s, v) in sums[old].iter_mut().zip(&points[i]) {
                    *s -= v;
                }
                assignment[i] = c;
                counts[c] = 1;
                sums[c] = points[i].clone();
            }
        }
        let mut shift: f64 = 0.0;
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            let mean: Vec<f64> = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            shift = shift.max(sq_dist(&mean, &centroids[c]).sqrt());
            centroids[c] = mean;
        }
        if shift < params.tolerance {
            break;
        }
    }
    for (a, p) in assignment.iter_mut().zip(points) {
        *a = nearest(p, &centroids).0;
    }
    Clustering {
        centroids,
        assignment,
        iterations,
    }
}

/// Member of each cluster minimising the summed distance to the others.
pub fn medoids(points: &[Vec<f64>], clustering: &Clustering) -> Vec<Vec<f64>> {
    (0..clustering.centroids.len())
        .map(|c| {
            let members: Vec<&Vec<f64>> = points
                .iter()
                .zip(&clustering.assignment)
                .filter(|(_, &a)| a == c)
                .map(|(p, _)| p)
                .collect();
            if members.is_empty() {
                return clustering.centroids[c].clone();
            }
            members
                .iter()
                .map(|m| {
                    let cost: f64 = members.iter().map(|o| sq_dist(m, o).sqrt()).sum();
                    (cost, *m)
                })
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .map(|(_, m)| m.clone())
                .expect("non-empty cluster")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cluster_is_mean() {
        let pts = vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![1.0, 3.0]];
        let c = kmeans(&pts, 1, 7, &KMeansParams::default());
        assert!((c.centroids[0][0] - 1.0).abs() < 1e-12);
        assert!((c.centroids[0][1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn duplicate_points_do_not_break_seeding() {
        let pts = vec![vec![1.0, 1.0]; 5];
        let c = kmeans(&pts, 3, 1, &KMeansParams::default());
        assert_eq!(c.centroids.len(), 3);
    }

    #[test]
    fn medoid_is_a_member() {
        let pts = vec![vec![0.0], vec![1.0], vec![5.0], vec![10.0], vec![11.0]];
        let c = kmeans(&pts, 2, 3, &KMeansParams::default());
        for m in medoids(&pts, &c) {
            assert!(pts.contains(&m));
        }
    }
}
