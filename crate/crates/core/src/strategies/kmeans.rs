//! k-means++ seeding and Lloyd's k-means.

use rand::Rng;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::matrix::{sq_dist, Matrix};
use crate::rng::HarnessRng;

/// Anything with pairwise squared Euclidean distances.
pub trait PointSet: Sync {
    fn num_points(&self) -> usize;
    fn sq_dist(&self, i: usize, j: usize) -> f64;
}

impl PointSet for Matrix<f64> {
    fn num_points(&self) -> usize {
        self.rows()
    }

    fn sq_dist(&self, i: usize, j: usize) -> f64 {
        sq_dist(self.row(i), self.row(j))
    }
}

/// Applies `f` to every slot; the per-slot work is independent, so the
/// parallel and serial paths produce identical results.
fn for_each_indexed<T: Send>(slots: &mut [T], f: impl Fn(usize, &mut T) + Sync + Send) {
    #[cfg(feature = "parallel")]
    slots.par_iter_mut().enumerate().for_each(|(i, s)| f(i, s));
    #[cfg(not(feature = "parallel"))]
    slots.iter_mut().enumerate().for_each(|(i, s)| f(i, s));
}

/// Draws a position with probability proportional to `weights`. Zero-weight
/// positions are never drawn while any weight is positive.
fn draw_weighted(weights: &[f64], rng: &mut HarnessRng) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return None;
    }
    let target = rng.random::<f64>() * total;
    let mut cum = 0.0;
    let mut last_positive = None;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            cum += w;
            last_positive = Some(i);
            if target < cum {
                return Some(i);
            }
        }
    }
    last_positive
}

/// k-means++ seeding: the first point uniformly, each further point with
/// probability proportional to its squared distance to the nearest point
/// already chosen. Returns `b` distinct indices in selection order.
///
/// If every remaining point coincides with a chosen one, the next point is
/// drawn uniformly from the unchosen ones.
pub fn kmeanspp_select<P: PointSet + ?Sized>(points: &P, b: usize, rng: &mut HarnessRng) -> Vec<usize> {
    let m = points.num_points();
    assert!(b <= m, "cannot select {b} of {m} points");
    if b == 0 {
        return Vec::new();
    }
    let first = rng.random_range(0..m);
    kmeanspp_extend(points, vec![first], b, rng)
}

/// Continues k-means++ seeding from an existing, distinct set of chosen
/// points until `b` are chosen.
pub fn kmeanspp_extend<P: PointSet + ?Sized>(
    points: &P,
    mut chosen: Vec<usize>,
    b: usize,
    rng: &mut HarnessRng,
) -> Vec<usize> {
    let m = points.num_points();
    assert!(b <= m, "cannot select {b} of {m} points");
    assert!(!chosen.is_empty(), "k-means++ needs at least one chosen point");
    let mut taken = vec![false; m];
    for &c in &chosen {
        assert!(!taken[c], "chosen points must be distinct");
        taken[c] = true;
    }
    let mut nearest = vec![0.0f64; m];
    for_each_indexed(&mut nearest, |i, d| {
        *d = if taken[i] {
            0.0
        } else {
            chosen
                .iter()
                .map(|&c| points.sq_dist(i, c))
                .fold(f64::INFINITY, f64::min)
        }
    });

    while chosen.len() < b {
        let next = match draw_weighted(&nearest, rng) {
            Some(i) => i,
            None => {
                let free: Vec<usize> = (0..m).filter(|&i| !taken[i]).collect();
                free[rng.random_range(0..free.len())]
            }
        };
        chosen.push(next);
        taken[next] = true;
        for_each_indexed(&mut nearest, |i, d| {
            if taken[i] {
                *d = 0.0;
            } else {
                *d = d.min(points.sq_dist(i, next));
            }
        });
    }
    chosen
}

/// Settings of [`kmeans`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub max_iters: usize,
    /// Stop once the total centroid shift, relative to the centroid norm, falls below this.
    pub tol: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol: 1e-6,
        }
    }
}

/// Result of [`kmeans`].
#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub assignments: Vec<usize>,
    pub centroids: Matrix<f64>,
    pub inertia: f64,
    pub iterations: usize,
}

impl KMeans {
    /// Member indices of every cluster, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.centroids.rows()];
        for (i, &c) in self.assignments.iter().enumerate() {
            members[c].push(i);
        }
        members
    }
}

fn nearest_centroid(x: &[f64], centroids: &Matrix<f64>) -> (usize, f64) {
    centroids
        .row_iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bd), (c, row)| {
            let d = sq_dist(x, row);
            if d < bd {
                (c, d)
            } else {
                (bi, bd)
            }
        })
}

fn assign(points: &Matrix<f64>, centroids: &Matrix<f64>) -> Vec<(usize, f64)> {
    let mut out = vec![(0usize, 0.0f64); points.rows()];
    for_each_indexed(&mut out, |i, slot| *slot = nearest_centroid(points.row(i), centroids));
    out
}

/// Lloyd's k-means with k-means++ initialization.
///
/// A cluster that ends an assignment step empty takes over the point
/// farthest from its own centroid (ties to the lowest index), drawn only from
/// clusters with more than one member.
pub fn kmeans(points: &Matrix<f64>, k: usize, rng: &mut HarnessRng, cfg: KMeansConfig) -> KMeans {
    let (m, dim) = points.shape();
    assert!(k >= 1 && k <= m, "k = {k} must be in 1..={m}");
    let seeds = kmeanspp_select(points, k, rng);
    let mut centroids = points.select_rows(&seeds);
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        iterations += 1;
        let nearest = assign(points, &centroids);
        let mut labels: Vec<usize> = nearest.iter().map(|&(c, _)| c).collect();
        let mut dists: Vec<f64> = nearest.iter().map(|&(_, d)| d).collect();
        let mut counts = vec![0usize; k];
        for &c in &labels {
            counts[c] += 1;
        }
        for empty in 0..k {
            if counts[empty] > 0 {
                continue;
            }
            let donor = (0..m)
                .filter(|&i| counts[labels[i]] > 1)
                .fold(None, |best: Option<usize>, i| match best {
                    Some(b) if dists[b] >= dists[i] => Some(b),
                    _ => Some(i),
                });
            if let Some(i) = donor {
                counts[labels[i]] -= 1;
                counts[empty] += 1;
                labels[i] = empty;
                dists[i] = 0.0;
            }
        }

        let mut sums = Matrix::<f64>::zeros(k, dim);
        for (i, &c) in labels.iter().enumerate() {
            for (s, &x) in sums.row_mut(c).iter_mut().zip(points.row(i)) {
                *s += x;
            }
        }
        let mut shift = 0.0;
        let mut norm = 0.0;
        for (c, &count) in counts.iter().enumerate() {
            let old = centroids.row(c).to_vec();
            norm += old.iter().map(|v| v * v).sum::<f64>();
            if count > 0 {
                let inv = 1.0 / count as f64;
                let new = centroids.row_mut(c);
                for (dst, &s) in new.iter_mut().zip(sums.row(c)) {
                    *dst = s * inv;
                }
                shift += sq_dist(&old, new);
            }
        }
        if shift.sqrt() <= cfg.tol * norm.sqrt().max(f64::MIN_POSITIVE) {
            break;
        }
    }

    let nearest = assign(points, &centroids);
    KMeans {
        assignments: nearest.iter().map(|&(c, _)| c).collect(),
        inertia: nearest.iter().map(|&(_, d)| d).sum(),
        centroids,
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn single_pick_is_uniform_draw() {
        let pts = Matrix::from_rows(&[[0.0], [1.0], [2.0]]);
        let mut seen = [false; 3];
        for seed in 0..60 {
            let sel = kmeanspp_select(&pts, 1, &mut rng_from_seed(seed));
            assert_eq!(sel.len(), 1);
            seen[sel[0]] = true;
        }
        assert_eq!(seen, [true; 3]);
    }

    #[test]
    fn duplicate_of_first_is_never_second() {
        // points 0, 0, 10: once a 0 is picked the other 0 has weight 0
        let pts = Matrix::from_rows(&[[0.0], [0.0], [10.0]]);
        for seed in 0..200 {
            let sel = kmeanspp_select(&pts, 2, &mut rng_from_seed(seed));
            if sel[0] != 2 {
                assert_eq!(sel[1], 2, "seed {seed}");
            }
        }
    }

    #[test]
    fn selecting_all_points_returns_a_permutation() {
        let pts = Matrix::from_rows(&[[0.0, 0.0], [0.0, 0.0], [1.0, 1.0], [1.0, 1.0], [5.0, 0.0]]);
        for seed in 0..20 {
            let mut sel = kmeanspp_select(&pts, 5, &mut rng_from_seed(seed));
            sel.sort_unstable();
            assert_eq!(sel, vec![0, 1, 2, 3, 4]);
        }
    }

    #[test]
    fn two_tight_pairs() {
        let pts = Matrix::from_rows(&[[0.0, 0.0], [0.0, 0.2], [10.0, 10.0], [10.2, 10.0]]);
        let km = kmeans(&pts, 2, &mut rng_from_seed(1), KMeansConfig::default());
        assert_eq!(km.assignments[0], km.assignments[1]);
        assert_eq!(km.assignments[2], km.assignments[3]);
        assert_ne!(km.assignments[0], km.assignments[2]);
        let a = km.assignments[0];
        assert!((km.centroids[(a, 1)] - 0.1).abs() < 1e-12);
        // each pair contributes 2 * 0.1^2
        assert!((km.inertia - 0.04).abs() < 1e-12);
    }

    #[test]
    fn k_equal_m_has_zero_inertia() {
        let pts = Matrix::from_rows(&[[0.0, 1.0], [2.0, 3.0], [-1.0, 4.0], [7.0, 7.0]]);
        let km = kmeans(&pts, 4, &mut rng_from_seed(3), KMeansConfig::default());
        assert_eq!(km.inertia, 0.0);
        let mut a = km.assignments.clone();
        a.sort_unstable();
        assert_eq!(a, vec![0, 1, 2, 3]);
    }

    #[test]
    fn empty_clusters_are_reseeded() {
        // three distinct locations but four clusters requested over duplicates
        let pts = Matrix::from_rows(&[[0.0], [0.0], [0.0], [1.0], [1.0], [9.0]]);
        let km = kmeans(&pts, 4, &mut rng_from_seed(0), KMeansConfig::default());
        assert_eq!(km.assignments.len(), 6);
        assert!(km.inertia.abs() < 1e-12);
    }

    #[test]
    fn deterministic_in_seed() {
        let pts = Matrix::from_vec(30, 2, (0..60).map(|i| ((i * 37) % 11) as f64).collect()).unwrap();
        let a = kmeans(&pts, 5, &mut rng_from_seed(9), KMeansConfig::default());
        let b = kmeans(&pts, 5, &mut rng_from_seed(9), KMeansConfig::default());
        assert_eq!(a, b);
    }
}
