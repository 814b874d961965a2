//! Typicality-based cluster sampling.

use std::collections::HashSet;

use crate::matrix::{sq_dist, Matrix};

use super::kmeans::{kmeans, KMeansConfig};
use super::{QueryBatch, QueryContext};

/// Nearest neighbors used for the typicality score.
pub const TYPICALITY_NEIGHBORS: usize = 20;

/// Inverse mean Euclidean distance from point `i` to its `neighbors`
/// nearest fellow members of `members` (capped at `|members| - 1`).
/// A singleton cluster scores `+inf`.
pub fn typicality(points: &Matrix<f64>, members: &[usize], i: usize, neighbors: usize) -> f64 {
    debug_assert!(members.contains(&i));
    let k = neighbors.min(members.len().saturating_sub(1));
    if k == 0 {
        return f64::INFINITY;
    }
    let mut dists: Vec<f64> = members
        .iter()
        .filter(|&&j| j != i)
        .map(|&j| sq_dist(points.row(i), points.row(j)).sqrt())
        .collect();
    dists.select_nth_unstable_by(k - 1, f64::total_cmp);
    let mut nearest = dists[..k].to_vec();
    nearest.sort_by(f64::total_cmp);
    let mean = nearest.iter().sum::<f64>() / k as f64;
    1.0 / mean
}

/// Clusters labeled and pool rows together into `|L| + b` clusters, then
/// takes the most typical pool row from each of the `b` largest clusters
/// that hold no labeled row. When fewer such clusters exist, the rest of the
/// batch comes from the covered clusters, largest first, one pick per
/// cluster per pass.
pub fn query_typiclust(ctx: &mut QueryContext<'_>) -> QueryBatch {
    let labeled = ctx.labeled_embeddings.rows();
    let b = ctx.b;
    let combined = if labeled == 0 {
        ctx.pool_embeddings.clone()
    } else {
        ctx.labeled_embeddings.vstack(ctx.pool_embeddings)
    };
    let km = kmeans(&combined, labeled + b, ctx.rng, KMeansConfig::default());
    let members = km.members();

    let by_size = |ids: &mut Vec<usize>| ids.sort_by(|&a, &c| members[c].len().cmp(&members[a].len()).then(a.cmp(&c)));
    let (mut covered, mut uncovered): (Vec<usize>, Vec<usize>) = (0..members.len())
        .filter(|&c| !members[c].is_empty())
        .partition(|&c| members[c].iter().any(|&i| i < labeled));
    by_size(&mut covered);
    by_size(&mut uncovered);

    let mut chosen = Vec::with_capacity(b);
    let mut taken = HashSet::with_capacity(b);
    let mut pick = |cluster: usize, chosen: &mut Vec<usize>| {
        let best = members[cluster]
            .iter()
            .filter(|&&i| i >= labeled && !taken.contains(&i))
            .map(|&i| (i, typicality(&combined, &members[cluster], i, TYPICALITY_NEIGHBORS)))
            .fold(None, |best: Option<(usize, f64)>, (i, t)| match best {
                Some((_, bt)) if bt >= t => best,
                _ => Some((i, t)),
            });
        if let Some((i, _)) = best {
            taken.insert(i);
            chosen.push(i - labeled);
        }
    };

    for &c in uncovered.iter().take(b) {
        pick(c, &mut chosen);
    }
    let fill_order: Vec<usize> = covered.iter().chain(&uncovered).copied().collect();
    while chosen.len() < b {
        let before = chosen.len();
        for &c in &fill_order {
            if chosen.len() == b {
                break;
            }
            pick(c, &mut chosen);
        }
        assert!(chosen.len() > before, "pool exhausted before batch was filled");
    }
    QueryBatch::new(chosen)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_points() {
        let pts = Matrix::from_rows(&[[0.0, 0.0], [3.0, 4.0]]);
        assert!((typicality(&pts, &[0, 1], 0, 1) - 0.2).abs() < 1e-15);
        assert!((typicality(&pts, &[0, 1], 1, 20) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn collinear_middle_is_most_typical() {
        let pts = Matrix::from_rows(&[[0.0], [1.0], [2.0]]);
        let m = [0, 1, 2];
        assert!((typicality(&pts, &m, 1, 2) - 1.0).abs() < 1e-15);
        assert!((typicality(&pts, &m, 0, 2) - 1.0 / 1.5).abs() < 1e-15);
        assert!((typicality(&pts, &m, 2, 2) - 1.0 / 1.5).abs() < 1e-15);
    }

    #[test]
    fn singleton_is_infinitely_typical() {
        let pts = Matrix::from_rows(&[[5.0]]);
        assert_eq!(typicality(&pts, &[0], 0, 20), f64::INFINITY);
    }

    #[test]
    fn scaling_scales_typicality() {
        let pts = Matrix::from_rows(&[[0.0, 1.0], [2.0, 0.5], [1.0, 1.0], [4.0, -1.0]]);
        let scaled = pts.map(|v| 2.5 * v);
        let m = [0, 1, 2, 3];
        for i in 0..4 {
            let a = typicality(&pts, &m, i, 2);
            let b = typicality(&scaled, &m, i, 2);
            assert!((a / 2.5 - b).abs() < 1e-12);
        }
    }
}
