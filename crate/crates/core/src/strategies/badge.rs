//! Gradient-embedding batch selection for independent sigmoid outputs.
//!
//! Each pool row gets the last-layer weight gradient it would produce if its
//! hypothetical labels were the thresholded predictions `1[p >= 0.5]`. That
//! gradient is the outer product `(p - y_hat) ⊗ x`, so the explicit `C * D`
//! vectors never need to be materialized: squared distances between outer
//! products reduce to dot products of the two factors.

use crate::matrix::{dot, Matrix};

use super::kmeans::{kmeanspp_select, PointSet};
use super::{QueryBatch, QueryContext};

fn residuals(probs: &Matrix<f64>) -> Matrix<f64> {
    probs.map(|p| p - if p >= 0.5 { 1.0 } else { 0.0 })
}

/// Explicit gradient embeddings: block `c` of row `i` is `(p[i][c] - y_hat[i][c]) * x[i]`.
pub fn badge_embeddings(probs: &Matrix<f64>, x: &Matrix<f64>) -> Matrix<f64> {
    assert_eq!(probs.rows(), x.rows(), "row mismatch");
    let (m, c) = probs.shape();
    let d = x.cols();
    let res = residuals(probs);
    let mut out = Matrix::zeros(m, c * d);
    for i in 0..m {
        let xi = x.row(i);
        let row = out.row_mut(i);
        for (k, block) in row.chunks_mut(d.max(1)).enumerate().take(c) {
            let r = res[(i, k)];
            for (dst, &xv) in block.iter_mut().zip(xi) {
                *dst = r * xv;
            }
        }
    }
    out
}

/// Gradient embeddings kept in factored form.
pub struct GradientEmbedding<'a> {
    residuals: Matrix<f64>,
    x: &'a Matrix<f64>,
    residual_sq: Vec<f64>,
    x_sq: Vec<f64>,
}

impl<'a> GradientEmbedding<'a> {
    pub fn new(probs: &Matrix<f64>, x: &'a Matrix<f64>) -> Self {
        assert_eq!(probs.rows(), x.rows(), "row mismatch");
        let residuals = residuals(probs);
        let residual_sq = residuals.row_iter().map(|r| dot(r, r)).collect();
        let x_sq = x.row_iter().map(|r| dot(r, r)).collect();
        Self {
            residuals,
            x,
            residual_sq,
            x_sq,
        }
    }

    /// Euclidean norm of row `i`'s gradient embedding.
    pub fn norm(&self, i: usize) -> f64 {
        (self.residual_sq[i] * self.x_sq[i]).sqrt()
    }
}

impl PointSet for GradientEmbedding<'_> {
    fn num_points(&self) -> usize {
        self.x.rows()
    }

    fn sq_dist(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let cross = dot(self.residuals.row(i), self.residuals.row(j)) * dot(self.x.row(i), self.x.row(j));
        (self.residual_sq[i] * self.x_sq[i] + self.residual_sq[j] * self.x_sq[j] - 2.0 * cross).max(0.0)
    }
}

/// k-means++ seeding over the pool's gradient embeddings.
pub fn query_badge(ctx: &mut QueryContext<'_>) -> QueryBatch {
    let grads = GradientEmbedding::new(ctx.pool_probs, ctx.pool_embeddings);
    QueryBatch::new(kmeanspp_select(&grads, ctx.b, ctx.rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::sq_dist;

    #[test]
    fn explicit_examples() {
        let g = badge_embeddings(&Matrix::from_rows(&[[0.7]]), &Matrix::from_rows(&[[2.0, 0.0]]));
        assert!((g[(0, 0)] + 0.6).abs() < 1e-12);
        assert_eq!(g[(0, 1)], 0.0);

        let g = badge_embeddings(&Matrix::from_rows(&[[0.5, 0.2]]), &Matrix::from_rows(&[[1.0, 1.0]]));
        let expected = [-0.5, -0.5, 0.2, 0.2];
        for (a, b) in g.row(0).iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn confident_rows_have_small_gradients() {
        let x = Matrix::from_rows(&[[3.0, 4.0]]);
        let mut prev = f64::INFINITY;
        for p in [0.6, 0.9, 0.99, 0.999999] {
            let g = GradientEmbedding::new(&Matrix::from_rows(&[[p]]), &x);
            assert!(g.norm(0) < prev);
            prev = g.norm(0);
        }
        assert!(prev < 1e-5);
    }

    #[test]
    fn factored_distances_match_explicit() {
        let probs = Matrix::from_rows(&[[0.1, 0.8, 0.5], [0.45, 0.2, 0.99], [0.7, 0.7, 0.3], [0.5, 0.5, 0.5]]);
        let x = Matrix::from_rows(&[[1.0, -2.0], [0.5, 0.5], [3.0, 1.0], [-1.0, 0.0]]);
        let explicit = badge_embeddings(&probs, &x);
        let factored = GradientEmbedding::new(&probs, &x);
        for i in 0..4 {
            for j in 0..4 {
                let e = sq_dist(explicit.row(i), explicit.row(j));
                assert!((e - factored.sq_dist(i, j)).abs() < 1e-12, "({i},{j})");
            }
        }
    }
}
