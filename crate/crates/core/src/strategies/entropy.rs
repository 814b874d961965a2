use crate::matrix::Matrix;

use super::{top_b, QueryBatch, QueryContext};

/// Binary entropy in nats; `0 ln 0` is taken as 0.
#[inline]
pub fn binary_entropy(p: f64) -> f64 {
    let xlnx = |x: f64| if x > 0.0 { x * x.ln() } else { 0.0 };
    -(xlnx(p) + xlnx(1.0 - p))
}

/// Mean binary entropy of each row's per-class probabilities.
pub fn score_entropy(probs: &Matrix<f64>) -> Vec<f64> {
    let c = probs.cols() as f64;
    probs
        .row_iter()
        .map(|row| row.iter().map(|&p| binary_entropy(p)).sum::<f64>() / c)
        .collect()
}

/// The `b` most uncertain pool rows by mean binary entropy.
pub fn query_entropy(ctx: &mut QueryContext<'_>) -> QueryBatch {
    QueryBatch::new(top_b(&score_entropy(ctx.pool_probs), ctx.b))
}
