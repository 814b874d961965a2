//! Query strategies that pick the next batch from the unlabeled pool.
//!
//! Strategies see the pool as a contiguous block of rows; the batch they
//! return holds positions into that block, which the experiment loop maps
//! back to dataset indices.

mod badge;
mod entropy;
mod kmeans;
mod random;
mod typiclust;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;
use crate::rng::HarnessRng;

pub use badge::{badge_embeddings, query_badge, GradientEmbedding};
pub use entropy::{binary_entropy, query_entropy, score_entropy};
pub use kmeans::{kmeans, kmeanspp_extend, kmeanspp_select, KMeans, KMeansConfig, PointSet};
pub use random::query_random;
pub use typiclust::{query_typiclust, typicality, TYPICALITY_NEIGHBORS};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StrategyError {
    #[error("unknown strategy {0:?}; valid identifiers are: random, entropy, badge, typiclust")]
    UnknownStrategy(String),
    #[error("invalid query context: {0}")]
    InvalidContext(String),
}

/// Stable strategy identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Random,
    Entropy,
    Badge,
    Typiclust,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Random,
        Strategy::Entropy,
        Strategy::Badge,
        Strategy::Typiclust,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::Entropy => "entropy",
            Strategy::Badge => "badge",
            Strategy::Typiclust => "typiclust",
        }
    }

    /// Selects a batch of `ctx.b` pool positions.
    pub fn query(self, ctx: &mut QueryContext<'_>) -> Result<QueryBatch, StrategyError> {
        ctx.validate()?;
        let batch = match self {
            Strategy::Random => query_random(ctx),
            Strategy::Entropy => query_entropy(ctx),
            Strategy::Badge => query_badge(ctx),
            Strategy::Typiclust => query_typiclust(ctx),
        };
        debug_assert_eq!(batch.len(), ctx.b);
        Ok(batch)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = StrategyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| StrategyError::UnknownStrategy(s.to_owned()))
    }
}

/// Everything a strategy may look at when choosing a batch.
pub struct QueryContext<'a> {
    /// Features of the unlabeled pool, one row per pool position.
    pub pool_embeddings: &'a Matrix<f64>,
    /// Current head's probabilities for the pool rows.
    pub pool_probs: &'a Matrix<f64>,
    /// Features of the labeled set.
    pub labeled_embeddings: &'a Matrix<f64>,
    pub b: usize,
    pub rng: &'a mut HarnessRng,
}

impl QueryContext<'_> {
    pub fn pool_size(&self) -> usize {
        self.pool_embeddings.rows()
    }

    pub fn validate(&self) -> Result<(), StrategyError> {
        let bad = |msg: String| Err(StrategyError::InvalidContext(msg));
        let m = self.pool_size();
        if self.b == 0 || self.b > m {
            return bad(format!("batch size {} must be in 1..={m}", self.b));
        }
        if self.pool_probs.rows() != m {
            return bad(format!("{} probability rows for {m} pool rows", self.pool_probs.rows()));
        }
        if self.labeled_embeddings.rows() > 0 && self.labeled_embeddings.cols() != self.pool_embeddings.cols() {
            return bad("labeled and pool embeddings differ in dimension".into());
        }
        if let Some(p) = self.pool_probs.as_slice().iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
            return bad(format!("probability {p} outside (0, 1)"));
        }
        Ok(())
    }
}

/// Ordered, distinct pool positions chosen for annotation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryBatch(Vec<usize>);

impl QueryBatch {
    pub(crate) fn new(indices: Vec<usize>) -> Self {
        debug_assert!({
            let mut s = indices.clone();
            s.sort_unstable();
            s.windows(2).all(|w| w[0] != w[1])
        });
        Self(indices)
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }
}

/// Positions of the `b` largest scores, highest first; equal scores go to
/// the lower position.
pub(crate) fn top_b(scores: &[f64], b: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(i.cmp(&j)));
    order.truncate(b);
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        }
        let err = "coreset".parse::<Strategy>().unwrap_err();
        assert!(err.to_string().contains("random, entropy, badge, typiclust"));
    }

    #[test]
    fn top_b_breaks_ties_low() {
        assert_eq!(top_b(&[1.0, 3.0, 3.0, 2.0], 2), vec![1, 2]);
        assert_eq!(top_b(&[0.0; 5], 3), vec![0, 1, 2]);
    }
}
