use rand::seq::index;

use super::{QueryBatch, QueryContext};

/// `b` pool positions drawn uniformly without replacement.
pub fn query_random(ctx: &mut QueryContext<'_>) -> QueryBatch {
    QueryBatch::new(index::sample(ctx.rng, ctx.pool_size(), ctx.b).into_vec())
}
