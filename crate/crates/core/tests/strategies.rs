use albird_core::matrix::sq_dist;
use albird_core::rng::rng_from_seed;
use albird_core::strategies::{
    badge_embeddings, kmeans, kmeanspp_extend, query_badge, query_random, query_typiclust, score_entropy, KMeansConfig,
    PointSet, QueryBatch, QueryContext,
};
use albird_core::{Matrix, Strategy};
use proptest::prelude::*;
use rand::Rng;

fn run_query(
    f: impl Fn(&mut QueryContext<'_>) -> QueryBatch,
    pool: &Matrix<f64>,
    probs: &Matrix<f64>,
    labeled: &Matrix<f64>,
    b: usize,
    seed: u64,
) -> Vec<usize> {
    let mut rng = rng_from_seed(seed);
    let mut ctx = QueryContext {
        pool_embeddings: pool,
        pool_probs: probs,
        labeled_embeddings: labeled,
        b,
        rng: &mut rng,
    };
    f(&mut ctx).into_vec()
}

fn uniform(rng: &mut impl Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix<f64> {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_strategy_returns_b_distinct_positions(
        m in 1usize..40,
        labeled in 0usize..12,
        d in 1usize..5,
        c in 1usize..4,
        b_frac in 0.0f64..1.0,
        seed in any::<u64>(),
    ) {
        let mut rng = rng_from_seed(seed);
        let pool = uniform(&mut rng, m, d, -2.0, 2.0);
        let probs = uniform(&mut rng, m, c, 0.01, 0.99);
        let lab = uniform(&mut rng, labeled, d, -2.0, 2.0);
        let b = 1 + ((m - 1) as f64 * b_frac) as usize;
        for strategy in Strategy::ALL {
            let q = |ctx: &mut QueryContext<'_>| strategy.query(ctx).unwrap();
            let batch = run_query(q, &pool, &probs, &lab, b, seed);
            prop_assert_eq!(batch.len(), b);
            let mut sorted = batch.clone();
            sorted.sort_unstable();
            sorted.dedup();
            prop_assert_eq!(sorted.len(), b);
            prop_assert!(batch.iter().all(|&i| i < m));
            // same contents, same seed, same batch
            prop_assert_eq!(run_query(q, &pool, &probs, &lab, b, seed), batch);
        }
    }

    #[test]
    fn entropy_scores_ignore_class_order(rows in 1usize..20, c in 1usize..6, seed in any::<u64>()) {
        let mut rng = rng_from_seed(seed);
        let probs = uniform(&mut rng, rows, c, 0.001, 0.999);
        let shift = seed as usize % c;
        let permuted = Matrix::from_vec(
            rows,
            c,
            probs.row_iter().flat_map(|r| (0..c).map(move |k| r[(k + shift) % c])).collect(),
        ).unwrap();
        for (a, b) in score_entropy(&probs).iter().zip(score_entropy(&permuted)) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn badge_row_norm_grows_with_embedding_norm(c in 1usize..4, d in 1usize..5, seed in any::<u64>()) {
        let mut rng = rng_from_seed(seed);
        let probs = uniform(&mut rng, 1, c, 0.01, 0.99);
        let x = uniform(&mut rng, 1, d, -1.0, 1.0);
        let norm = |s: f64| {
            let g = badge_embeddings(&probs, &x.map(|v| v * s));
            g.row(0).iter().map(|v| v * v).sum::<f64>().sqrt()
        };
        let (a, b, c3) = (norm(0.5), norm(1.0), norm(3.0));
        prop_assert!(a <= b && b <= c3);
    }
}

/// `P(X >= k)` for `X ~ Binomial(n, p)`.
fn binomial_upper_tail(n: u64, p: f64, k: u64) -> f64 {
    let mut pmf = (1.0 - p).powi(n as i32);
    let mut below = 0.0;
    for j in 0..k {
        below += pmf;
        pmf *= (n - j) as f64 / (j + 1) as f64 * p / (1.0 - p);
    }
    (1.0 - below).max(0.0)
}

#[test]
fn random_selection_frequencies_are_uniform() {
    let (m, b, trials) = (10_000usize, 10usize, 1000u64);
    let pool = Matrix::<f64>::zeros(m, 1);
    let probs = Matrix::from_vec(m, 1, vec![0.5; m]).unwrap();
    let lab = Matrix::<f64>::zeros(0, 1);
    let mut counts = vec![0u64; m];
    for seed in 0..trials {
        for i in run_query(query_random, &pool, &probs, &lab, b, seed) {
            counts[i] += 1;
        }
    }
    assert_eq!(counts.iter().sum::<u64>(), trials * b as u64);

    // Counts average 1, far from the normal regime, so the 5 sigma band is
    // applied as its tail probability on the exact binomial.
    let p = b as f64 / m as f64;
    let five_sigma_tail = 2.866_515_718_791_933e-7;
    let worst = *counts.iter().max().unwrap();
    assert!(
        binomial_upper_tail(trials, p, worst) >= five_sigma_tail,
        "an index was drawn {worst} times"
    );

    // The share of never-drawn indices is itself binomial.
    let p0 = (1.0 - p).powi(trials as i32);
    let zeros = counts.iter().filter(|&&k| k == 0).count() as f64;
    let sigma = (m as f64 * p0 * (1.0 - p0)).sqrt();
    assert!(
        (zeros - m as f64 * p0).abs() <= 5.0 * sigma,
        "{zeros} untouched indices"
    );
}

#[test]
fn badge_prefers_the_uncertain_large_row() {
    // row 3 is maximally uncertain with a large embedding; the rest are confident and tiny
    let m = 12;
    let c = 3;
    let mut probs = Matrix::from_vec(m, c, vec![0.999; m * c]).unwrap();
    probs.row_mut(3).fill(0.5);
    let mut pool = Matrix::from_vec(m, 4, vec![0.01; m * 4]).unwrap();
    pool.row_mut(3).fill(10.0);
    let lab = Matrix::<f64>::zeros(0, 4);
    // b = 1 is a uniform draw, so look at the first k-means++ pick after it
    let mut hits = 0;
    for seed in 0..200 {
        let batch = run_query(query_badge, &pool, &probs, &lab, 2, seed);
        hits += usize::from(batch.contains(&3));
    }
    assert!(hits >= 195, "uncertain row chosen in {hits}/200 batches");
}

#[test]
fn kmeanspp_second_center_follows_d2_weights() {
    let pts = Matrix::from_rows(&[
        [0.0, 0.0],
        [1.0, 0.0],
        [0.0, 2.0],
        [3.0, 1.0],
        [-1.0, -1.0],
        [2.0, 2.0],
        [0.5, 0.5],
        [4.0, -2.0],
    ]);
    let first = 0;
    let weights: Vec<f64> = (0..8).map(|i| pts.sq_dist(i, first)).collect();
    let total: f64 = weights.iter().sum();
    let trials = 10_000u64;
    let mut counts = [0u64; 8];
    for seed in 0..trials {
        let chosen = kmeanspp_extend(&pts, vec![first], 2, &mut rng_from_seed(seed));
        counts[chosen[1]] += 1;
    }
    assert_eq!(counts[first], 0);
    for i in 0..8 {
        let p = weights[i] / total;
        let sigma = (trials as f64 * p * (1.0 - p)).sqrt();
        let dev = (counts[i] as f64 - trials as f64 * p).abs();
        assert!(
            dev <= 3.0 * sigma.max(f64::MIN_POSITIVE),
            "point {i}: {} vs {}",
            counts[i],
            trials as f64 * p
        );
    }
}

#[test]
fn kmeans_beats_random_assignments() {
    let mut rng = rng_from_seed(21);
    for trial in 0..10 {
        let pts = uniform(&mut rng, 40, 2, -5.0, 5.0);
        let km = kmeans(&pts, 3, &mut rng_from_seed(trial), KMeansConfig::default());
        for _ in 0..10 {
            let assign: Vec<usize> = (0..40).map(|_| rng.random_range(0..3)).collect();
            let mut inertia = 0.0;
            for k in 0..3 {
                let members: Vec<usize> = (0..40).filter(|&i| assign[i] == k).collect();
                if members.is_empty() {
                    continue;
                }
                let mut centroid = [0.0; 2];
                for &i in &members {
                    centroid[0] += pts[(i, 0)] / members.len() as f64;
                    centroid[1] += pts[(i, 1)] / members.len() as f64;
                }
                inertia += members.iter().map(|&i| sq_dist(pts.row(i), &centroid)).sum::<f64>();
            }
            assert!(km.inertia <= inertia + 1e-9);
        }
    }
}

fn blobs(rng: &mut impl Rng, centers: &[[f64; 2]], per: usize, spread: f64) -> Matrix<f64> {
    let rows: Vec<[f64; 2]> = centers
        .iter()
        .flat_map(|c| (0..per).map(move |_| *c).collect::<Vec<_>>())
        .map(|c| {
            [
                c[0] + rng.random_range(-spread..spread),
                c[1] + rng.random_range(-spread..spread),
            ]
        })
        .collect();
    Matrix::from_rows(&rows)
}

#[test]
fn typiclust_covers_both_blobs() {
    for seed in 0..20 {
        let mut rng = rng_from_seed(100 + seed);
        let pool = blobs(&mut rng, &[[0.0, 0.0], [50.0, 50.0]], 15, 1.0);
        let probs = Matrix::from_vec(30, 1, vec![0.5; 30]).unwrap();
        let lab = Matrix::<f64>::zeros(0, 2);
        let batch = run_query(query_typiclust, &pool, &probs, &lab, 2, seed);
        let blob = |i: usize| i / 15;
        assert_ne!(blob(batch[0]), blob(batch[1]), "seed {seed}: {batch:?}");
    }
}

#[test]
fn typiclust_skips_the_outlier() {
    let mut rng = rng_from_seed(7);
    let mut rows: Vec<Vec<f64>> = blobs(&mut rng, &[[0.0, 0.0]], 25, 0.5)
        .row_iter()
        .map(<[f64]>::to_vec)
        .collect();
    rows.push(vec![8.0, 8.0]);
    let pool = Matrix::from_rows(&rows);
    let probs = Matrix::from_vec(26, 1, vec![0.5; 26]).unwrap();
    let lab = Matrix::<f64>::zeros(0, 2);
    for seed in 0..20 {
        let batch = run_query(query_typiclust, &pool, &probs, &lab, 1, seed);
        assert_ne!(batch[0], 25, "seed {seed}");
    }
}

#[test]
fn typiclust_fallback_when_everything_is_covered() {
    let lab = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]]);
    let pool = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0], [1.0, 1.0], [1.0, 1.0]]);
    let probs = Matrix::from_vec(4, 2, vec![0.3; 8]).unwrap();
    for seed in 0..10 {
        let mut batch = run_query(query_typiclust, &pool, &probs, &lab, 3, seed);
        batch.sort_unstable();
        batch.dedup();
        assert_eq!(batch.len(), 3);
        assert!(batch.iter().all(|&i| i < 4));
    }
}
