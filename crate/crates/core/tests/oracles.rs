//! Library results against slow, obviously-correct reimplementations.

use albird_core::metrics::{auroc_macro, average_precision, binary_auroc, cmap, top1_acc};
use albird_core::model::{bce_gradients, bce_loss, init_head, predict_probs, HeadParams};
use albird_core::rng::rng_from_seed;
use albird_core::strategies::{binary_entropy, query_entropy, QueryContext};
use albird_core::Matrix;
use rand::Rng;

/// Precision at the rank of each positive, with ties ranked by instance index.
fn brute_ap(scores: &[f64], labels: &[u8]) -> Option<f64> {
    let n = scores.len();
    let rank = |i: usize| {
        (0..n)
            .filter(|&j| scores[j] > scores[i] || (scores[j] == scores[i] && j < i))
            .count()
            + 1
    };
    let positives: Vec<usize> = (0..n).filter(|&i| labels[i] == 1).collect();
    if positives.is_empty() {
        return None;
    }
    let total: f64 = positives
        .iter()
        .map(|&i| {
            let r = rank(i);
            let hits = positives.iter().filter(|&&j| rank(j) <= r).count();
            hits as f64 / r as f64
        })
        .sum();
    Some(total / positives.len() as f64)
}

fn brute_auroc(scores: &[f64], labels: &[u8]) -> Option<f64> {
    let mut credit = 0.0;
    let mut pairs = 0usize;
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] == 1 && labels[j] == 0 {
                pairs += 1;
                credit += if si > sj {
                    1.0
                } else if si == sj {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    (pairs > 0).then(|| credit / pairs as f64)
}

/// Scores drawn from a small grid so that ties are common.
fn random_problem(rng: &mut impl Rng) -> (Matrix<f64>, Matrix<u8>) {
    let m = rng.random_range(2..=64);
    let c = rng.random_range(1..=5);
    let levels = rng.random_range(2..=12);
    let scores = (0..m * c)
        .map(|_| rng.random_range(0..levels) as f64 / levels as f64)
        .collect();
    let labels = (0..m * c).map(|_| u8::from(rng.random_bool(0.3))).collect();
    (
        Matrix::from_vec(m, c, scores).unwrap(),
        Matrix::from_vec(m, c, labels).unwrap(),
    )
}

fn column<T: Copy + Default>(m: &Matrix<T>, c: usize) -> Vec<T> {
    m.row_iter().map(|r| r[c]).collect()
}

#[test]
fn average_precision_matches_rank_enumeration() {
    let mut rng = rng_from_seed(11);
    for _ in 0..300 {
        let (s, y) = random_problem(&mut rng);
        for c in 0..s.cols() {
            let (sc, yc) = (column(&s, c), column(&y, c));
            match brute_ap(&sc, &yc) {
                Some(want) => assert!((average_precision(&sc, &yc).unwrap() - want).abs() < 1e-12),
                None => assert!(average_precision(&sc, &yc).is_err()),
            }
        }
    }
}

#[test]
fn auroc_matches_pair_counting() {
    let mut rng = rng_from_seed(12);
    for _ in 0..300 {
        let (s, y) = random_problem(&mut rng);
        for c in 0..s.cols() {
            let (sc, yc) = (column(&s, c), column(&y, c));
            match (binary_auroc(&sc, &yc), brute_auroc(&sc, &yc)) {
                (Some(got), Some(want)) => assert!((got - want).abs() < 1e-12, "{got} vs {want}"),
                (None, None) => {}
                other => panic!("eligibility differs: {other:?}"),
            }
        }
    }
}

#[test]
fn class_means_match_oracles() {
    let mut rng = rng_from_seed(13);
    for _ in 0..200 {
        let (s, y) = random_problem(&mut rng);
        let aps: Vec<f64> = (0..s.cols())
            .filter_map(|c| brute_ap(&column(&s, c), &column(&y, c)))
            .collect();
        match cmap(&s, &y) {
            Ok(got) => {
                assert!((got.value - aps.iter().sum::<f64>() / aps.len() as f64).abs() < 1e-12);
                assert_eq!(got.skipped, s.cols() - aps.len());
            }
            Err(_) => assert!(aps.is_empty()),
        }
        let aucs: Vec<f64> = (0..s.cols())
            .filter_map(|c| brute_auroc(&column(&s, c), &column(&y, c)))
            .collect();
        match auroc_macro(&s, &y) {
            Ok(got) => assert!((got.value - aucs.iter().sum::<f64>() / aucs.len() as f64).abs() < 1e-12),
            Err(_) => assert!(aucs.is_empty()),
        }
    }
}

#[test]
fn top1_matches_direct_count() {
    let mut rng = rng_from_seed(14);
    for _ in 0..200 {
        let (s, y) = random_problem(&mut rng);
        let mut evaluated = 0;
        let mut correct = 0;
        for i in 0..s.rows() {
            if y.row(i).iter().all(|&v| v == 0) {
                continue;
            }
            evaluated += 1;
            let best = s.row(i).iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let first = s.row(i).iter().position(|&v| v == best).unwrap();
            correct += usize::from(y.row(i)[first] == 1);
        }
        match top1_acc(&s, &y) {
            Ok(t) => {
                assert_eq!(t.evaluated, evaluated);
                assert_eq!(t.accuracy, correct as f64 / evaluated as f64);
            }
            Err(_) => assert_eq!(evaluated, 0),
        }
    }
}

fn loss_at(head: &HeadParams, x: &Matrix<f64>, y: &Matrix<u8>) -> f64 {
    bce_loss(&predict_probs(head, x).unwrap(), y).unwrap()
}

#[test]
fn gradients_match_central_differences() {
    let mut rng = rng_from_seed(15);
    let h = 1e-4;
    for problem in 0..60 {
        let (m, d, c) = (rng.random_range(1..8), rng.random_range(1..6), rng.random_range(1..5));
        let x = Matrix::from_vec(m, d, (0..m * d).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let y = Matrix::from_vec(m, c, (0..m * c).map(|_| u8::from(rng.random_bool(0.4))).collect()).unwrap();
        let mut head = init_head(c, d, problem);
        head.bias.iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
        let analytic = bce_gradients(&head, &x, &y).unwrap().to_flat();

        let nw = c * d;
        for (k, &g) in analytic.iter().enumerate() {
            let nudge = |delta: f64| {
                let mut p = head.clone();
                if k < nw {
                    p.weights.as_mut_slice()[k] += delta;
                } else {
                    p.bias[k - nw] += delta;
                }
                loss_at(&p, &x, &y)
            };
            let numeric = (nudge(h) - nudge(-h)) / (2.0 * h);
            let rel = (g - numeric).abs() / g.abs().max(numeric.abs()).max(1e-6);
            assert!(rel < 1e-4, "problem {problem}, param {k}: {g} vs {numeric}");
        }
    }
}

#[test]
fn entropy_query_is_the_brute_force_top_b() {
    let mut rng = rng_from_seed(16);
    for _ in 0..100 {
        let m = rng.random_range(3..40);
        let c = rng.random_range(1..4);
        let b = rng.random_range(1..=m);
        // a coarse grid again, to exercise ties
        let probs = Matrix::from_vec(
            m,
            c,
            (0..m * c).map(|_| rng.random_range(1..10) as f64 / 10.0).collect(),
        )
        .unwrap();
        let x = Matrix::<f64>::zeros(m, 2);
        let labeled = Matrix::<f64>::zeros(0, 2);
        let mut qrng = rng_from_seed(0);
        let mut ctx = QueryContext {
            pool_embeddings: &x,
            pool_probs: &probs,
            labeled_embeddings: &labeled,
            b,
            rng: &mut qrng,
        };
        let got = query_entropy(&mut ctx).into_vec();

        let score = |i: usize| probs.row(i).iter().map(|&p| binary_entropy(p)).sum::<f64>() / c as f64;
        let mut want = Vec::new();
        let mut left: Vec<usize> = (0..m).collect();
        for _ in 0..b {
            let best = left
                .iter()
                .copied()
                .fold(None, |acc: Option<usize>, i| match acc {
                    Some(a) if score(a) >= score(i) => Some(a),
                    _ => Some(i),
                })
                .unwrap();
            want.push(best);
            left.retain(|&i| i != best);
        }
        assert_eq!(got, want);
    }
}
