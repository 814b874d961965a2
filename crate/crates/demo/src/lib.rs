//! WebAssembly bindings behind `www/index.html`.
//!
//! Every exported function returns a JSON string; the page parses it and
//! draws on a canvas. The plain Rust functions underneath are what the
//! native tests exercise.

use albird_core::experiment::{Experiment, Metric};
use albird_core::model::{
    cosine_lr, predict_probs, radam_rho, radam_step, train_head, RAdamState, RADAM_RHO_THRESHOLD,
};
use albird_core::strategies::score_entropy;
use albird_core::{synth_dataset, ExperimentConfig, SplitSpec, Strategy, SynthConfig, TrainConfig};
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("demo payloads serialize")
}

fn demo_train() -> TrainConfig {
    TrainConfig {
        epochs: 60,
        ..TrainConfig::default()
    }
}

#[derive(Debug, Serialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    /// Lowest positive class, or -1 for a row with no positives.
    pub class: i32,
}

#[derive(Debug, Serialize)]
pub struct Picks {
    pub points: Vec<Point>,
    pub pool: Vec<usize>,
    pub labeled: Vec<usize>,
    pub picked: Vec<usize>,
    /// Mean binary entropy of the current head on each pool point, aligned with `pool`.
    pub uncertainty: Vec<f64>,
}

/// One query on a two-dimensional blob dataset after `warmup` cycles of the
/// same strategy.
pub fn strategy_picks(strategy: &str, seed: u64, warmup: usize, b: usize) -> Result<Picks, String> {
    let strategy: Strategy = strategy.parse().map_err(|e| format!("{e}"))?;
    let synth = SynthConfig {
        noise_scale: 0.12,
        ..SynthConfig::new(400, 2, 3, 6)
    };
    let ds = synth_dataset(&synth, seed).map_err(|e| e.to_string())?;
    let cfg = ExperimentConfig {
        split: SplitSpec::new([1], [2]),
        strategies: vec![strategy],
        initial_size: 5,
        batch_b: b,
        num_cycles: warmup + 1,
        repetitions: 1,
        master_seed: seed,
        train: demo_train(),
        ..ExperimentConfig::default()
    };
    let exp = Experiment::new(&ds, cfg.clone()).map_err(|e| e.to_string())?;
    let run = exp.run_single(strategy, 0).map_err(|e| e.to_string())?;

    let mut labeled = run.initial.clone();
    for batch in &run.queried[..warmup] {
        labeled.extend(batch);
    }
    labeled.sort_unstable();
    let pool: Vec<usize> = exp
        .split()
        .pool
        .iter()
        .copied()
        .filter(|i| labeled.binary_search(i).is_err())
        .collect();

    let x = ds.features(false);
    let head =
        train_head(&x, ds.labels(), &labeled, &cfg.train, exp.train_seed(0, warmup)).map_err(|e| e.to_string())?;
    let probs = predict_probs(&head, &x.select_rows(&pool)).map_err(|e| e.to_string())?;

    let points = (0..ds.num_instances())
        .map(|i| {
            let e = ds.embeddings().row(i);
            let class = ds.labels().row(i).iter().position(|&v| v == 1).map_or(-1, |c| c as i32);
            Point {
                x: f64::from(e[0]),
                y: f64::from(e[1]),
                class,
            }
        })
        .collect();
    Ok(Picks {
        points,
        uncertainty: score_entropy(&probs),
        pool,
        labeled,
        picked: run.queried[warmup].clone(),
    })
}

#[derive(Debug, Serialize)]
pub struct Curve {
    pub strategy: String,
    pub labeled_count: Vec<usize>,
    pub cmap: Vec<f64>,
    pub auroc: Vec<f64>,
    pub t1acc: Vec<f64>,
}

/// Repetition-averaged learning curves of all four strategies on a small
/// synthetic dataset.
pub fn learning_curves(seed: u64, cycles: usize, b: usize, repetitions: usize) -> Result<Vec<Curve>, String> {
    let ds = synth_dataset(&SynthConfig::new(800, 8, 4, 8), seed).map_err(|e| e.to_string())?;
    let cfg = ExperimentConfig {
        split: SplitSpec::new([1], [2]),
        initial_size: 10,
        batch_b: b,
        num_cycles: cycles,
        repetitions,
        master_seed: seed,
        train: demo_train(),
        ..ExperimentConfig::default()
    };
    let curve = Experiment::new(&ds, cfg)
        .and_then(|e| e.run(1))
        .map_err(|e| e.to_string())?;
    Ok(Strategy::ALL
        .iter()
        .map(|&s| {
            let mean = |metric: Metric, cycle: usize| {
                let vals: Vec<f64> = curve
                    .rows
                    .iter()
                    .filter(|r| r.strategy == s && r.cycle == cycle)
                    .map(|r| metric.of(&r.metrics))
                    .collect();
                vals.iter().sum::<f64>() / vals.len() as f64
            };
            Curve {
                strategy: s.name().to_owned(),
                labeled_count: (0..=cycles).map(|t| 10 + t * b).collect(),
                cmap: (0..=cycles).map(|t| mean(Metric::Cmap, t)).collect(),
                auroc: (0..=cycles).map(|t| mean(Metric::Auroc, t)).collect(),
                t1acc: (0..=cycles).map(|t| mean(Metric::T1Acc, t)).collect(),
            }
        })
        .collect())
}

#[derive(Debug, Serialize)]
pub struct Trace {
    pub path: Vec<[f64; 2]>,
    pub lr: Vec<f64>,
    pub rectified: Vec<bool>,
    pub minimum: [f64; 2],
}

/// RAdam on `f(x, y) = (x - 1)^2 / 2 + 10 (y + 0.5)^2 / 2`, one step per
/// epoch of a cosine schedule.
pub fn radam_trace(lr_max: f64, steps: usize, start: [f64; 2]) -> Result<Trace, String> {
    let cfg = TrainConfig {
        lr_max,
        epochs: steps,
        ..TrainConfig::default()
    };
    cfg.validate().map_err(|e| e.to_string())?;
    let minimum = [1.0, -0.5];
    let curvature = [1.0, 10.0];
    let mut p = start.to_vec();
    let mut state = RAdamState::new(2);
    let mut trace = Trace {
        path: vec![start],
        lr: Vec::with_capacity(steps),
        rectified: Vec::with_capacity(steps),
        minimum,
    };
    for step in 0..steps {
        let lr = cosine_lr(step, steps, cfg.lr_max, cfg.lr_min);
        let grads: Vec<f64> = (0..2).map(|i| curvature[i] * (p[i] - minimum[i])).collect();
        radam_step(&mut p, &grads, &mut state, lr, &cfg).map_err(|e| e.to_string())?;
        trace.lr.push(lr);
        trace
            .rectified
            .push(radam_rho(state.step, cfg.beta2) > RADAM_RHO_THRESHOLD);
        trace.path.push([p[0], p[1]]);
    }
    Ok(trace)
}

#[wasm_bindgen(js_name = strategyPicks)]
pub fn strategy_picks_json(strategy: &str, seed: u32, warmup: u32, b: u32) -> Result<String, JsError> {
    strategy_picks(strategy, u64::from(seed), warmup as usize, b as usize)
        .map(|p| to_json(&p))
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = learningCurves)]
pub fn learning_curves_json(seed: u32, cycles: u32, b: u32, repetitions: u32) -> Result<String, JsError> {
    learning_curves(u64::from(seed), cycles as usize, b as usize, repetitions as usize)
        .map(|c| to_json(&c))
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = radamTrace)]
pub fn radam_trace_json(lr_max: f64, steps: u32, x0: f64, y0: f64) -> Result<String, JsError> {
    radam_trace(lr_max, steps as usize, [x0, y0])
        .map(|t| to_json(&t))
        .map_err(|e| JsError::new(&e))
}
