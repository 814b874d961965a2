//! Linear multi-label classification head trained with binary cross-entropy,
//! Rectified Adam and a cosine-annealed learning rate.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{dot, Matrix};
use crate::rng::rng_from_seed;

/// Probabilities inside the loss are clamped to `[BCE_CLAMP, 1 - BCE_CLAMP]`.
pub const BCE_CLAMP: f64 = 1e-7;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("ShapeMismatch: {0}")]
    ShapeMismatch(String),
    #[error("NonFiniteGradient at parameter {0}")]
    NonFiniteGradient(usize),
    #[error("EmptyLabeledSet: cannot train on zero instances")]
    EmptyLabeledSet,
    #[error("InvalidTrainConfig: {0}")]
    InvalidConfig(String),
}

/// Weights (`C x D`) and bias (`C`) of the linear head.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams {
    pub weights: Matrix<f64>,
    pub bias: Vec<f64>,
}

impl HeadParams {
    pub fn num_classes(&self) -> usize {
        self.weights.rows()
    }

    pub fn dim(&self) -> usize {
        self.weights.cols()
    }

    /// Number of scalar parameters, `C * D + C`.
    pub fn len(&self) -> usize {
        self.weights.as_slice().len() + self.bias.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Parameters flattened as weights (row-major) followed by bias.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.len());
        flat.extend_from_slice(self.weights.as_slice());
        flat.extend_from_slice(&self.bias);
        flat
    }

    fn load_flat(&mut self, flat: &[f64]) {
        let nw = self.weights.as_slice().len();
        self.weights.as_mut_slice().copy_from_slice(&flat[..nw]);
        self.bias.copy_from_slice(&flat[nw..]);
    }

    /// Raw scores `W x + b` for every row of `x`.
    pub fn logits(&self, x: &Matrix<f64>) -> Result<Matrix<f64>, ModelError> {
        if x.cols() != self.dim() {
            return Err(ModelError::ShapeMismatch(format!(
                "input has {} columns, head expects {}",
                x.cols(),
                self.dim()
            )));
        }
        let c = self.num_classes();
        let mut out = Matrix::zeros(x.rows(), c);
        for (i, xi) in x.row_iter().enumerate() {
            let row = out.row_mut(i);
            for (k, slot) in row.iter_mut().enumerate() {
                *slot = dot(self.weights.row(k), xi) + self.bias[k];
            }
        }
        Ok(out)
    }
}

/// Optimizer and schedule hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_max: f64,
    pub lr_min: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 128,
            lr_max: 0.05,
            lr_min: 0.0,
            weight_decay: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: &str| Err(ModelError::InvalidConfig(msg.to_owned()));
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if !(self.beta1 > 0.0 && self.beta1 < 1.0 && self.beta2 > 0.0 && self.beta2 < 1.0) {
            return bad("beta1 and beta2 must lie in (0, 1)");
        }
        if !(self.lr_min >= 0.0 && self.lr_max > self.lr_min && self.lr_max.is_finite()) {
            return bad("learning rates must satisfy lr_max > lr_min >= 0");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay must be finite and >= 0");
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be finite and > 0");
        }
        Ok(())
    }
}

/// Glorot-uniform weights in `[-a, a]`, `a = sqrt(6 / (D + C))`, and a zero bias.
pub fn init_head(num_classes: usize, dim: usize, seed: u64) -> HeadParams {
    let mut rng = rng_from_seed(seed);
    let a = (6.0 / (dim + num_classes) as f64).sqrt();
    let data = (0..num_classes * dim).map(|_| rng.random_range(-a..=a)).collect();
    HeadParams {
        weights: Matrix::from_vec(num_classes, dim, data).expect("sized"),
        bias: vec![0.0; num_classes],
    }
}

/// Logistic sigmoid, kept strictly inside `(0, 1)`.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    let p = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// Per-class sigmoid probabilities for every row of `x`.
pub fn predict_probs(head: &HeadParams, x: &Matrix<f64>) -> Result<Matrix<f64>, ModelError> {
    Ok(head.logits(x)?.map(sigmoid))
}

fn check_same_shape(probs: &Matrix<f64>, labels: &Matrix<u8>) -> Result<(), ModelError> {
    if probs.shape() != labels.shape() {
        return Err(ModelError::ShapeMismatch(format!(
            "probabilities are {:?}, labels are {:?}",
            probs.shape(),
            labels.shape()
        )));
    }
    Ok(())
}

/// Mean binary cross-entropy over all `M * C` entries.
pub fn bce_loss(probs: &Matrix<f64>, labels: &Matrix<u8>) -> Result<f64, ModelError> {
    check_same_shape(probs, labels)?;
    let n = probs.as_slice().len();
    if n == 0 {
        return Ok(0.0);
    }
    let total: f64 = probs
        .as_slice()
        .iter()
        .zip(labels.as_slice())
        .map(|(&p, &y)| {
            let p = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
            if y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    Ok(total / n as f64)
}

/// Gradients of [`bce_loss`] with respect to the head parameters, using
/// `dL/dlogit = (p - y) / (M * C)`.
pub fn bce_gradients(head: &HeadParams, x: &Matrix<f64>, labels: &Matrix<u8>) -> Result<HeadParams, ModelError> {
    let probs = predict_probs(head, x)?;
    check_same_shape(&probs, labels)?;
    let (m, c) = probs.shape();
    let scale = 1.0 / (m * c) as f64;
    let mut grads = HeadParams {
        weights: Matrix::zeros(c, head.dim()),
        bias: vec![0.0; c],
    };
    for i in 0..m {
        let xi = x.row(i);
        for k in 0..c {
            let delta = (probs[(i, k)] - f64::from(labels[(i, k)])) * scale;
            grads.bias[k] += delta;
            for (g, &xv) in grads.weights.row_mut(k).iter_mut().zip(xi) {
                *g += delta * xv;
            }
        }
    }
    Ok(grads)
}

/// `lr_min + (lr_max - lr_min) * (1 + cos(pi * epoch / total)) / 2`.
pub fn cosine_lr(epoch: usize, total_epochs: usize, lr_max: f64, lr_min: f64) -> f64 {
    debug_assert!(epoch <= total_epochs);
    let frac = if total_epochs == 0 {
        0.0
    } else {
        epoch as f64 / total_epochs as f64
    };
    lr_min + 0.5 * (lr_max - lr_min) * (1.0 + (std::f64::consts::PI * frac).cos())
}

/// Step count and moment accumulators of Rectified Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct RAdamState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl RAdamState {
    pub fn new(num_params: usize) -> Self {
        Self {
            step: 0,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
        }
    }
}

/// Length of the approximated simple moving average at step `t`:
/// `rho_inf - 2 t beta2^t / (1 - beta2^t)`.
pub fn radam_rho(step: u64, beta2: f64) -> f64 {
    let rho_inf = 2.0 / (1.0 - beta2) - 1.0;
    let beta2_t = beta2.powi(step as i32);
    rho_inf - 2.0 * step as f64 * beta2_t / (1.0 - beta2_t)
}

/// Variance rectification applies only once the moving-average length exceeds this.
pub const RADAM_RHO_THRESHOLD: f64 = 4.0;

/// One Rectified Adam update, in place. Weight decay is added to the
/// gradient before the moment updates.
pub fn radam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut RAdamState,
    lr: f64,
    cfg: &TrainConfig,
) -> Result<(), ModelError> {
    if params.len() != grads.len() || params.len() != state.m.len() || params.len() != state.v.len() {
        return Err(ModelError::ShapeMismatch(format!(
            "params {}, grads {}, state {}",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(ModelError::NonFiniteGradient(i));
    }
    let (beta1, beta2) = (cfg.beta1, cfg.beta2);
    state.step += 1;
    let t = state.step;
    let bias1 = 1.0 - beta1.powi(t as i32);
    let bias2 = 1.0 - beta2.powi(t as i32);
    let rho_inf = 2.0 / (1.0 - beta2) - 1.0;
    let rho_t = radam_rho(t, beta2);
    let rect = (rho_t > RADAM_RHO_THRESHOLD)
        .then(|| (((rho_t - 4.0) * (rho_t - 2.0) * rho_inf) / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t)).sqrt());

    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        let g = g + cfg.weight_decay * *p;
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let m_hat = *m / bias1;
        match rect {
            Some(r) => {
                let denom = (*v / bias2).sqrt() + cfg.epsilon;
                *p -= lr * r * m_hat / denom;
            }
            None => *p -= lr * m_hat,
        }
    }
    Ok(())
}

const SHUFFLE_STREAM_OFFSET: u64 = 0x9e37_79b9_7f4a_7c15;

/// Trains a freshly initialized head (see [`init_head`]) on the given rows
/// of `x`/`labels`.
pub fn train_head(
    x: &Matrix<f64>,
    labels: &Matrix<u8>,
    indices: &[usize],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<HeadParams, ModelError> {
    let head = init_head(labels.cols(), x.cols(), seed);
    fit_head(head, x, labels, indices, cfg, seed)
}

/// Trains `head` in place of a fresh initialization.
///
/// Every epoch reshuffles `indices`, walks mini-batches of at most
/// `batch_size` rows (the last one may be short) and applies one RAdam step
/// per batch at the epoch's cosine learning rate.
pub fn fit_head(
    mut head: HeadParams,
    x: &Matrix<f64>,
    labels: &Matrix<u8>,
    indices: &[usize],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<HeadParams, ModelError> {
    cfg.validate()?;
    if indices.is_empty() {
        return Err(ModelError::EmptyLabeledSet);
    }
    if x.rows() != labels.rows() || x.cols() != head.dim() || labels.cols() != head.num_classes() {
        return Err(ModelError::ShapeMismatch(format!(
            "features {:?}, labels {:?}, head {}x{}",
            x.shape(),
            labels.shape(),
            head.num_classes(),
            head.dim()
        )));
    }
    // Separate stream from the initializer so shuffles do not reuse its draws.
    let mut rng = rng_from_seed(seed.wrapping_add(SHUFFLE_STREAM_OFFSET));
    let mut order = indices.to_vec();
    let mut state = RAdamState::new(head.len());
    let mut flat = head.to_flat();

    for epoch in 0..cfg.epochs {
        let lr = cosine_lr(epoch, cfg.epochs, cfg.lr_max, cfg.lr_min);
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let xb = x.select_rows(batch);
            let yb = labels.select_rows(batch);
            let grads = bce_gradients(&head, &xb, &yb)?.to_flat();
            radam_step(&mut flat, &grads, &mut state, lr, cfg)?;
            head.load_flat(&flat);
        }
    }
    Ok(head)
}
