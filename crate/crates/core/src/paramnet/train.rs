use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{reconstruct, reconstruct_tape, NetWeights, UNetConfig};
use crate::autodiff::{Gradients, Tape};
use crate::error::{Error, Result};
use crate::grad::Gradient;
use crate::solvers::Problem;
use crate::tensor::SharingMode;
#[allow(unused_imports)]
use num_traits::Float;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub t_train: usize,
    pub t_test: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Coefficient of `||Theta||^2` in the loss; applied as decoupled decay.
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Validate every this many epochs (and after the last one).
    pub val_every: usize,
    pub seed: u64,
    pub mode: SharingMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            t_train: 64,
            t_test: 256,
            lr: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
            epochs: 20,
            batch_size: 4,
            val_every: 1,
            seed: 0,
            mode: SharingMode::XyT,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_train == 0 || self.batch_size == 0 || self.val_every == 0 {
            return Err(Error::invalid(
                "T_train, batch size and validation period must be positive",
            ));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid("learning rate must be nonnegative"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.eps > 0.0) {
            return Err(Error::invalid("Adam moments need beta in [0, 1) and eps > 0"));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::invalid("weight decay must be nonnegative"));
        }
        Ok(())
    }
}

/// First and second moment estimates of Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }
}

/// One Adam update with bias correction and decoupled weight decay:
/// `w -= lr (m_hat / (sqrt(v_hat) + eps) + wd w)`.
pub fn adam_step(w: &mut [f64], grads: &[f64], state: &mut AdamState, cfg: &TrainConfig) -> Result<()> {
    if grads.len() != w.len() || state.m.len() != w.len() || state.v.len() != w.len() {
        return Err(Error::shape("weights, gradients and optimizer state differ in length"));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for i in 0..w.len() {
        let g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        w[i] -= cfg.lr * (m_hat / (v_hat.sqrt() + cfg.eps) + cfg.weight_decay * w[i]);
    }
    Ok(())
}

fn truth_of(p: &Problem) -> Result<&crate::tensor::Tensor> {
    p.truth
        .as_ref()
        .ok_or_else(|| Error::invalid("training problems need ground truth"))
}

/// Per-sample MSE and its gradient with respect to the weights.
fn sample_grad(problem: &Problem, weights: &NetWeights, mode: SharingMode, iters: usize) -> Result<(f64, Vec<f64>)> {
    let truth = truth_of(problem)?;
    let grad = Gradient::new(problem.shape(), problem.dtype());
    let mut tape = Tape::new();
    let theta = tape.param(weights.theta.clone());
    let x = reconstruct_tape(&mut tape, problem, &grad, theta, &weights.config, mode, iters)?;
    let t = tape.constant(truth.data().to_vec());
    let l = tape.mse(x, t, problem.shape().voxels() as f64)?;
    let value = tape.value(l)[0];
    let g: Gradients = tape.backward(l)?;
    Ok((value, g.get_or_zero(theta, weights.theta.len())))
}

/// Mean MSE over `batch` after `iters` unrolled iterations plus
/// `weight_decay ||Theta||^2`, with its gradient.
pub fn loss(
    batch: &[Problem],
    weights: &NetWeights,
    mode: SharingMode,
    iters: usize,
    weight_decay: f64,
) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let n = batch.len() as f64;
    let mut value = 0.0;
    let mut grad = vec![0.0; weights.theta.len()];
    for p in batch {
        let (v, g) = sample_grad(p, weights, mode, iters)?;
        value += v / n;
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b / n);
    }
    let sq: f64 = weights.theta.iter().map(|w| w * w).sum();
    value += weight_decay * sq;
    grad.iter_mut()
        .zip(&weights.theta)
        .for_each(|(g, w)| *g += 2.0 * weight_decay * w);
    Ok((value, grad))
}

/// Mean reconstruction MSE without gradients.
pub fn mean_mse(problems: &[Problem], weights: &NetWeights, mode: SharingMode, iters: usize) -> Result<f64> {
    if problems.is_empty() {
        return Err(Error::invalid("no problems to evaluate"));
    }
    let mut total = 0.0;
    for p in problems {
        let truth = truth_of(p)?;
        let x = reconstruct(p, weights, mode, iters)?;
        let s: f64 = x.data().iter().zip(truth.data()).map(|(a, b)| (a - b) * (a - b)).sum();
        total += s / p.shape().voxels() as f64;
    }
    Ok(total / problems.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryEntry {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Weights with the lowest validation loss seen (initial weights included).
    pub weights: NetWeights,
    pub best_val: f64,
    pub best_epoch: usize,
    pub initial_val: f64,
    /// Entry 0 holds the initial validation loss.
    pub history: Vec<HistoryEntry>,
}

/// Trains from seeded initial weights; see [`train_from`].
pub fn train(
    train_set: &[Problem],
    val_set: &[Problem],
    net: &UNetConfig,
    cfg: &TrainConfig,
    on_epoch: &mut dyn FnMut(&HistoryEntry),
) -> Result<TrainOutcome> {
    let init = NetWeights::init(*net, cfg.seed)?;
    train_from(train_set, val_set, init, cfg, on_epoch)
}

/// Seeded mini-batch Adam on the data term; the decay term enters through
/// the decoupled update. Returns the best checkpoint by validation loss.
pub fn train_from(
    train_set: &[Problem],
    val_set: &[Problem],
    init: NetWeights,
    cfg: &TrainConfig,
    on_epoch: &mut dyn FnMut(&HistoryEntry),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::invalid("training and validation splits must be nonempty"));
    }
    let mut weights = init;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7472_6169_6e21);
    let mut state = AdamState::new(weights.theta.len());
    let initial_val = mean_mse(val_set, &weights, cfg.mode, cfg.t_train)?;
    let first = HistoryEntry {
        epoch: 0,
        train_loss: f64::NAN,
        val_loss: Some(initial_val),
    };
    on_epoch(&first);
    let mut history = vec![first];
    let (mut best, mut best_val, mut best_epoch) = (weights.clone(), initial_val, 0);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let n = batch.len() as f64;
            let mut grad = vec![0.0; weights.theta.len()];
            for &i in batch {
                let (v, g) = sample_grad(&train_set[i], &weights, cfg.mode, cfg.t_train)?;
                epoch_loss += v;
                grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b / n);
            }
            adam_step(&mut weights.theta, &grad, &mut state, cfg)?;
            if weights.theta.iter().any(|w| !w.is_finite()) {
                return Err(Error::Diverged(epoch));
            }
        }
        let validate = epoch % cfg.val_every == 0 || epoch == cfg.epochs;
        let val_loss = if validate {
            let v = mean_mse(val_set, &weights, cfg.mode, cfg.t_train)?;
            if v < best_val {
                best = weights.clone();
                best_val = v;
                best_epoch = epoch;
            }
            Some(v)
        } else {
            None
        };
        let entry = HistoryEntry {
            epoch,
            train_loss: epoch_loss / train_set.len() as f64,
            val_loss,
        };
        on_epoch(&entry);
        history.push(entry);
    }
    Ok(TrainOutcome {
        weights: best,
        best_val,
        best_epoch,
        initial_val,
        history,
    })
}
