//! Full-batch gradient-descent training for the micro network.
//!
//! The optimizer is deliberately plain: classical momentum, a fixed
//! learning rate, and the whole training split in every step. Targets are
//! standardized blood-volume-pulse waveforms and the loss is
//! `1 - pearson`, so the net only has to learn the pulse shape, not its
//! scale.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use super::loss::pearson_loss;
use super::micro::{micro_backward, micro_forward, MicroGradients, MicroNetParams};
use crate::scalar::Real;
use crate::signal::{standardize, VideoClip, Waveform};
use crate::{Error, Result};

/// Momentum coefficient for the parameter updates.
pub const TRAIN_MOMENTUM: f64 = 0.9;

/// A run counts as converged when the final held-out loss drops below
/// this (0 is perfect correlation, 1 is chance).
pub const CONVERGENCE_THRESHOLD: f64 = 0.3;

/// Losses for one epoch. `train_loss` is measured before the update,
/// `holdout_loss` after it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub holdout_loss: f64,
}

/// Full training record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainLog {
    pub n_train: usize,
    pub n_holdout: usize,
    pub epochs: Vec<EpochStats>,
    pub final_holdout_loss: f64,
    pub converged: bool,
}

fn mean_loss<F: Real>(
    params: &MicroNetParams<F>,
    items: &[(&VideoClip<F>, Array1<F>)],
) -> Result<f64> {
    let mut total = 0.0;
    for (clip, target) in items {
        let (pred, _) = micro_forward(params, clip)?;
        total += pearson_loss(pred.samples(), target)?.value.to_f64_c();
    }
    Ok(total / items.len() as f64)
}

/// Trains a freshly initialized net on `(clip, pulse)` pairs.
///
/// The last `max(2, n/4)` items are held out for monitoring and never used
/// for updates. Failure to converge is reported in the log rather than as
/// an error, since a short run is still a usable warm start.
pub fn train_micro<F: Real>(
    dataset: &[(VideoClip<F>, Waveform<F>)],
    epochs: usize,
    learning_rate: f64,
    seed: u64,
) -> Result<(MicroNetParams<F>, TrainLog)> {
    if dataset.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n_holdout = (dataset.len() / 4).max(2);
    if dataset.len() <= n_holdout {
        return Err(Error::InvalidLength(format!(
            "dataset of {} items leaves nothing to train on after holding out {}",
            dataset.len(),
            n_holdout
        )));
    }
    let n_train = dataset.len() - n_holdout;

    let targets: Vec<Array1<F>> = dataset
        .iter()
        .map(|(_, bvp)| standardize(bvp).map(|w| w.samples().clone()))
        .collect::<Result<_>>()?;
    let train: Vec<(&VideoClip<F>, Array1<F>)> = dataset[..n_train]
        .iter()
        .zip(&targets[..n_train])
        .map(|((clip, _), t)| (clip, t.clone()))
        .collect();
    let holdout: Vec<(&VideoClip<F>, Array1<F>)> = dataset[n_train..]
        .iter()
        .zip(&targets[n_train..])
        .map(|((clip, _), t)| (clip, t.clone()))
        .collect();

    let first = &dataset[0].0;
    let mut params = MicroNetParams::<F>::init(first.height(), first.width(), seed);
    let mut velocity = MicroGradients::zeros_like(&params);
    let mu = F::from_f64_c(TRAIN_MOMENTUM);
    let lr = F::from_f64_c(learning_rate);
    let inv_n = F::from_f64_c(1.0 / n_train as f64);

    let mut stats = Vec::with_capacity(epochs);
    for epoch in 1..=epochs {
        let mut batch = MicroGradients::zeros_like(&params);
        let mut train_loss = 0.0;
        for (clip, target) in &train {
            let (pred, cache) = micro_forward(&params, clip)?;
            let loss = pearson_loss(pred.samples(), target)?;
            train_loss += loss.value.to_f64_c();
            let grads = micro_backward(&params, &cache, &loss.grad)?;
            batch.scale_add(F::one(), inv_n, &grads);
        }
        train_loss /= n_train as f64;

        velocity.scale_add(mu, F::one(), &batch);
        params.axpy(-lr, &velocity);

        let holdout_loss = mean_loss(&params, &holdout)?;
        stats.push(EpochStats {
            epoch,
            train_loss,
            holdout_loss,
        });
    }

    let final_holdout_loss = match stats.last() {
        Some(s) => s.holdout_loss,
        None => mean_loss(&params, &holdout)?,
    };
    let log = TrainLog {
        n_train,
        n_holdout,
        epochs: stats,
        final_holdout_loss,
        converged: final_holdout_loss < CONVERGENCE_THRESHOLD,
    };
    Ok((params, log))
}
