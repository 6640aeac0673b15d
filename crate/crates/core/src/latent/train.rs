use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::dataset::TransitionDataset;
use super::mlp::MlpWeights;
use super::normalize::NormalizationSpec;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLoss>,
}

impl TrainingLog {
    pub fn final_train_rmse(&self) -> f64 {
        self.epochs.last().map_or(f64::NAN, |e| e.train_mse.sqrt())
    }

    pub fn final_val_rmse(&self) -> f64 {
        self.epochs.last().map_or(f64::NAN, |e| e.val_mse.sqrt())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_mse,val_mse\n");
        for e in &self.epochs {
            s.push_str(&format!("{},{},{}\n", e.epoch, e.train_mse, e.val_mse));
        }
        s
    }
}

/// Optimizer schedule shared by both training stages.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainSchedule {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
}

fn mse(pred: &[f64], target: &[f64]) -> f64 {
    pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pred.len() as f64
}

/// Gradient of the per-sample mean squared error with respect to `pred`.
fn mse_grad(pred: &[f64], target: &[f64]) -> Vec<f64> {
    let n = pred.len() as f64;
    pred.iter().zip(target).map(|(p, t)| 2.0 * (p - t) / n).collect()
}

/// Mean over `inputs` of the reconstruction MSE `|dec(enc(x)) - x|²/dim`.
pub fn reconstruction_mse(encoder: &MlpWeights, decoder: &MlpWeights, inputs: &[Vec<f64>]) -> Result<f64> {
    if inputs.is_empty() {
        return Ok(f64::NAN);
    }
    let mut total = 0.0;
    for x in inputs {
        let y = decoder.forward(&encoder.forward(x)?)?;
        total += mse(&y, x);
    }
    Ok(total / inputs.len() as f64)
}

fn run_epochs<F, V>(
    n_samples: usize,
    schedule: &TrainSchedule,
    seed: u64,
    nets: &mut [&mut MlpWeights],
    mut accumulate: F,
    mut validate: V,
) -> Result<TrainingLog>
where
    F: FnMut(usize, &[&mut MlpWeights], &mut [Vec<f64>]) -> Result<f64>,
    V: FnMut(&[&mut MlpWeights]) -> Result<f64>,
{
    if n_samples == 0 {
        return Err(Error::InvalidInput("training set is empty".into()));
    }
    let batch = schedule.batch_size.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n_samples).collect();
    let mut states: Vec<AdamState> = nets.iter().map(|n| AdamState::new(n.num_params())).collect();
    let mut grads: Vec<Vec<f64>> = nets.iter().map(|n| vec![0.0; n.num_params()]).collect();
    let mut log = TrainingLog::default();
    for epoch in 0..schedule.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(batch) {
            for g in &mut grads {
                g.iter_mut().for_each(|v| *v = 0.0);
            }
            for &i in chunk {
                loss_sum += accumulate(i, nets, &mut grads)?;
            }
            let scale = 1.0 / chunk.len() as f64;
            for ((net, g), st) in nets.iter_mut().zip(&mut grads).zip(&mut states) {
                g.iter_mut().for_each(|v| *v *= scale);
                adam_step(net.params_mut(), g, st, &schedule.adam);
            }
        }
        let val_mse = validate(nets)?;
        log.epochs.push(EpochLoss {
            epoch,
            train_mse: loss_sum / n_samples as f64,
            val_mse,
        });
    }
    Ok(log)
}

/// Fits encoder and decoder jointly to reconstruct normalized states.
pub fn train_autoencoder(
    train: &[Vec<f64>],
    val: &[Vec<f64>],
    mut encoder: MlpWeights,
    mut decoder: MlpWeights,
    schedule: &TrainSchedule,
    seed: u64,
) -> Result<(MlpWeights, MlpWeights, TrainingLog)> {
    let log = {
        let mut nets = [&mut encoder, &mut decoder];
        run_epochs(
            train.len(),
            schedule,
            seed,
            &mut nets,
            |i, nets, grads| {
                let (enc, dec) = (&*nets[0], &*nets[1]);
                let x = &train[i];
                let te = enc.forward_trace(x)?;
                let td = dec.forward_trace(te.output())?;
                let up = mse_grad(td.output(), x);
                let (ge, gd) = grads.split_at_mut(1);
                let dz = dec.backward(&td, &up, Some(&mut gd[0]))?;
                enc.backward(&te, &dz, Some(&mut ge[0]))?;
                Ok(mse(td.output(), x))
            },
            |nets| reconstruction_mse(&*nets[0], &*nets[1], val),
        )?
    };
    Ok((encoder, decoder, log))
}

/// One latent-dynamics training example: frozen encoding of `s_t`, normalized
/// action, normalized `s_{t+1}`.
#[derive(Clone, Debug)]
pub struct LatentSample {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

pub fn latent_samples(
    data: &TransitionDataset,
    encoder: &MlpWeights,
    norm: &NormalizationSpec,
) -> Result<Vec<LatentSample>> {
    data.triplets
        .iter()
        .map(|t| {
            let mut input = encoder.forward(&norm.normalize_state(&t.s))?;
            input.extend_from_slice(&norm.normalize_action(&t.a));
            Ok(LatentSample {
                input,
                target: norm.normalize_state(&t.s_next).to_vec(),
            })
        })
        .collect()
}

pub fn prediction_mse(dynamics: &MlpWeights, decoder: &MlpWeights, samples: &[LatentSample]) -> Result<f64> {
    if samples.is_empty() {
        return Ok(f64::NAN);
    }
    let mut total = 0.0;
    for s in samples {
        let y = decoder.forward(&dynamics.forward(&s.input)?)?;
        total += mse(&y, &s.target);
    }
    Ok(total / samples.len() as f64)
}

/// Fits the latent transition network through the frozen decoder. The
/// encoder is only used to precompute inputs and the decoder only to
/// propagate gradients; neither is modified.
pub fn train_latent_dynamics(
    train: &[LatentSample],
    val: &[LatentSample],
    decoder: &MlpWeights,
    mut dynamics: MlpWeights,
    schedule: &TrainSchedule,
    seed: u64,
) -> Result<(MlpWeights, TrainingLog)> {
    let log = {
        let mut nets = [&mut dynamics];
        run_epochs(
            train.len(),
            schedule,
            seed,
            &mut nets,
            |i, nets, grads| {
                let dynm = &*nets[0];
                let s = &train[i];
                let tl = dynm.forward_trace(&s.input)?;
                let td = decoder.forward_trace(tl.output())?;
                let up = mse_grad(td.output(), &s.target);
                let dz = decoder.backward(&td, &up, None)?;
                dynm.backward(&tl, &dz, Some(&mut grads[0]))?;
                Ok(mse(td.output(), &s.target))
            },
            |nets| prediction_mse(&*nets[0], decoder, val),
        )?
    };
    Ok((dynamics, log))
}

/// MSE of predicting `s_{t+1} = s_t` in normalized units.
pub fn persistence_mse(data: &TransitionDataset, norm: &NormalizationSpec) -> f64 {
    if data.is_empty() {
        return f64::NAN;
    }
    data.triplets
        .iter()
        .map(|t| mse(&norm.normalize_state(&t.s), &norm.normalize_state(&t.s_next)))
        .sum::<f64>()
        / data.len() as f64
}
